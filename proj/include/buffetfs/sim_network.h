#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "buffetfs/transport.h"

namespace buffetfs {

struct SimOptions {
  LatencyModel latency;
  // When false, one-way messages wait in their queues until DeliverNext()
  // or Drain() moves them.
  bool auto_deliver = true;
};

// In-process network. Synchronous calls run the server handler on the
// caller's thread and charge the latency model; one-way messages go through
// per-(source, destination) FIFO queues.
class SimNetwork {
 public:
  explicit SimNetwork(SimOptions options);
  ~SimNetwork();

  SimNetwork(const SimNetwork&) = delete;
  SimNetwork& operator=(const SimNetwork&) = delete;

  static std::string ClientAddress(ClientId id);

  void AttachServer(const std::string& address, ServerEndpoint* server);
  void DetachServer(const std::string& address);
  // Push channel for the server at `address`. Owned by the network.
  ClientNotifier* NotifierFor(const std::string& address);

  std::unique_ptr<Transport> Connect(ClientId id);

  // Everything that crossed the network, from every endpoint.
  RpcCounters SnapshotTotals() const { return totals_.Snapshot(); }
  void ResetTotals() { totals_.Reset(); }

  void Drain();

  struct Pending {
    uint64_t seq;
    std::string src;
    std::string dst;
    uint8_t tag;
  };
  std::vector<Pending> PendingMessages() const;
  size_t PendingCount(const std::string& src, const std::string& dst) const;
  // Delivers the head of the src->dst queue on the calling thread.
  Status DeliverNext(const std::string& src, const std::string& dst);

  void SetCallWaiter(CallWaiter* waiter);
  using ReplyObserver =
      std::function<void(ClientId, const RpcMessage& request, const RpcMessage& reply)>;
  void SetReplyObserver(ReplyObserver observer);

  const SimOptions& options() const { return options_; }

 private:
  class SimTransport;
  class Notifier;
  friend class SimTransport;
  friend class Notifier;

  struct Envelope {
    uint64_t seq;
    std::string src;
    std::string dst;
    Bytes frame;
  };
  using PairKey = std::pair<std::string, std::string>;

  Result<RpcMessage> Call(ClientId from, const std::string& address, const RpcMessage& request,
                          CounterSet* client_counters);
  bool Enqueue(const std::string& src, const std::string& dst, const RpcMessage& msg);
  void Deliver(Envelope env);
  void DeliveryLoop();
  void RegisterClient(ClientId id, SimTransport* t);
  void UnregisterClient(ClientId id);
  void SetSink(ClientId id, PushSink* sink);

  const SimOptions options_;
  CounterSet totals_;

  mutable std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  std::map<std::string, ServerEndpoint*> servers_;
  std::map<std::string, std::unique_ptr<Notifier>> notifiers_;
  std::map<ClientId, PushSink*> clients_;  // connected clients and their sinks
  std::map<PairKey, std::deque<Envelope>> queues_;
  std::deque<PairKey> order_;  // global send order, one key per queued message
  uint64_t next_seq_ = 1;
  int in_flight_ = 0;
  bool stop_ = false;
  CallWaiter* waiter_ = nullptr;
  ReplyObserver observer_;
  std::thread delivery_;
};

}  // namespace buffetfs
