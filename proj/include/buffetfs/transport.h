#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>

#include "buffetfs/messages.h"
#include "buffetfs/status.h"

namespace buffetfs {

// Cost of one synchronous round trip in the simulated network. Asynchronous
// messages cost nothing on the sender's clock.
struct LatencyModel {
  double rtt_us = 0;
  double per_byte_us = 0;  // charged on every frame byte, both directions
  double service_us = 0;

  bool Valid() const { return rtt_us >= 0 && per_byte_us >= 0 && service_us >= 0; }
  // Integer picoseconds so concurrent sums are order independent.
  int64_t CallCostPs(uint64_t request_bytes, uint64_t reply_bytes) const;
};

struct RpcCounters {
  uint64_t sync_rpcs = 0;
  uint64_t async_msgs = 0;
  uint64_t bytes_sent = 0;
  uint64_t bytes_received = 0;
  int64_t elapsed_ps = 0;               // simulated, or wall time for sockets
  std::map<uint8_t, uint64_t> per_type;  // keyed by the sent message's tag

  double elapsed_us() const { return static_cast<double>(elapsed_ps) / 1e6; }
  uint64_t count(uint8_t tag) const {
    auto it = per_type.find(tag);
    return it == per_type.end() ? 0 : it->second;
  }
  void Add(const RpcCounters& o);
  bool operator==(const RpcCounters&) const = default;
};

// Thread-safe accumulator.
class CounterSet {
 public:
  void RecordCall(uint8_t tag, uint64_t req_bytes, uint64_t reply_bytes, int64_t cost_ps);
  void RecordAsync(uint8_t tag, uint64_t bytes);
  RpcCounters Snapshot() const;
  void Reset();

 private:
  mutable std::mutex mu_;
  RpcCounters c_;
};

// A logical client flow (one benchmark worker, one test task). Whatever the
// current thread sends while a flow is bound is also charged to that flow.
class Flow {
 public:
  RpcCounters counters;
};

class ScopedFlow {
 public:
  explicit ScopedFlow(Flow* flow);
  ~ScopedFlow();
  ScopedFlow(const ScopedFlow&) = delete;
  ScopedFlow& operator=(const ScopedFlow&) = delete;

 private:
  Flow* prev_;
};

Flow* CurrentFlow();
void ChargeCurrentFlowCall(uint8_t tag, uint64_t req_bytes, uint64_t reply_bytes, int64_t cost_ps);
void ChargeCurrentFlowAsync(uint8_t tag, uint64_t bytes);

// Reply continuation. Called exactly once, possibly later and on another
// thread than the one that delivered the request.
using Responder = std::function<void(RpcMessage)>;

class ServerEndpoint {
 public:
  virtual ~ServerEndpoint() = default;
  virtual void HandleCall(ClientId from, RpcMessage request, Responder done) = 0;
  virtual void HandleOneWay(ClientId from, RpcMessage msg) = 0;
};

// Server -> client push channel.
class ClientNotifier {
 public:
  virtual ~ClientNotifier() = default;
  // False when the client has no live push channel.
  virtual bool Push(ClientId to, const RpcMessage& msg) = 0;
};

class PushSink {
 public:
  virtual ~PushSink() = default;
  virtual void HandlePush(const std::string& from_address, RpcMessage msg) = 0;
};

// A reply slot one caller blocks on.
class PendingCall {
 public:
  void Fulfill(Bytes reply);
  bool done() const;
  // Registers fn to run at fulfillment. Returns false (and does not register)
  // if the call is already done.
  bool OnDone(std::function<void()> fn);
  void Wait();
  Bytes TakeReply();

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
  Bytes reply_;
  std::function<void()> on_done_;
};

// Lets a deterministic scheduler park a caller whose reply is deferred.
class CallWaiter {
 public:
  virtual ~CallWaiter() = default;
  virtual void Wait(PendingCall& call) = 0;
};

using ErrorSink = std::function<void(const Status&)>;
void LogToStderr(const Status& s);

// Client side of a connection to any number of servers.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual ClientId client_id() const = 0;
  // Synchronous request/reply. An ErrorReply is a successful call.
  virtual Result<RpcMessage> Call(const std::string& address, const RpcMessage& request) = 0;
  // Enqueues a one-way message and returns before delivery.
  virtual Status Notify(const std::string& address, const RpcMessage& msg) = 0;
  // Blocks until every message this transport enqueued has been processed.
  virtual void Drain() = 0;
  virtual void SetPushSink(PushSink* sink) = 0;

  RpcCounters SnapshotCounters() const { return counters_.Snapshot(); }
  void ResetCounters() { counters_.Reset(); }

 protected:
  CounterSet counters_;
};

}  // namespace buffetfs
