#include "buffetfs/sim_network.h"

#include <algorithm>

#include "buffetfs/wire.h"

namespace buffetfs {

class SimNetwork::SimTransport : public Transport {
 public:
  SimTransport(SimNetwork* net, ClientId id) : net_(net), id_(id) {
    net_->RegisterClient(id_, this);
  }
  ~SimTransport() override { net_->UnregisterClient(id_); }

  ClientId client_id() const override { return id_; }

  Result<RpcMessage> Call(const std::string& address, const RpcMessage& request) override {
    return net_->Call(id_, address, request, &counters_);
  }

  Status Notify(const std::string& address, const RpcMessage& msg) override {
    uint8_t tag = TagOf(msg);
    if (!IsOneWay(tag)) {
      return Status::InvalidArgument(std::string(MessageName(tag)) + " is not one-way");
    }
    uint64_t size = EncodeMessage(msg).size();
    counters_.RecordAsync(tag, size);
    ChargeCurrentFlowAsync(tag, size);
    if (!net_->Enqueue(ClientAddress(id_), address, msg)) {
      LogToStderr(Status::Unreachable(address));
    }
    return Status::OK();
  }

  void Drain() override { net_->Drain(); }

  void SetPushSink(PushSink* sink) override { net_->SetSink(id_, sink); }

 private:
  SimNetwork* net_;
  ClientId id_;
};

class SimNetwork::Notifier : public ClientNotifier {
 public:
  Notifier(SimNetwork* net, std::string address) : net_(net), address_(std::move(address)) {}

  bool Push(ClientId to, const RpcMessage& msg) override {
    return net_->Enqueue(address_, ClientAddress(to), msg);
  }

 private:
  SimNetwork* net_;
  std::string address_;
};

SimNetwork::SimNetwork(SimOptions options) : options_(options) {
  if (options_.auto_deliver) delivery_ = std::thread([this] { DeliveryLoop(); });
}

SimNetwork::~SimNetwork() {
  {
    std::lock_guard<std::mutex> l(mu_);
    stop_ = true;
  }
  work_cv_.notify_all();
  if (delivery_.joinable()) delivery_.join();
}

std::string SimNetwork::ClientAddress(ClientId id) { return "client:" + std::to_string(id); }

void SimNetwork::AttachServer(const std::string& address, ServerEndpoint* server) {
  std::lock_guard<std::mutex> l(mu_);
  servers_[address] = server;
}

void SimNetwork::DetachServer(const std::string& address) {
  std::lock_guard<std::mutex> l(mu_);
  servers_.erase(address);
}

ClientNotifier* SimNetwork::NotifierFor(const std::string& address) {
  std::lock_guard<std::mutex> l(mu_);
  auto& n = notifiers_[address];
  if (!n) n = std::make_unique<Notifier>(this, address);
  return n.get();
}

std::unique_ptr<Transport> SimNetwork::Connect(ClientId id) {
  return std::make_unique<SimTransport>(this, id);
}

void SimNetwork::RegisterClient(ClientId id, SimTransport*) {
  std::lock_guard<std::mutex> l(mu_);
  clients_[id] = nullptr;
}

void SimNetwork::UnregisterClient(ClientId id) {
  std::lock_guard<std::mutex> l(mu_);
  clients_.erase(id);
}

void SimNetwork::SetSink(ClientId id, PushSink* sink) {
  std::lock_guard<std::mutex> l(mu_);
  auto it = clients_.find(id);
  if (it != clients_.end()) it->second = sink;
}

void SimNetwork::SetCallWaiter(CallWaiter* waiter) {
  std::lock_guard<std::mutex> l(mu_);
  waiter_ = waiter;
}

void SimNetwork::SetReplyObserver(ReplyObserver observer) {
  std::lock_guard<std::mutex> l(mu_);
  observer_ = std::move(observer);
}

Result<RpcMessage> SimNetwork::Call(ClientId from, const std::string& address,
                                    const RpcMessage& request, CounterSet* client_counters) {
  uint8_t tag = TagOf(request);
  if (!IsCallRequest(tag)) {
    return Status::InvalidArgument(std::string(MessageName(tag)) + " has no reply");
  }
  ServerEndpoint* server;
  CallWaiter* waiter;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto it = servers_.find(address);
    if (it == servers_.end()) return Status::Unreachable(address);
    server = it->second;
    waiter = waiter_;
  }

  // Everything crosses the codec, as it would on a socket.
  Bytes req_frame = EncodeMessage(request);
  auto decoded = DecodeMessage(req_frame);
  if (!decoded.ok()) return decoded.status();

  auto call = std::make_shared<PendingCall>();
  server->HandleCall(from, *decoded,
                     [call](RpcMessage reply) { call->Fulfill(EncodeMessage(reply)); });
  if (waiter != nullptr) {
    waiter->Wait(*call);
  } else {
    call->Wait();
  }
  Bytes reply_frame = call->TakeReply();
  auto reply = DecodeMessage(reply_frame);
  if (!reply.ok()) return reply.status();

  int64_t cost = options_.latency.CallCostPs(req_frame.size(), reply_frame.size());
  client_counters->RecordCall(tag, req_frame.size(), reply_frame.size(), cost);
  totals_.RecordCall(tag, req_frame.size(), reply_frame.size(), cost);
  ChargeCurrentFlowCall(tag, req_frame.size(), reply_frame.size(), cost);

  ReplyObserver observer;
  {
    std::lock_guard<std::mutex> l(mu_);
    observer = observer_;
  }
  if (observer) observer(from, *decoded, *reply);
  return reply;
}

bool SimNetwork::Enqueue(const std::string& src, const std::string& dst, const RpcMessage& msg) {
  Bytes frame = EncodeMessage(msg);
  uint64_t size = frame.size();
  {
    std::lock_guard<std::mutex> l(mu_);
    if (dst.starts_with("client:")) {
      ClientId id = static_cast<ClientId>(std::stoul(dst.substr(7)));
      auto it = clients_.find(id);
      if (it == clients_.end() || it->second == nullptr) return false;
    } else if (servers_.count(dst) == 0) {
      return false;
    }
    PairKey key{src, dst};
    queues_[key].push_back(Envelope{next_seq_++, src, dst, std::move(frame)});
    order_.push_back(key);
  }
  totals_.RecordAsync(TagOf(msg), size);
  work_cv_.notify_one();
  return true;
}

void SimNetwork::Deliver(Envelope env) {
  auto msg = DecodeMessage(env.frame);
  if (!msg.ok()) {
    LogToStderr(msg.status());
    return;
  }
  if (env.dst.starts_with("client:")) {
    ClientId id = static_cast<ClientId>(std::stoul(env.dst.substr(7)));
    PushSink* sink = nullptr;
    {
      std::lock_guard<std::mutex> l(mu_);
      auto it = clients_.find(id);
      if (it != clients_.end()) sink = it->second;
    }
    if (sink != nullptr) sink->HandlePush(env.src, std::move(*msg));
    return;
  }
  ServerEndpoint* server = nullptr;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto it = servers_.find(env.dst);
    if (it != servers_.end()) server = it->second;
  }
  if (server == nullptr) {
    LogToStderr(Status::Unreachable(env.dst));
    return;
  }
  ClientId from = 0;
  if (env.src.starts_with("client:")) from = static_cast<ClientId>(std::stoul(env.src.substr(7)));
  server->HandleOneWay(from, std::move(*msg));
}

void SimNetwork::DeliveryLoop() {
  std::unique_lock<std::mutex> l(mu_);
  for (;;) {
    work_cv_.wait(l, [this] { return stop_ || !order_.empty(); });
    if (stop_) return;
    PairKey key = order_.front();
    order_.pop_front();
    auto& q = queues_[key];
    Envelope env = std::move(q.front());
    q.pop_front();
    in_flight_++;
    l.unlock();
    Deliver(std::move(env));
    l.lock();
    in_flight_--;
    if (order_.empty() && in_flight_ == 0) idle_cv_.notify_all();
  }
}

void SimNetwork::Drain() {
  if (options_.auto_deliver) {
    std::unique_lock<std::mutex> l(mu_);
    idle_cv_.wait(l, [this] { return order_.empty() && in_flight_ == 0; });
    return;
  }
  for (;;) {
    PairKey key;
    {
      std::lock_guard<std::mutex> l(mu_);
      if (order_.empty()) return;
      key = order_.front();
    }
    DeliverNext(key.first, key.second);
  }
}

std::vector<SimNetwork::Pending> SimNetwork::PendingMessages() const {
  std::lock_guard<std::mutex> l(mu_);
  std::vector<Pending> out;
  for (const auto& [key, q] : queues_) {
    for (const auto& e : q) out.push_back({e.seq, e.src, e.dst, e.frame[4]});
  }
  std::sort(out.begin(), out.end(), [](const Pending& a, const Pending& b) { return a.seq < b.seq; });
  return out;
}

size_t SimNetwork::PendingCount(const std::string& src, const std::string& dst) const {
  std::lock_guard<std::mutex> l(mu_);
  auto it = queues_.find({src, dst});
  return it == queues_.end() ? 0 : it->second.size();
}

Status SimNetwork::DeliverNext(const std::string& src, const std::string& dst) {
  Envelope env;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto it = queues_.find({src, dst});
    if (it == queues_.end() || it->second.empty()) {
      return Status::InvalidArgument("nothing queued from " + src + " to " + dst);
    }
    env = std::move(it->second.front());
    it->second.pop_front();
    auto pos = std::find(order_.begin(), order_.end(), PairKey{src, dst});
    if (pos != order_.end()) order_.erase(pos);
    in_flight_++;
  }
  Deliver(std::move(env));
  {
    std::lock_guard<std::mutex> l(mu_);
    in_flight_--;
    if (order_.empty() && in_flight_ == 0) idle_cv_.notify_all();
  }
  return Status::OK();
}

}  // namespace buffetfs
