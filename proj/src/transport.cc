#include "buffetfs/transport.h"

#include <cmath>
#include <cstdio>

namespace buffetfs {

namespace {
thread_local Flow* current_flow = nullptr;

int64_t UsToPs(double us) { return std::llround(us * 1e6); }
}  // namespace

int64_t LatencyModel::CallCostPs(uint64_t request_bytes, uint64_t reply_bytes) const {
  return UsToPs(rtt_us) + UsToPs(per_byte_us) * static_cast<int64_t>(request_bytes + reply_bytes) +
         UsToPs(service_us);
}

void RpcCounters::Add(const RpcCounters& o) {
  sync_rpcs += o.sync_rpcs;
  async_msgs += o.async_msgs;
  bytes_sent += o.bytes_sent;
  bytes_received += o.bytes_received;
  elapsed_ps += o.elapsed_ps;
  for (const auto& [tag, n] : o.per_type) per_type[tag] += n;
}

static void RecordCallInto(RpcCounters& c, uint8_t tag, uint64_t req_bytes, uint64_t reply_bytes,
                           int64_t cost_ps) {
  c.sync_rpcs++;
  c.bytes_sent += req_bytes;
  c.bytes_received += reply_bytes;
  c.elapsed_ps += cost_ps;
  c.per_type[tag]++;
}

static void RecordAsyncInto(RpcCounters& c, uint8_t tag, uint64_t bytes) {
  c.async_msgs++;
  c.bytes_sent += bytes;
  c.per_type[tag]++;
}

void CounterSet::RecordCall(uint8_t tag, uint64_t req_bytes, uint64_t reply_bytes,
                            int64_t cost_ps) {
  std::lock_guard<std::mutex> l(mu_);
  RecordCallInto(c_, tag, req_bytes, reply_bytes, cost_ps);
}

void CounterSet::RecordAsync(uint8_t tag, uint64_t bytes) {
  std::lock_guard<std::mutex> l(mu_);
  RecordAsyncInto(c_, tag, bytes);
}

RpcCounters CounterSet::Snapshot() const {
  std::lock_guard<std::mutex> l(mu_);
  return c_;
}

void CounterSet::Reset() {
  std::lock_guard<std::mutex> l(mu_);
  c_ = RpcCounters();
}

ScopedFlow::ScopedFlow(Flow* flow) : prev_(current_flow) { current_flow = flow; }
ScopedFlow::~ScopedFlow() { current_flow = prev_; }

Flow* CurrentFlow() { return current_flow; }

void ChargeCurrentFlowCall(uint8_t tag, uint64_t req_bytes, uint64_t reply_bytes,
                           int64_t cost_ps) {
  if (current_flow != nullptr) {
    RecordCallInto(current_flow->counters, tag, req_bytes, reply_bytes, cost_ps);
  }
}

void ChargeCurrentFlowAsync(uint8_t tag, uint64_t bytes) {
  if (current_flow != nullptr) RecordAsyncInto(current_flow->counters, tag, bytes);
}

void PendingCall::Fulfill(Bytes reply) {
  std::function<void()> fn;
  {
    std::lock_guard<std::mutex> l(mu_);
    reply_ = std::move(reply);
    done_ = true;
    fn = std::move(on_done_);
  }
  cv_.notify_all();
  if (fn) fn();
}

bool PendingCall::done() const {
  std::lock_guard<std::mutex> l(mu_);
  return done_;
}

bool PendingCall::OnDone(std::function<void()> fn) {
  std::lock_guard<std::mutex> l(mu_);
  if (done_) return false;
  on_done_ = std::move(fn);
  return true;
}

void PendingCall::Wait() {
  std::unique_lock<std::mutex> l(mu_);
  cv_.wait(l, [this] { return done_; });
}

Bytes PendingCall::TakeReply() {
  std::lock_guard<std::mutex> l(mu_);
  return std::move(reply_);
}

void LogToStderr(const Status& s) {
  std::fprintf(stderr, "buffetfs: async delivery failed: %s\n", s.ToString().c_str());
}

}  // namespace buffetfs
