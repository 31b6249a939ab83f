#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "buffetfs/agent.h"
#include "buffetfs/linearizability.h"
#include "buffetfs/server.h"
#include "buffetfs/sim_network.h"

namespace buffetfs {

// One script line:
//   <actor> open <path> r|w|rw [as <handle>] [expect <result>]
//   <actor> read <handle> <n>            <actor> write <handle> <text>
//   <actor> close <handle>               <actor> chmod <path> <octal>
//   <actor> deliver-invalidation         <actor> deliver-async
//   server chmod <path> <octal>          server dump
//   flush
// Actors are A, B, C (clients) and server. <result> is OK, PENDING or an
// error code name such as ACCESS_DENIED. '#' starts a comment.
enum class StepKind : uint8_t {
  kOpen, kRead, kWrite, kClose, kChmod, kDeliverInvalidation, kDeliverAsync, kDump, kFlush
};

struct Step {
  std::string actor;
  StepKind kind = StepKind::kFlush;
  std::string path;
  std::string handle;
  OpenFlags flags;
  uint32_t length = 0;
  std::string data;
  uint16_t mode = 0;
  std::optional<std::string> expect;
  int line = 0;

  std::string ToString() const;
};

Result<std::vector<Step>> ParseScript(std::string_view text);

struct TraceEntry {
  size_t step = 0;
  std::string text;
  bool completed = false;
  Status result;
  std::string detail;  // bytes read, for instance
};

struct Trace {
  std::vector<TraceEntry> entries;
  std::vector<HistoryOp> history;
  std::vector<AdminDumpReply> dumps;
  // Failed expectations and superseded permissions seen in GetDir replies.
  std::vector<std::string> violations;

  std::string ToString() const;
};

// Deterministic multi-client world over a manually delivered simulated
// network. Actors run on their own threads but only one runs at a time; a
// call whose reply the server defers parks its actor until the reply exists
// and the executor resumes it.
//
// Namespace, all owned by uid 1 gid 1:
//   /       0755    /d    0755    /d/f0 /d/f1 /d/f2  0640
//   /e      0711    /e/g0 0644
// Clients: A uid 1 gid 1, B uid 2 gid 1, C uid 3 gid 3.
class Harness : public CallWaiter {
 public:
  static Result<std::unique_ptr<Harness>> Create(int clients = 3);
  ~Harness() override;

  Harness(const Harness&) = delete;
  Harness& operator=(const Harness&) = delete;

  // Runs one step, then lets every resumable actor finish.
  Status Execute(const Step& step);
  // Delivers every queued message until nothing moves.
  void Flush();
  // Executes the script, flushes, and returns the trace.
  Result<Trace> Run(const std::vector<Step>& steps);

  const Trace& trace() const { return trace_; }
  PermModel InitialModel() const { return initial_; }
  AdminDumpReply Dump() const { return server_->AdminDump(); }
  std::optional<PermissionRecord> PermissionAt(const std::string& path) const;

  std::vector<std::string> Clients() const;
  bool Busy(const std::string& actor) const;
  size_t PendingPushes(const std::string& actor) const;
  size_t PendingAsync(const std::string& actor) const;
  std::vector<std::string> Handles(const std::string& actor) const;
  Agent* agent(const std::string& actor) const;
  static const std::vector<std::string>& Paths();

  void Wait(PendingCall& call) override;

 private:
  struct HandleInfo {
    int fd = -1;
    std::string path;
    OpenFlags flags;
  };

  struct Actor {
    std::string name;
    ClientId id = 0;
    Credentials cred;
    std::unique_ptr<Transport> transport;
    std::unique_ptr<Agent> agent;
    std::map<std::string, HandleInfo> handles;
    int handle_seq = 0;

    enum class State { kIdle, kRunning, kBlocked } state = State::kIdle;
    bool ready = false;
    std::function<void()> task;
    std::thread thread;
  };

  class ReplyCheck;

  Harness();
  Status Setup(int clients);
  Actor* Find(const std::string& name) const;
  void ActorLoop(Actor* a);
  void Dispatch(Actor* a, std::function<void()> fn);
  void Quiesce();
  uint64_t Tick();
  void RunOp(Actor* a, const Step& step, size_t entry);
  void Finish(size_t entry, const Status& s, std::string detail);
  Status ExecuteLocal(const Step& step, size_t entry);
  size_t AddEntry(const Step& step);

  SimNetwork net_;
  std::unique_ptr<Server> server_;
  std::unique_ptr<ReplyCheck> check_;
  ClusterConfig config_;
  std::map<std::string, BuffetInode> inodes_;
  PermModel initial_;
  std::vector<std::unique_ptr<Actor>> actors_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
  uint64_t clock_ = 0;
  int next_op_id_ = 0;
  Trace trace_;
};

struct RandomOptions {
  int steps = 20;
  int clients = 3;
};

struct RandomResult {
  Status status;  // harness or script failure
  Verdict verdict;
  Trace trace;
  std::vector<Step> steps;
};

// Random enabled steps from `seed`, a final flush, then the checks.
RandomResult RunRandomSchedule(uint64_t seed, const RandomOptions& options);

}  // namespace buffetfs
