#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "buffetfs/messages.h"
#include "buffetfs/transport.h"

namespace buffetfs {

using Pid = uint32_t;

// POSIX-flavored file access, implemented by the BuffetFS facade and by the
// baseline clients so workloads can run against either.
class FileClient {
 public:
  virtual ~FileClient() = default;
  virtual Result<int> Open(const std::string& path, OpenFlags flags, uint16_t create_mode = 0644) = 0;
  virtual Result<Bytes> Read(int fd, uint32_t length) = 0;
  virtual Result<uint32_t> Write(int fd, std::span<const uint8_t> data) = 0;
  virtual Status Close(int fd) = 0;
  virtual Status Seek(int fd, uint64_t offset) = 0;
};

enum class HandleState : uint8_t { kIncomplete, kServerOpened, kClosed };

struct OpenHandle {
  BuffetInode inode;
  OpenFlags flags;
  Credentials cred;
  uint64_t offset = 0;
  uint64_t open_token = 0;
  HandleState state = HandleState::kIncomplete;
  std::mutex mu;  // serializes data RPCs on this handle
};

// Read-only copy of one cached tree node.
struct CacheNodeView {
  DirEntryRecord entry;
  bool valid = false;
  bool listed = false;  // directory listing present
  size_t child_count = 0;
};

struct AgentOptions {
  // Fetched again when an inode turns out stale. Unset: stale is final.
  std::function<Result<ClusterConfig>()> reload_config;
  // Walk restarts tolerated while invalidations keep racing one lookup.
  int max_restarts = 64;
};

// The per-client BAgent: cached partial directory tree with permissions,
// process contexts with fd tables, deferred open, async close, and
// invalidation handling.
class Agent : public PushSink {
 public:
  Agent(Transport* transport, ClusterConfig config, AgentOptions options = {});
  ~Agent() override;

  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  Result<int> Open(Pid pid, const Credentials& cred, const std::string& path, OpenFlags flags,
                   uint16_t create_mode = 0644);
  Result<Bytes> Read(Pid pid, int fd, uint32_t length);
  Result<uint32_t> Write(Pid pid, int fd, std::span<const uint8_t> data);
  Status Close(Pid pid, int fd);
  Status Seek(Pid pid, int fd, uint64_t offset);

  Status Chmod(const Credentials& cred, const std::string& path, uint16_t mode);
  Status Mkdir(const Credentials& cred, const std::string& path, uint16_t mode);
  Result<std::vector<DirEntryRecord>> Readdir(const Credentials& cred, const std::string& path);

  // Fetches listings like Open does but performs no permission checks.
  Result<CacheNodeView> Resolve(const std::string& path);
  // Cached view without any RPC; NOT_FOUND when the path is not cached.
  Result<CacheNodeView> Peek(const std::string& path) const;

  std::optional<HandleState> StateOf(Pid pid, int fd) const;
  // Drops every cached listing (the root stays, marked invalid).
  void DropCache();

  void HandlePush(const std::string& from_address, RpcMessage msg) override;

  Transport* transport() const { return transport_; }
  ClientId client_id() const { return transport_->client_id(); }
  RpcCounters SnapshotCounters() const { return transport_->SnapshotCounters(); }
  void ResetCounters() { transport_->ResetCounters(); }
  uint64_t invalidations_handled() const { return invalidations_.load(); }

 private:
  struct Node {
    DirEntryRecord entry;
    bool valid = false;
    std::optional<std::map<std::string, std::unique_ptr<Node>>> children;
    Node* parent = nullptr;
    uint64_t gen = 0;  // changes on creation and on every invalidation
  };

  struct ProcessContext {
    std::map<int, std::shared_ptr<OpenHandle>> fds;
    int next_fd = 3;
  };

  // Outcome of one walk attempt under the tree lock.
  struct WalkStep {
    Status status;
    bool need_fetch = false;
    BuffetInode fetch_dir;
    uint64_t fetch_gen = 0;
    DirEntryRecord target;         // valid when status ok and !missing
    DirEntryRecord parent;         // last directory walked
    bool missing = false;          // final component absent from fresh listing
  };

  Result<WalkStep> Walk(const std::vector<std::string>& parts, const Credentials* cred);
  WalkStep WalkLocked(const std::vector<std::string>& parts, const Credentials* cred) const;
  Status Fetch(const BuffetInode& dir, uint64_t gen);
  void ApplyListing(Node* dir, GetDirReply reply);
  void Unindex(Node* n);
  Node* Find(const BuffetInode& inode) const;
  const Node* FindPath(const std::vector<std::string>& parts) const;
  static CacheNodeView ViewOf(const Node& n);

  Result<RpcMessage> CallServer(const BuffetInode& inode, const RpcMessage& request);
  Status ReloadConfig();
  Result<std::string> AddressOf(const BuffetInode& inode) const;

  Result<std::shared_ptr<OpenHandle>> HandleOf(Pid pid, int fd) const;
  Result<DirEntryRecord> CreateEntry(const Credentials& cred, const DirEntryRecord& parent,
                                     const std::string& name, uint16_t mode, bool is_dir);

  Transport* const transport_;
  const AgentOptions options_;

  mutable std::mutex config_mu_;
  ClusterConfig config_;

  mutable std::shared_mutex tree_mu_;
  std::condition_variable_any fetch_cv_;
  std::unique_ptr<Node> root_;
  std::unordered_map<BuffetInode, Node*> index_;
  std::set<BuffetInode> fetching_;
  uint64_t next_gen_ = 1;

  mutable std::mutex fd_mu_;
  std::map<Pid, ProcessContext> processes_;

  std::atomic<uint64_t> next_token_{1};
  std::atomic<uint64_t> invalidations_{0};
};

// The BLib-style facade: one process context of an Agent with fixed
// credentials.
class AgentLib : public FileClient {
 public:
  AgentLib(Agent* agent, Pid pid, Credentials cred) : agent_(agent), pid_(pid), cred_(cred) {}

  Result<int> Open(const std::string& path, OpenFlags flags, uint16_t create_mode = 0644) override {
    return agent_->Open(pid_, cred_, path, flags, create_mode);
  }
  Result<Bytes> Read(int fd, uint32_t length) override { return agent_->Read(pid_, fd, length); }
  Result<uint32_t> Write(int fd, std::span<const uint8_t> data) override {
    return agent_->Write(pid_, fd, data);
  }
  Status Close(int fd) override { return agent_->Close(pid_, fd); }
  Status Seek(int fd, uint64_t offset) override { return agent_->Seek(pid_, fd, offset); }

  Status Chmod(const std::string& path, uint16_t mode) { return agent_->Chmod(cred_, path, mode); }
  Status Mkdir(const std::string& path, uint16_t mode) { return agent_->Mkdir(cred_, path, mode); }

 private:
  Agent* agent_;
  Pid pid_;
  Credentials cred_;
};

}  // namespace buffetfs
