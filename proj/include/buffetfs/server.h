#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "buffetfs/messages.h"
#include "buffetfs/store.h"
#include "buffetfs/transport.h"

namespace buffetfs {

// Client id used for changes issued on the server itself (never cached).
constexpr ClientId kServerAdminClient = 0xFFFFFFFF;

struct ServerOptions {
  uint32_t host_id = 1;
  uint32_t version = 1;
  // How long a permission change or create waits for invalidation acks.
  std::chrono::milliseconds ack_deadline{5000};
  // Off for deterministic drivers that call ExpireOverdueRounds() themselves.
  bool deadline_timer = true;
  // Empty: memory only. Otherwise write-through to this host directory.
  std::string persist_root;
  PermissionRecord root_perm{0, 0, static_cast<uint16_t>(kTypeDirectory | 0755)};
};

// The BServer. Holds directories and file data, the opened-file list and,
// per directory, the set of clients caching its listing. Namespace changes
// run as invalidation rounds: push invalidations to every caching client,
// wait for all acks, then apply.
class Server : public ServerEndpoint {
 public:
  // Memory-only server.
  Server(ServerOptions options, ClientNotifier* notifier);
  // Honors options.persist_root: loads previous state (bumping the version)
  // or initializes an empty store.
  static Result<std::unique_ptr<Server>> Create(ServerOptions options, ClientNotifier* notifier);
  ~Server() override;

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void SetNotifier(ClientNotifier* notifier);

  void HandleCall(ClientId from, RpcMessage request, Responder done) override;
  void HandleOneWay(ClientId from, RpcMessage msg) override;

  AdminDumpReply AdminDump() const;
  // Aborts the active round if its ack deadline passed. Returns rounds aborted.
  int ExpireOverdueRounds(std::chrono::steady_clock::time_point now);

  uint32_t host_id() const { return options_.host_id; }
  uint32_t version() const { return options_.version; }
  BuffetInode RootInode() const { return InodeOf(kRootFileId); }
  std::optional<PermissionRecord> PermissionOf(uint64_t file_id) const;

 private:
  struct FileData {
    std::shared_mutex mu;
    Bytes content;
    int64_t mtime_ns = 0;
    std::atomic<int64_t> atime_ns{0};
  };

  struct Node {
    uint64_t id = 0;
    uint64_t parent = 0;
    std::string name;
    bool is_dir = false;
    PermissionRecord perm;
    int64_t ctime_ns = 0;
    int64_t dir_atime_ns = 0;
    int64_t dir_mtime_ns = 0;
    std::map<std::string, uint64_t> children;
    std::shared_ptr<FileData> data;
  };

  // A namespace change waiting for its invalidation round.
  struct Mutation {
    std::vector<BuffetInode> targets;
    // Directories whose listings carry the changed record. Their registered
    // clients are invalidated and their GetDirs are held meanwhile.
    std::set<uint64_t> hold;
    std::function<RpcMessage()> apply;  // runs under mu_
    Responder done;
  };

  struct Round {
    uint64_t epoch = 0;
    Mutation mutation;
    std::set<ClientId> awaiting;
    std::map<uint64_t, std::set<ClientId>> dropped;  // registry entries removed at push
    std::chrono::steady_clock::time_point deadline;
  };

  struct HeldGetDir {
    GetDirRequest request;
    Responder done;
  };

  using Actions = std::vector<std::function<void()>>;

  Server(ServerOptions options, ClientNotifier* notifier, std::unique_ptr<DirectoryStore> store);
  void InitEmpty();
  void LoadFrom(const StoredServer& stored);
  void StartTimer();

  static int64_t NowNs();
  static void Run(Actions& actions);

  BuffetInode InodeOf(uint64_t id) const { return {options_.host_id, id, options_.version}; }
  Result<Node*> Lookup(const BuffetInode& inode);
  FileMetadata DirMeta(const Node& n) const;
  FileMetadata FileMeta(const Node& n, const FileData& d) const;  // d locked by caller
  GetDirReply BuildListing(Node& dir);
  std::vector<DirEntryRecord> EntriesOf(const Node& dir) const;

  void HandleGetDir(const GetDirRequest& req, Responder done);
  RpcMessage HandleRead(ClientId from, const ReadRequest& req);
  RpcMessage HandleWrite(ClientId from, const WriteRequest& req);
  void HandleClose(const CloseNotify& msg);
  void HandleSetPermission(const SetPermissionRequest& req, Responder done);
  void HandleCreate(const CreateRequest& req, Responder done);
  void HandleBaselineOpen(ClientId from, const BaselineOpenRequest& req, Responder done);
  void HandleAck(const InvalidateAck& ack);

  // Resolves the data-RPC open state; on success *flags holds the governing
  // open flags and *truncate whether a deferred O_TRUNC must run now.
  Status AdmitDataAccess(ClientId from, const Node& node, uint64_t open_token,
                         const std::optional<DeferredOpen>& deferred, OpenFlags* flags,
                         bool* truncate);
  Result<DirEntryRecord> CreateLocked(uint64_t parent_id, const std::string& name,
                                      PermissionRecord perm, bool is_dir);
  RpcMessage FinishBaselineOpen(ClientId from, const BaselineOpenRequest& req, Node& target);

  // Round machinery; all REQUIRE mu_ held.
  void Submit(Mutation m, Actions& acts);
  void StartNext(Actions& acts);
  void CompleteRound(Actions& acts);
  void ReleaseHeld(Actions& acts);
  bool IsHeld(uint64_t dir) const;
  void OnPushFailed(uint64_t epoch, ClientId client);
  int ExpireLocked(std::chrono::steady_clock::time_point now, Actions& acts);

  void Persist(const Status& s) const;

  const ServerOptions options_;
  std::unique_ptr<DirectoryStore> store_;

  mutable std::mutex mu_;
  std::condition_variable timer_cv_;
  ClientNotifier* notifier_;
  std::unordered_map<uint64_t, Node> nodes_;
  std::map<std::pair<ClientId, uint64_t>, OpenRecord> opened_;
  std::map<uint64_t, std::set<ClientId>> registry_;
  uint64_t next_file_id_ = 1;
  uint64_t epoch_ = 0;
  std::deque<Mutation> pending_;
  std::optional<Round> active_;
  std::vector<HeldGetDir> held_;
  bool stop_ = false;
  std::thread timer_;
};

}  // namespace buffetfs
