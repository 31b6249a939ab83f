#include "buffetfs/server.h"

#include <algorithm>
#include <cstring>

namespace buffetfs {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Server::Server(ServerOptions options, ClientNotifier* notifier)
    : Server(std::move(options), notifier, nullptr) {
  InitEmpty();
  StartTimer();
}

Server::Server(ServerOptions options, ClientNotifier* notifier,
               std::unique_ptr<DirectoryStore> store)
    : options_(std::move(options)), store_(std::move(store)), notifier_(notifier) {}

Result<std::unique_ptr<Server>> Server::Create(ServerOptions options, ClientNotifier* notifier) {
  if (options.persist_root.empty()) return std::make_unique<Server>(options, notifier);

  auto store = DirectoryStore::Open(options.persist_root);
  if (!store.ok()) return store.status();
  bool found = false;
  auto stored = (*store)->Load(&found);
  if (!stored.ok()) return stored.status();
  if (found) {
    if (stored->host_id != options.host_id) {
      return Status::InvalidArgument("store belongs to host " + std::to_string(stored->host_id));
    }
    // A restart is a new incarnation; inodes handed out before are stale.
    options.version = std::max(options.version, stored->version + 1);
  }
  std::unique_ptr<Server> server(new Server(options, notifier, std::move(*store)));
  if (found) {
    server->LoadFrom(*stored);
  } else {
    server->InitEmpty();
  }
  server->StartTimer();
  return server;
}

Server::~Server() {
  {
    std::lock_guard<std::mutex> l(mu_);
    stop_ = true;
  }
  timer_cv_.notify_all();
  if (timer_.joinable()) timer_.join();
}

void Server::SetNotifier(ClientNotifier* notifier) {
  std::lock_guard<std::mutex> l(mu_);
  notifier_ = notifier;
}

int64_t Server::NowNs() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void Server::Run(Actions& actions) {
  for (auto& a : actions) a();
  actions.clear();
}

void Server::Persist(const Status& s) const {
  if (!s.ok()) LogToStderr(s);
}

void Server::InitEmpty() {
  Node root;
  root.id = kRootFileId;
  root.parent = kRootFileId;
  root.is_dir = true;
  root.perm = options_.root_perm;
  root.perm.mode = kTypeDirectory | (root.perm.mode & kPermMask);
  root.ctime_ns = root.dir_atime_ns = root.dir_mtime_ns = NowNs();
  nodes_.emplace(kRootFileId, std::move(root));
  if (store_) {
    Persist(store_->SaveAttrs(kRootFileId, InodeOf(kRootFileId), nodes_[kRootFileId].perm));
    Persist(store_->SaveEntries(kRootFileId, {}));
    Persist(store_->SaveServer(options_.host_id, options_.version, next_file_id_));
  }
}

void Server::LoadFrom(const StoredServer& stored) {
  int64_t now = NowNs();
  next_file_id_ = stored.next_file_id;
  for (const auto& obj : stored.objects) {
    Node n;
    n.id = obj.inode.file_id;
    n.is_dir = obj.perm.is_dir();
    n.perm = obj.perm;
    n.ctime_ns = n.dir_atime_ns = n.dir_mtime_ns = now;
    if (n.is_dir) {
      for (const auto& e : obj.entries) n.children[e.name] = e.inode.file_id;
    } else {
      n.data = std::make_shared<FileData>();
      n.data->content = obj.content;
      n.data->mtime_ns = now;
      n.data->atime_ns = now;
    }
    next_file_id_ = std::max(next_file_id_, n.id + 1);
    nodes_.emplace(n.id, std::move(n));
  }
  if (nodes_.count(kRootFileId) == 0) InitEmpty();
  for (auto& [id, n] : nodes_) {
    if (!n.is_dir) continue;
    for (const auto& [name, child] : n.children) {
      auto it = nodes_.find(child);
      if (it == nodes_.end()) continue;
      it->second.parent = id;
      it->second.name = name;
    }
  }
  // Re-stamp inodes with the new incarnation.
  Persist(store_->SaveServer(options_.host_id, options_.version, next_file_id_));
  for (const auto& [id, n] : nodes_) {
    Persist(store_->SaveAttrs(id, InodeOf(id), n.perm));
    if (n.is_dir) Persist(store_->SaveEntries(id, EntriesOf(n)));
  }
}

void Server::StartTimer() {
  if (!options_.deadline_timer) return;
  timer_ = std::thread([this] {
    std::unique_lock<std::mutex> l(mu_);
    while (!stop_) {
      if (!active_) {
        timer_cv_.wait(l);
        continue;
      }
      auto deadline = active_->deadline;
      if (timer_cv_.wait_until(l, deadline) == std::cv_status::timeout) {
        Actions acts;
        ExpireLocked(std::chrono::steady_clock::now(), acts);
        l.unlock();
        Run(acts);
        l.lock();
      }
    }
  });
}

Result<Server::Node*> Server::Lookup(const BuffetInode& inode) {
  if (inode.host_id != options_.host_id || inode.version != options_.version) {
    return Status::StaleInode(inode.ToString() + " is not served by this incarnation");
  }
  auto it = nodes_.find(inode.file_id);
  if (it == nodes_.end()) return Status::NotFound(inode.ToString());
  return &it->second;
}

FileMetadata Server::DirMeta(const Node& n) const {
  FileMetadata m;
  m.inode = InodeOf(n.id);
  m.perm = n.perm;
  m.size = n.children.size();
  m.atime_ns = n.dir_atime_ns;
  m.mtime_ns = n.dir_mtime_ns;
  m.ctime_ns = n.ctime_ns;
  return m;
}

FileMetadata Server::FileMeta(const Node& n, const FileData& d) const {
  FileMetadata m;
  m.inode = InodeOf(n.id);
  m.perm = n.perm;
  m.size = d.content.size();
  m.atime_ns = d.atime_ns.load();
  m.mtime_ns = d.mtime_ns;
  m.ctime_ns = n.ctime_ns;
  return m;
}

std::vector<DirEntryRecord> Server::EntriesOf(const Node& dir) const {
  std::vector<DirEntryRecord> out;
  out.reserve(dir.children.size());
  for (const auto& [name, id] : dir.children) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) continue;
    out.push_back(DirEntryRecord{name, InodeOf(id), it->second.perm});
  }
  return out;
}

GetDirReply Server::BuildListing(Node& dir) {
  dir.dir_atime_ns = NowNs();
  return GetDirReply{EntriesOf(dir), DirMeta(dir)};
}

std::optional<PermissionRecord> Server::PermissionOf(uint64_t file_id) const {
  std::lock_guard<std::mutex> l(mu_);
  auto it = nodes_.find(file_id);
  if (it == nodes_.end()) return std::nullopt;
  return it->second.perm;
}

void Server::HandleCall(ClientId from, RpcMessage request, Responder done) {
  std::visit(Overloaded{
                 [&](GetDirRequest& r) { HandleGetDir(r, std::move(done)); },
                 [&](ReadRequest& r) { done(HandleRead(from, r)); },
                 [&](WriteRequest& r) { done(HandleWrite(from, r)); },
                 [&](SetPermissionRequest& r) { HandleSetPermission(r, std::move(done)); },
                 [&](CreateRequest& r) { HandleCreate(r, std::move(done)); },
                 [&](AdminDumpRequest&) { done(AdminDump()); },
                 [&](BaselineOpenRequest& r) { HandleBaselineOpen(from, r, std::move(done)); },
                 [&](BarrierRequest&) { done(BarrierReply{}); },
                 [&](auto& other) {
                   done(ErrorReply{Code::kIO, std::string(MessageName(TagOf(RpcMessage(other)))) +
                                                  " is not a request"});
                 },
             },
             request);
}

void Server::HandleOneWay(ClientId, RpcMessage msg) {
  if (auto* c = std::get_if<CloseNotify>(&msg)) {
    HandleClose(*c);
  } else if (auto* a = std::get_if<InvalidateAck>(&msg)) {
    HandleAck(*a);
  } else {
    LogToStderr(Status::InvalidArgument(std::string("unexpected one-way ") +
                                        MessageName(TagOf(msg))));
  }
}

void Server::HandleGetDir(const GetDirRequest& req, Responder done) {
  RpcMessage reply;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto node = Lookup(req.dir_inode);
    if (!node.ok()) {
      reply = MakeError(node.status());
    } else if (!(*node)->is_dir) {
      reply = MakeError(Status::NotADirectory(req.dir_inode.ToString()));
    } else if (IsHeld((*node)->id)) {
      held_.push_back(HeldGetDir{req, std::move(done)});
      return;
    } else {
      registry_[(*node)->id].insert(req.client_id);
      reply = BuildListing(**node);
    }
  }
  done(std::move(reply));
}

Status Server::AdmitDataAccess(ClientId from, const Node& node, uint64_t open_token,
                               const std::optional<DeferredOpen>& deferred, OpenFlags* flags,
                               bool* truncate) {
  *truncate = false;
  auto key = std::make_pair(from, open_token);
  auto it = opened_.find(key);
  if (it != opened_.end()) {
    *flags = it->second.flags;
    return Status::OK();
  }
  if (!deferred) return Status::BadHandle("token " + std::to_string(open_token) + " not open");
  if (deferred->open_token != open_token) return Status::BadHandle("token mismatch");
  if (!deferred->flags.WellFormed()) return Status::InvalidArgument("malformed open flags");
  // The client checked already; a permission change may have landed since.
  if (!CheckPermission(node.perm, deferred->cred, AccessMaskFor(deferred->flags))) {
    return Status::AccessDenied("open of " + InodeOf(node.id).ToString() + " revoked");
  }
  *flags = deferred->flags;
  *truncate = deferred->flags.truncate;
  opened_[key] = OpenRecord{open_token, from, node.id, deferred->flags, deferred->cred};
  return Status::OK();
}

RpcMessage Server::HandleRead(ClientId from, const ReadRequest& req) {
  std::shared_ptr<FileData> data;
  Node node_copy;
  bool truncate = false;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto node = Lookup(req.inode);
    if (!node.ok()) return MakeError(node.status());
    if ((*node)->is_dir) return MakeError(Status::IOError("is a directory"));
    OpenFlags flags;
    if (req.deferred_open && !req.deferred_open->flags.readable()) {
      return MakeError(Status::AccessDenied("opened write-only"));
    }
    Status s = AdmitDataAccess(from, **node, req.open_token, req.deferred_open, &flags, &truncate);
    if (!s.ok()) return MakeError(s);
    if (!flags.readable()) return MakeError(Status::AccessDenied("opened write-only"));
    data = (*node)->data;
    node_copy.id = (*node)->id;
    node_copy.perm = (*node)->perm;
    node_copy.ctime_ns = (*node)->ctime_ns;
  }
  if (truncate) {
    std::unique_lock<std::shared_mutex> w(data->mu);
    data->content.clear();
    data->mtime_ns = NowNs();
    if (store_) Persist(store_->Truncate(node_copy.id, 0));
  }
  std::shared_lock<std::shared_mutex> r(data->mu);
  ReadReply reply;
  uint64_t size = data->content.size();
  if (req.offset < size) {
    uint64_t n = std::min<uint64_t>(req.length, size - req.offset);
    reply.data.assign(data->content.begin() + req.offset, data->content.begin() + req.offset + n);
  }
  data->atime_ns = NowNs();
  reply.file_meta = FileMeta(node_copy, *data);
  return reply;
}

RpcMessage Server::HandleWrite(ClientId from, const WriteRequest& req) {
  std::shared_ptr<FileData> data;
  Node node_copy;
  bool truncate = false;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto node = Lookup(req.inode);
    if (!node.ok()) return MakeError(node.status());
    if ((*node)->is_dir) return MakeError(Status::IOError("is a directory"));
    if (req.deferred_open && !req.deferred_open->flags.writable()) {
      return MakeError(Status::AccessDenied("opened read-only"));
    }
    OpenFlags flags;
    Status s = AdmitDataAccess(from, **node, req.open_token, req.deferred_open, &flags, &truncate);
    if (!s.ok()) return MakeError(s);
    if (!flags.writable()) return MakeError(Status::AccessDenied("opened read-only"));
    data = (*node)->data;
    node_copy.id = (*node)->id;
    node_copy.perm = (*node)->perm;
    node_copy.ctime_ns = (*node)->ctime_ns;
  }
  if (req.offset + req.data.size() < req.offset) return MakeError(Status::IOError("offset overflow"));
  std::unique_lock<std::shared_mutex> w(data->mu);
  if (truncate) {
    data->content.clear();
    if (store_) Persist(store_->Truncate(node_copy.id, 0));
  }
  uint64_t end = req.offset + req.data.size();
  if (end > data->content.size()) data->content.resize(end, 0);
  std::copy(req.data.begin(), req.data.end(), data->content.begin() + req.offset);
  data->mtime_ns = NowNs();
  if (store_) Persist(store_->WriteContent(node_copy.id, req.offset, req.data));
  WriteReply reply;
  reply.bytes_written = static_cast<uint32_t>(req.data.size());
  reply.file_meta = FileMeta(node_copy, *data);
  return reply;
}

void Server::HandleClose(const CloseNotify& msg) {
  std::lock_guard<std::mutex> l(mu_);
  opened_.erase({msg.client_id, msg.open_token});
}

void Server::HandleSetPermission(const SetPermissionRequest& req, Responder done) {
  Actions acts;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto node = Lookup(req.inode);
    if (!node.ok()) {
      acts.push_back([done, e = MakeError(node.status())] { done(e); });
    } else if (req.cred.uid != (*node)->perm.uid) {
      acts.push_back([done] { done(MakeError(Status::AccessDenied("only the owner may chmod"))); });
    } else {
      Node& n = **node;
      PermissionRecord next{req.new_perm.uid, req.new_perm.gid,
                            static_cast<uint16_t>((n.perm.mode & kTypeMask) |
                                                  (req.new_perm.mode & kPermMask))};
      Mutation m;
      m.targets.push_back(InodeOf(n.id));
      if (n.parent != n.id) m.targets.push_back(InodeOf(n.parent));
      m.hold.insert(n.parent);
      if (n.is_dir) m.hold.insert(n.id);
      m.apply = [this, id = n.id, next]() -> RpcMessage {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) return MakeError(Status::NotFound("target vanished"));
        it->second.perm = next;
        it->second.ctime_ns = NowNs();
        if (store_) Persist(store_->SaveAttrs(id, InodeOf(id), next));
        return SetPermissionReply{true};
      };
      m.done = std::move(done);
      Submit(std::move(m), acts);
    }
  }
  Run(acts);
}

Result<DirEntryRecord> Server::CreateLocked(uint64_t parent_id, const std::string& name,
                                            PermissionRecord perm, bool is_dir) {
  auto pit = nodes_.find(parent_id);
  if (pit == nodes_.end()) return Status::NotFound("parent vanished");
  Node& parent = pit->second;
  if (parent.children.count(name)) return Status::Exists(name);
  Node n;
  n.id = next_file_id_++;
  n.parent = parent_id;
  n.name = name;
  n.is_dir = is_dir;
  n.perm = perm;
  n.perm.mode = static_cast<uint16_t>((is_dir ? kTypeDirectory : kTypeRegular) |
                                      (perm.mode & kPermMask));
  int64_t now = NowNs();
  n.ctime_ns = n.dir_atime_ns = n.dir_mtime_ns = now;
  if (!is_dir) {
    n.data = std::make_shared<FileData>();
    n.data->mtime_ns = now;
    n.data->atime_ns = now;
  }
  DirEntryRecord entry{name, InodeOf(n.id), n.perm};
  parent.children[name] = n.id;
  parent.dir_mtime_ns = now;
  uint64_t id = n.id;
  nodes_.emplace(id, std::move(n));
  if (store_) {
    Persist(store_->SaveAttrs(id, entry.inode, entry.perm));
    if (is_dir) Persist(store_->SaveEntries(id, {}));
    Persist(store_->SaveEntries(parent_id, EntriesOf(nodes_[parent_id])));
    Persist(store_->SaveServer(options_.host_id, options_.version, next_file_id_));
  }
  return entry;
}

void Server::HandleCreate(const CreateRequest& req, Responder done) {
  Actions acts;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto node = Lookup(req.parent);
    Status s;
    if (!node.ok()) {
      s = node.status();
    } else if (!(*node)->is_dir) {
      s = Status::NotADirectory(req.parent.ToString());
    } else if (!ValidEntryName(req.name)) {
      s = Status::IOError("invalid name");
    } else if ((*node)->children.count(req.name)) {
      s = Status::Exists(req.name);
    }
    if (!s.ok()) {
      acts.push_back([done, e = MakeError(s)] { done(e); });
    } else {
      uint64_t parent = (*node)->id;
      Mutation m;
      m.targets.push_back(InodeOf(parent));
      m.hold.insert(parent);
      m.apply = [this, parent, req]() -> RpcMessage {
        auto entry = CreateLocked(parent, req.name, req.perm, req.is_dir);
        if (!entry.ok()) return MakeError(entry.status());
        return CreateReply{*entry};
      };
      m.done = std::move(done);
      Submit(std::move(m), acts);
    }
  }
  Run(acts);
}

RpcMessage Server::FinishBaselineOpen(ClientId from, const BaselineOpenRequest& req,
                                      Node& target) {
  BaselineOpenReply reply;
  reply.entry = DirEntryRecord{target.name, InodeOf(target.id), target.perm};
  if (target.is_dir) {
    if (req.flags.writable()) return MakeError(Status::IOError("is a directory"));
    opened_[{from, req.open_token}] =
        OpenRecord{req.open_token, from, target.id, req.flags, req.cred};
    reply.file_meta = DirMeta(target);
    return reply;
  }
  opened_[{from, req.open_token}] =
      OpenRecord{req.open_token, from, target.id, req.flags, req.cred};
  FileData& d = *target.data;
  if (req.flags.truncate) {
    std::unique_lock<std::shared_mutex> w(d.mu);
    d.content.clear();
    d.mtime_ns = NowNs();
    if (store_) Persist(store_->Truncate(target.id, 0));
  }
  std::shared_lock<std::shared_mutex> r(d.mu);
  reply.file_meta = FileMeta(target, d);
  if (req.inline_limit > 0 && d.content.size() <= req.inline_limit) {
    reply.inline_data = d.content;
    d.atime_ns = NowNs();
  }
  return reply;
}

void Server::HandleBaselineOpen(ClientId from, const BaselineOpenRequest& req, Responder done) {
  Actions acts;
  auto reply_now = [&](RpcMessage m) { acts.push_back([done, m = std::move(m)] { done(m); }); };
  {
    std::lock_guard<std::mutex> l(mu_);
    auto parts = SplitPath(req.path);
    if (!parts.ok()) {
      reply_now(MakeError(Status::NotFound(parts.status().message())));
    } else if (!req.flags.WellFormed()) {
      reply_now(MakeError(Status::IOError("malformed open flags")));
    } else {
      Node* cur = &nodes_.at(kRootFileId);
      Status s;
      bool create_here = false;
      for (size_t i = 0; i < parts->size() && s.ok(); i++) {
        if (!cur->is_dir) {
          s = Status::NotADirectory((*parts)[i - 1]);
          break;
        }
        if (!CheckPermission(cur->perm, req.cred, AccessMask::Exec())) {
          s = Status::AccessDenied("search permission on " + cur->name);
          break;
        }
        auto it = cur->children.find((*parts)[i]);
        if (it == cur->children.end()) {
          if (i + 1 == parts->size() && req.flags.create) {
            if (!CheckPermission(cur->perm, req.cred, AccessMask::Write())) {
              s = Status::AccessDenied("write permission on " + cur->name);
            } else {
              create_here = true;
            }
          } else {
            s = Status::NotFound(req.path);
          }
          break;
        }
        cur = &nodes_.at(it->second);
      }
      if (!s.ok()) {
        reply_now(MakeError(s));
      } else if (create_here) {
        uint64_t parent = cur->id;
        Mutation m;
        m.targets.push_back(InodeOf(parent));
        m.hold.insert(parent);
        m.apply = [this, from, req, parent, name = parts->back()]() -> RpcMessage {
          PermissionRecord perm{req.cred.uid, req.cred.gid, req.create_mode};
          auto entry = CreateLocked(parent, name, perm, false);
          if (!entry.ok()) return MakeError(entry.status());
          return FinishBaselineOpen(from, req, nodes_.at(entry->inode.file_id));
        };
        m.done = done;
        Submit(std::move(m), acts);
      } else if (!CheckPermission(cur->perm, req.cred, AccessMaskFor(req.flags))) {
        reply_now(MakeError(Status::AccessDenied(req.path)));
      } else {
        reply_now(FinishBaselineOpen(from, req, *cur));
      }
    }
  }
  Run(acts);
}

bool Server::IsHeld(uint64_t dir) const {
  return active_.has_value() && active_->mutation.hold.count(dir) > 0;
}

void Server::Submit(Mutation m, Actions& acts) {
  pending_.push_back(std::move(m));
  if (!active_) StartNext(acts);
}

void Server::StartNext(Actions& acts) {
  while (!active_ && !pending_.empty()) {
    Mutation m = std::move(pending_.front());
    pending_.pop_front();
    // Pushed clients drop these listings; a later GetDir registers them anew.
    std::set<ClientId> clients;
    std::map<uint64_t, std::set<ClientId>> dropped;
    for (uint64_t d : m.hold) {
      auto it = registry_.find(d);
      if (it == registry_.end() || it->second.empty()) continue;
      clients.insert(it->second.begin(), it->second.end());
      dropped[d] = std::move(it->second);
      registry_.erase(it);
    }
    if (clients.empty()) {
      RpcMessage reply = m.apply();
      acts.push_back([done = std::move(m.done), reply = std::move(reply)] { done(reply); });
      continue;
    }
    Round r;
    r.epoch = ++epoch_;
    r.awaiting = clients;
    r.dropped = std::move(dropped);
    r.deadline = std::chrono::steady_clock::now() + options_.ack_deadline;
    InvalidateRequest inv{m.targets, r.epoch};
    r.mutation = std::move(m);
    active_ = std::move(r);
    ClientNotifier* notifier = notifier_;
    for (ClientId c : clients) {
      acts.push_back([this, notifier, c, inv] {
        if (notifier == nullptr || !notifier->Push(c, inv)) OnPushFailed(inv.epoch, c);
      });
    }
    timer_cv_.notify_all();
  }
}

void Server::CompleteRound(Actions& acts) {
  Round r = std::move(*active_);
  active_.reset();
  RpcMessage reply = r.mutation.apply();
  acts.push_back([done = std::move(r.mutation.done), reply = std::move(reply)] { done(reply); });
  ReleaseHeld(acts);
  StartNext(acts);
}

void Server::ReleaseHeld(Actions& acts) {
  std::vector<HeldGetDir> held = std::move(held_);
  held_.clear();
  for (auto& h : held) {
    auto node = Lookup(h.request.dir_inode);
    RpcMessage reply;
    if (!node.ok()) {
      reply = MakeError(node.status());
    } else if (IsHeld((*node)->id)) {
      held_.push_back(std::move(h));
      continue;
    } else {
      registry_[(*node)->id].insert(h.request.client_id);
      reply = BuildListing(**node);
    }
    acts.push_back([done = std::move(h.done), reply = std::move(reply)] { done(reply); });
  }
}

void Server::HandleAck(const InvalidateAck& ack) {
  Actions acts;
  {
    std::lock_guard<std::mutex> l(mu_);
    if (!active_ || active_->epoch != ack.epoch) return;
    active_->awaiting.erase(ack.client_id);
    if (active_->awaiting.empty()) CompleteRound(acts);
  }
  Run(acts);
}

void Server::OnPushFailed(uint64_t epoch, ClientId client) {
  // No push channel means the client is gone and caches nothing.
  Actions acts;
  {
    std::lock_guard<std::mutex> l(mu_);
    if (!active_ || active_->epoch != epoch) return;
    active_->awaiting.erase(client);
    if (active_->awaiting.empty()) CompleteRound(acts);
  }
  Run(acts);
}

int Server::ExpireLocked(std::chrono::steady_clock::time_point now, Actions& acts) {
  if (!active_ || active_->deadline > now) return 0;
  Round r = std::move(*active_);
  active_.reset();
  // The change is abandoned, so silent clients still hold a valid view and
  // stay registered; the ones that acked dropped their copy.
  for (const auto& [dir, clients] : r.dropped) {
    for (ClientId c : clients) {
      if (r.awaiting.count(c)) registry_[dir].insert(c);
    }
  }
  acts.push_back([done = std::move(r.mutation.done)] {
    done(MakeError(Status::IOError("timed out waiting for invalidation acks")));
  });
  ReleaseHeld(acts);
  StartNext(acts);
  return 1;
}

int Server::ExpireOverdueRounds(std::chrono::steady_clock::time_point now) {
  Actions acts;
  int n;
  {
    std::lock_guard<std::mutex> l(mu_);
    n = ExpireLocked(now, acts);
  }
  Run(acts);
  return n;
}

AdminDumpReply Server::AdminDump() const {
  std::lock_guard<std::mutex> l(mu_);
  AdminDumpReply r;
  r.host_id = options_.host_id;
  r.version = options_.version;
  r.invalidation_epoch = epoch_;
  for (const auto& [key, rec] : opened_) r.opened.push_back(rec);
  for (const auto& [dir, clients] : registry_) {
    if (clients.empty()) continue;
    r.registry.push_back(RegistryEntry{dir, std::vector<ClientId>(clients.begin(), clients.end())});
  }
  std::vector<uint64_t> ids;
  ids.reserve(nodes_.size());
  for (const auto& [id, n] : nodes_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  for (uint64_t id : ids) {
    const Node& n = nodes_.at(id);
    if (n.is_dir) {
      r.files.push_back(DirMeta(n));
    } else {
      std::shared_lock<std::shared_mutex> rl(n.data->mu);
      r.files.push_back(FileMeta(n, *n.data));
    }
  }
  r.round_active = active_.has_value();
  r.awaiting_acks = active_ ? static_cast<uint32_t>(active_->awaiting.size()) : 0;
  r.held_get_dirs = static_cast<uint32_t>(held_.size());
  return r;
}

}  // namespace buffetfs
