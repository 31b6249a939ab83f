#include "buffetfs/agent.h"

namespace buffetfs {

Agent::Agent(Transport* transport, ClusterConfig config, AgentOptions options)
    : transport_(transport), options_(std::move(options)), config_(std::move(config)) {
  root_ = std::make_unique<Node>();
  root_->entry.inode = config_.RootInode();
  root_->gen = next_gen_++;
  index_[root_->entry.inode] = root_.get();
  transport_->SetPushSink(this);
}

Agent::~Agent() { transport_->SetPushSink(nullptr); }

Agent::Node* Agent::Find(const BuffetInode& inode) const {
  auto it = index_.find(inode);
  return it == index_.end() ? nullptr : it->second;
}

const Agent::Node* Agent::FindPath(const std::vector<std::string>& parts) const {
  const Node* cur = root_.get();
  for (const auto& name : parts) {
    if (!cur->children) return nullptr;
    auto it = cur->children->find(name);
    if (it == cur->children->end()) return nullptr;
    cur = it->second.get();
  }
  return cur;
}

CacheNodeView Agent::ViewOf(const Node& n) {
  CacheNodeView v;
  v.entry = n.entry;
  v.valid = n.valid;
  v.listed = n.children.has_value();
  v.child_count = n.children ? n.children->size() : 0;
  return v;
}

void Agent::Unindex(Node* n) {
  auto it = index_.find(n->entry.inode);
  if (it != index_.end() && it->second == n) index_.erase(it);
  if (n->children) {
    for (auto& [name, child] : *n->children) Unindex(child.get());
  }
}

void Agent::ApplyListing(Node* dir, GetDirReply reply) {
  dir->entry.perm = reply.dir_meta.perm;
  dir->valid = true;
  std::map<std::string, std::unique_ptr<Node>> old;
  if (dir->children) old = std::move(*dir->children);
  std::map<std::string, std::unique_ptr<Node>> fresh;
  for (auto& e : reply.entries) {
    std::unique_ptr<Node> node;
    auto it = old.find(e.name);
    if (it != old.end() && it->second->entry.inode == e.inode) {
      // Same object: keep whatever of its subtree is still cached.
      node = std::move(it->second);
      old.erase(it);
    } else {
      node = std::make_unique<Node>();
      node->parent = dir;
      node->gen = next_gen_++;
    }
    node->entry = e;
    node->valid = true;
    index_[e.inode] = node.get();
    std::string name = e.name;
    fresh.emplace(std::move(name), std::move(node));
  }
  for (auto& [name, gone] : old) Unindex(gone.get());
  dir->children = std::move(fresh);
}

Agent::WalkStep Agent::WalkLocked(const std::vector<std::string>& parts,
                                  const Credentials* cred) const {
  WalkStep step;
  const Node* cur = root_.get();
  const Node* parent = root_.get();
  auto fetch = [&](const Node* n) {
    step.need_fetch = true;
    step.fetch_dir = n->entry.inode;
    step.fetch_gen = n->gen;
    return step;
  };
  if (parts.empty() && !cur->valid) return fetch(cur);
  for (size_t i = 0; i < parts.size(); i++) {
    if (!cur->valid || !cur->children) return fetch(cur);
    if (cred != nullptr && !CheckPermission(cur->entry.perm, *cred, AccessMask::Exec())) {
      step.status = Status::AccessDenied("search permission denied at " + parts[i]);
      return step;
    }
    auto it = cur->children->find(parts[i]);
    bool last = i + 1 == parts.size();
    if (it == cur->children->end()) {
      if (!last) {
        step.status = Status::NotFound(parts[i]);
        return step;
      }
      step.missing = true;
      step.parent = cur->entry;
      return step;
    }
    const Node* child = it->second.get();
    // An invalidated entry is refreshed from its parent's listing.
    if (!child->valid) return fetch(cur);
    if (!last && !child->entry.perm.is_dir()) {
      step.status = Status::NotADirectory(parts[i]);
      return step;
    }
    parent = cur;
    cur = child;
  }
  step.target = cur->entry;
  step.parent = parent->entry;
  return step;
}

Result<Agent::WalkStep> Agent::Walk(const std::vector<std::string>& parts,
                                    const Credentials* cred) {
  bool restarted_stale = false;
  for (int attempt = 0; attempt <= options_.max_restarts; attempt++) {
    WalkStep step;
    {
      std::shared_lock<std::shared_mutex> l(tree_mu_);
      step = WalkLocked(parts, cred);
    }
    if (!step.status.ok()) return step.status;
    if (!step.need_fetch) return step;
    Status s = Fetch(step.fetch_dir, step.fetch_gen);
    if (s.IsStaleInode() && !restarted_stale) {
      // The cache was rebuilt on the reloaded configuration; walk it once more.
      restarted_stale = true;
      continue;
    }
    if (!s.ok()) return s;
  }
  return Status::IOError("directory cache kept changing during lookup");
}

Status Agent::Fetch(const BuffetInode& dir, uint64_t gen) {
  {
    std::unique_lock<std::shared_mutex> l(tree_mu_);
    if (fetching_.count(dir)) {
      // Someone else is already fetching it; the caller walks again after.
      fetch_cv_.wait(l, [&] { return fetching_.count(dir) == 0; });
      return Status::OK();
    }
    fetching_.insert(dir);
  }
  auto reply = CallServer(dir, GetDirRequest{dir, client_id()});
  std::unique_lock<std::shared_mutex> l(tree_mu_);
  fetching_.erase(dir);
  fetch_cv_.notify_all();
  if (!reply.ok()) return reply.status();
  auto listing = Expect<GetDirReply>(std::move(*reply));
  if (!listing.ok()) return listing.status();
  Node* n = Find(dir);
  // A different gen means an invalidation overtook this reply; drop it.
  if (n != nullptr && n->gen == gen) ApplyListing(n, std::move(*listing));
  return Status::OK();
}

void Agent::HandlePush(const std::string& from_address, RpcMessage msg) {
  auto* inv = std::get_if<InvalidateRequest>(&msg);
  if (inv == nullptr) {
    LogToStderr(Status::InvalidArgument(std::string("unexpected push ") + MessageName(TagOf(msg))));
    return;
  }
  {
    std::unique_lock<std::shared_mutex> l(tree_mu_);
    for (const auto& target : inv->targets) {
      Node* n = Find(target);
      if (n == nullptr) continue;
      n->valid = false;
      n->gen = next_gen_++;
      if (n->children) {
        for (auto& [name, child] : *n->children) Unindex(child.get());
        n->children.reset();
      }
    }
  }
  invalidations_++;
  Status s = transport_->Notify(from_address, InvalidateAck{inv->epoch, client_id()});
  if (!s.ok()) LogToStderr(s);
}

void Agent::DropCache() {
  BuffetInode root;
  {
    std::lock_guard<std::mutex> l(config_mu_);
    root = config_.RootInode();
  }
  std::unique_lock<std::shared_mutex> l(tree_mu_);
  index_.clear();
  root_ = std::make_unique<Node>();
  root_->entry.inode = root;
  root_->gen = next_gen_++;
  index_[root] = root_.get();
}

Result<std::string> Agent::AddressOf(const BuffetInode& inode) const {
  std::lock_guard<std::mutex> l(config_mu_);
  return config_.Resolve(inode);
}

Status Agent::ReloadConfig() {
  if (!options_.reload_config) return Status::StaleInode("no configuration source");
  auto fresh = options_.reload_config();
  if (!fresh.ok()) return fresh.status();
  std::lock_guard<std::mutex> l(config_mu_);
  config_ = std::move(*fresh);
  return Status::OK();
}

Result<RpcMessage> Agent::CallServer(const BuffetInode& inode, const RpcMessage& request) {
  for (int attempt = 0; attempt < 2; attempt++) {
    auto addr = AddressOf(inode);
    if (addr.ok()) {
      auto reply = transport_->Call(*addr, request);
      if (!reply.ok()) return reply.status();
      auto* e = std::get_if<ErrorReply>(&*reply);
      if (e == nullptr || e->code != Code::kStaleInode) return reply;
    }
    if (attempt == 0 && !ReloadConfig().ok()) break;
  }
  DropCache();
  return Status::StaleInode(inode.ToString());
}

Result<std::shared_ptr<OpenHandle>> Agent::HandleOf(Pid pid, int fd) const {
  std::lock_guard<std::mutex> l(fd_mu_);
  auto p = processes_.find(pid);
  if (p == processes_.end()) return Status::BadHandle("fd " + std::to_string(fd));
  auto it = p->second.fds.find(fd);
  if (it == p->second.fds.end()) return Status::BadHandle("fd " + std::to_string(fd));
  return it->second;
}

std::optional<HandleState> Agent::StateOf(Pid pid, int fd) const {
  auto h = HandleOf(pid, fd);
  if (!h.ok()) return std::nullopt;
  std::lock_guard<std::mutex> l((*h)->mu);
  return (*h)->state;
}

Result<DirEntryRecord> Agent::CreateEntry(const Credentials& cred, const DirEntryRecord& parent,
                                          const std::string& name, uint16_t mode, bool is_dir) {
  CreateRequest req;
  req.parent = parent.inode;
  req.name = name;
  req.perm = PermissionRecord{cred.uid, cred.gid,
                              static_cast<uint16_t>((is_dir ? kTypeDirectory : kTypeRegular) |
                                                    (mode & kPermMask))};
  req.is_dir = is_dir;
  auto reply = CallServer(parent.inode, req);
  if (!reply.ok()) return reply.status();
  auto created = Expect<CreateReply>(std::move(*reply));
  if (!created.ok()) return created.status();
  return created->entry;
}

Result<int> Agent::Open(Pid pid, const Credentials& cred, const std::string& path, OpenFlags flags,
                        uint16_t create_mode) {
  auto parts = SplitPath(path);
  if (!parts.ok()) return parts.status();
  if (!flags.WellFormed()) return Status::InvalidArgument("malformed open flags");

  DirEntryRecord target;
  bool found = false;
  for (int attempt = 0; attempt < 2 && !found; attempt++) {
    auto step = Walk(*parts, &cred);
    if (!step.ok()) return step.status();
    if (!step->missing) {
      target = step->target;
      if (target.perm.is_dir() && flags.writable()) return Status::IOError(path + " is a directory");
      if (!CheckPermission(target.perm, cred, AccessMaskFor(flags))) {
        return Status::AccessDenied(path);
      }
      found = true;
      break;
    }
    if (!flags.create) return Status::NotFound(path);
    if (!CheckPermission(step->parent.perm, cred, AccessMask::Write() | AccessMask::Exec())) {
      return Status::AccessDenied("cannot create in parent of " + path);
    }
    auto created = CreateEntry(cred, step->parent, parts->back(), create_mode, false);
    if (created.ok()) {
      target = *created;
      found = true;
    } else if (created.status().code() != Code::kExists) {
      return created.status();
    }
    // Lost a creation race: walk again and open the existing file.
  }
  if (!found) return Status::Exists(path);

  auto h = std::make_shared<OpenHandle>();
  h->inode = target.inode;
  h->flags = flags;
  h->cred = cred;
  h->open_token = next_token_++;
  std::lock_guard<std::mutex> l(fd_mu_);
  ProcessContext& ctx = processes_[pid];
  int fd = ctx.next_fd++;
  ctx.fds[fd] = std::move(h);
  return fd;
}

Result<Bytes> Agent::Read(Pid pid, int fd, uint32_t length) {
  auto handle = HandleOf(pid, fd);
  if (!handle.ok()) return handle.status();
  OpenHandle& h = **handle;
  std::lock_guard<std::mutex> l(h.mu);
  if (h.state == HandleState::kClosed) return Status::BadHandle("fd " + std::to_string(fd));
  if (!h.flags.readable()) return Status::AccessDenied("fd " + std::to_string(fd) + " is write-only");
  ReadRequest req{h.inode, h.open_token, h.offset, length, std::nullopt};
  if (h.state == HandleState::kIncomplete) req.deferred_open = DeferredOpen{h.open_token, h.flags, h.cred};
  auto reply = CallServer(h.inode, req);
  if (!reply.ok()) return reply.status();
  auto r = Expect<ReadReply>(std::move(*reply));
  if (!r.ok()) return r.status();
  h.state = HandleState::kServerOpened;
  h.offset += r->data.size();
  return std::move(r->data);
}

Result<uint32_t> Agent::Write(Pid pid, int fd, std::span<const uint8_t> data) {
  auto handle = HandleOf(pid, fd);
  if (!handle.ok()) return handle.status();
  OpenHandle& h = **handle;
  std::lock_guard<std::mutex> l(h.mu);
  if (h.state == HandleState::kClosed) return Status::BadHandle("fd " + std::to_string(fd));
  if (!h.flags.writable()) return Status::AccessDenied("fd " + std::to_string(fd) + " is read-only");
  WriteRequest req{h.inode, h.open_token, h.offset, Bytes(data.begin(), data.end()), std::nullopt};
  if (h.state == HandleState::kIncomplete) req.deferred_open = DeferredOpen{h.open_token, h.flags, h.cred};
  auto reply = CallServer(h.inode, req);
  if (!reply.ok()) return reply.status();
  auto r = Expect<WriteReply>(std::move(*reply));
  if (!r.ok()) return r.status();
  h.state = HandleState::kServerOpened;
  h.offset += r->bytes_written;
  return r->bytes_written;
}

Status Agent::Close(Pid pid, int fd) {
  std::shared_ptr<OpenHandle> h;
  {
    std::lock_guard<std::mutex> l(fd_mu_);
    auto p = processes_.find(pid);
    if (p == processes_.end()) return Status::BadHandle("fd " + std::to_string(fd));
    auto it = p->second.fds.find(fd);
    if (it == p->second.fds.end()) return Status::BadHandle("fd " + std::to_string(fd));
    h = std::move(it->second);
    p->second.fds.erase(it);
  }
  std::lock_guard<std::mutex> l(h->mu);
  bool opened = h->state == HandleState::kServerOpened;
  h->state = HandleState::kClosed;
  // Never-used handles left no trace on the server.
  if (!opened) return Status::OK();
  auto addr = AddressOf(h->inode);
  if (!addr.ok()) return Status::OK();  // that server is gone, and its open list with it
  return transport_->Notify(*addr, CloseNotify{h->inode, h->open_token, client_id()});
}

Status Agent::Seek(Pid pid, int fd, uint64_t offset) {
  auto handle = HandleOf(pid, fd);
  if (!handle.ok()) return handle.status();
  std::lock_guard<std::mutex> l((*handle)->mu);
  if ((*handle)->state == HandleState::kClosed) return Status::BadHandle("fd " + std::to_string(fd));
  (*handle)->offset = offset;
  return Status::OK();
}

Status Agent::Chmod(const Credentials& cred, const std::string& path, uint16_t mode) {
  auto parts = SplitPath(path);
  if (!parts.ok()) return parts.status();
  auto step = Walk(*parts, &cred);
  if (!step.ok()) return step.status();
  if (step->missing) return Status::NotFound(path);
  const DirEntryRecord& t = step->target;
  SetPermissionRequest req{t.inode,
                           PermissionRecord{t.perm.uid, t.perm.gid,
                                            static_cast<uint16_t>((t.perm.mode & kTypeMask) |
                                                                  (mode & kPermMask))},
                           cred};
  auto reply = CallServer(t.inode, req);
  if (!reply.ok()) return reply.status();
  return Expect<SetPermissionReply>(std::move(*reply)).status();
}

Status Agent::Mkdir(const Credentials& cred, const std::string& path, uint16_t mode) {
  auto parts = SplitPath(path);
  if (!parts.ok()) return parts.status();
  if (parts->empty()) return Status::Exists("/");
  auto step = Walk(*parts, &cred);
  if (!step.ok()) return step.status();
  if (!step->missing) return Status::Exists(path);
  if (!CheckPermission(step->parent.perm, cred, AccessMask::Write() | AccessMask::Exec())) {
    return Status::AccessDenied("cannot create in parent of " + path);
  }
  return CreateEntry(cred, step->parent, parts->back(), mode, true).status();
}

Result<std::vector<DirEntryRecord>> Agent::Readdir(const Credentials& cred,
                                                   const std::string& path) {
  auto parts = SplitPath(path);
  if (!parts.ok()) return parts.status();
  for (int attempt = 0; attempt <= options_.max_restarts; attempt++) {
    auto step = Walk(*parts, &cred);
    if (!step.ok()) return step.status();
    if (step->missing) return Status::NotFound(path);
    if (!step->target.perm.is_dir()) return Status::NotADirectory(path);
    if (!CheckPermission(step->target.perm, cred, AccessMask::Read())) {
      return Status::AccessDenied(path);
    }
    uint64_t gen = 0;
    {
      std::shared_lock<std::shared_mutex> l(tree_mu_);
      const Node* n = FindPath(*parts);
      if (n == nullptr) continue;
      if (n->valid && n->children) {
        std::vector<DirEntryRecord> out;
        for (const auto& [name, child] : *n->children) out.push_back(child->entry);
        return out;
      }
      gen = n->gen;
    }
    Status s = Fetch(step->target.inode, gen);
    if (!s.ok()) return s;
  }
  return Status::IOError("directory cache kept changing during readdir");
}

Result<CacheNodeView> Agent::Resolve(const std::string& path) {
  auto parts = SplitPath(path);
  if (!parts.ok()) return parts.status();
  auto step = Walk(*parts, nullptr);
  if (!step.ok()) return step.status();
  if (step->missing) return Status::NotFound(path);
  std::shared_lock<std::shared_mutex> l(tree_mu_);
  const Node* n = FindPath(*parts);
  if (n != nullptr) return ViewOf(*n);
  // Invalidated between the walk and now; report what the walk saw.
  CacheNodeView v;
  v.entry = step->target;
  return v;
}

Result<CacheNodeView> Agent::Peek(const std::string& path) const {
  auto parts = SplitPath(path);
  if (!parts.ok()) return parts.status();
  std::shared_lock<std::shared_mutex> l(tree_mu_);
  const Node* n = FindPath(*parts);
  if (n == nullptr) return Status::NotFound(path + " is not cached");
  return ViewOf(*n);
}

}  // namespace buffetfs
