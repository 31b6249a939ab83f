#include "buffetfs/harness.h"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>

namespace buffetfs {

namespace {

constexpr char kServerAddress[] = "bserver:1";
constexpr Pid kPid = 1;

thread_local void* tls_actor = nullptr;

std::string Octal(uint16_t mode) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%04o", mode & 07777);
  return buf;
}

const char* FlagsName(const OpenFlags& f) {
  switch (f.access) {
    case AccessMode::kReadOnly: return "r";
    case AccessMode::kWriteOnly: return "w";
    case AccessMode::kReadWrite: return "rw";
  }
  return "?";
}

std::string ResultName(const Status& s) { return s.ok() ? "OK" : CodeName(s.code()); }

std::vector<std::string> Tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

}  // namespace

std::string Step::ToString() const {
  std::ostringstream out;
  if (kind != StepKind::kFlush) out << actor << " ";
  switch (kind) {
    case StepKind::kOpen:
      out << "open " << path << " " << FlagsName(flags);
      if (!handle.empty()) out << " as " << handle;
      break;
    case StepKind::kRead: out << "read " << handle << " " << length; break;
    case StepKind::kWrite: out << "write " << handle << " " << data; break;
    case StepKind::kClose: out << "close " << handle; break;
    case StepKind::kChmod: out << "chmod " << path << " " << Octal(mode); break;
    case StepKind::kDeliverInvalidation: out << "deliver-invalidation"; break;
    case StepKind::kDeliverAsync: out << "deliver-async"; break;
    case StepKind::kDump: out << "dump"; break;
    case StepKind::kFlush: out << "flush"; break;
  }
  if (expect) out << " expect " << *expect;
  return out.str();
}

Result<std::vector<Step>> ParseScript(std::string_view text) {
  std::vector<Step> steps;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto tok = Tokens(line);
    if (tok.empty()) continue;
    auto bad = [&](const std::string& why) {
      return Status::InvalidArgument("line " + std::to_string(lineno) + ": " + why);
    };

    Step s;
    s.line = lineno;
    if (tok.size() >= 2 && tok[tok.size() - 2] == "expect") {
      s.expect = tok.back();
      tok.resize(tok.size() - 2);
    }
    if (tok.size() == 1 && tok[0] == "flush") {
      s.kind = StepKind::kFlush;
      steps.push_back(std::move(s));
      continue;
    }
    if (tok.size() < 2) return bad("expected '<actor> <op>'");
    s.actor = tok[0];
    const std::string& op = tok[1];
    size_t n = tok.size();
    if (op == "open") {
      if (n != 4 && n != 6) return bad("open <path> r|w|rw [as <handle>]");
      s.kind = StepKind::kOpen;
      s.path = tok[2];
      if (tok[3] == "r") {
        s.flags = OpenFlags::ReadOnly();
      } else if (tok[3] == "w") {
        s.flags = OpenFlags::WriteOnly();
      } else if (tok[3] == "rw") {
        s.flags = OpenFlags::ReadWrite();
      } else {
        return bad("bad open mode '" + tok[3] + "'");
      }
      if (n == 6) {
        if (tok[4] != "as") return bad("expected 'as'");
        s.handle = tok[5];
      }
    } else if (op == "read") {
      if (n != 4) return bad("read <handle> <n>");
      s.kind = StepKind::kRead;
      s.handle = tok[2];
      try {
        s.length = static_cast<uint32_t>(std::stoul(tok[3]));
      } catch (const std::exception&) {
        return bad("bad length");
      }
    } else if (op == "write") {
      if (n < 4) return bad("write <handle> <text>");
      s.kind = StepKind::kWrite;
      s.handle = tok[2];
      for (size_t i = 3; i < n; i++) {
        if (i > 3) s.data += " ";
        s.data += tok[i];
      }
    } else if (op == "close") {
      if (n != 3) return bad("close <handle>");
      s.kind = StepKind::kClose;
      s.handle = tok[2];
    } else if (op == "chmod") {
      if (n != 4) return bad("chmod <path> <octal>");
      s.kind = StepKind::kChmod;
      s.path = tok[2];
      try {
        size_t used = 0;
        unsigned long m = std::stoul(tok[3], &used, 8);
        if (used != tok[3].size() || m > 0777) return bad("bad mode");
        s.mode = static_cast<uint16_t>(m);
      } catch (const std::exception&) {
        return bad("bad mode");
      }
    } else if (op == "deliver-invalidation" && n == 2) {
      s.kind = StepKind::kDeliverInvalidation;
    } else if (op == "deliver-async" && n == 2) {
      s.kind = StepKind::kDeliverAsync;
    } else if (op == "dump" && n == 2) {
      s.kind = StepKind::kDump;
    } else {
      return bad("unknown step '" + op + "'");
    }
    steps.push_back(std::move(s));
  }
  return steps;
}

std::string Trace::ToString() const {
  std::ostringstream out;
  for (const auto& e : entries) {
    out << e.step << ": " << e.text << " -> "
        << (e.completed ? ResultName(e.result) : std::string("PENDING"));
    if (!e.detail.empty()) out << " " << e.detail;
    out << "\n";
  }
  out << "history:\n";
  for (const auto& h : history) out << "  " << h.ToString() << "\n";
  for (const auto& v : violations) out << "violation: " << v << "\n";
  return out.str();
}

// Compares every directory listing against the server's permissions at the
// moment the reply leaves. A listing carrying a superseded permission would
// let a client decide on stale state.
class Harness::ReplyCheck : public ServerEndpoint {
 public:
  ReplyCheck(Harness* h, Server* server) : h_(h), server_(server) {}

  void HandleCall(ClientId from, RpcMessage request, Responder done) override {
    if (!std::holds_alternative<GetDirRequest>(request)) {
      server_->HandleCall(from, std::move(request), std::move(done));
      return;
    }
    server_->HandleCall(from, std::move(request), [this, done = std::move(done)](RpcMessage reply) {
      if (auto* r = std::get_if<GetDirReply>(&reply)) Inspect(*r);
      done(std::move(reply));
    });
  }

  void HandleOneWay(ClientId from, RpcMessage msg) override {
    server_->HandleOneWay(from, std::move(msg));
  }

 private:
  void Compare(const BuffetInode& inode, const PermissionRecord& sent, const std::string& what) {
    auto now = server_->PermissionOf(inode.file_id);
    if (now && *now == sent) return;
    std::string msg = "GetDir reply for " + what + " carried mode " + Octal(sent.mode) +
                      ", server has " + (now ? Octal(now->mode) : std::string("nothing"));
    std::lock_guard<std::mutex> l(h_->mu_);
    h_->trace_.violations.push_back(std::move(msg));
  }

  void Inspect(const GetDirReply& r) {
    Compare(r.dir_meta.inode, r.dir_meta.perm, "directory " + r.dir_meta.inode.ToString());
    for (const auto& e : r.entries) Compare(e.inode, e.perm, "entry " + e.name);
  }

  Harness* h_;
  Server* server_;
};

Harness::Harness() : net_(SimOptions{LatencyModel{}, false}) {}

Harness::~Harness() {
  net_.SetCallWaiter(nullptr);
  {
    std::lock_guard<std::mutex> l(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& a : actors_) {
    if (a->thread.joinable()) a->thread.join();
  }
}

Result<std::unique_ptr<Harness>> Harness::Create(int clients) {
  if (clients < 1 || clients > 3) return Status::InvalidArgument("clients must be 1..3");
  std::unique_ptr<Harness> h(new Harness());
  Status s = h->Setup(clients);
  if (!s.ok()) return s;
  return h;
}

const std::vector<std::string>& Harness::Paths() {
  static const std::vector<std::string> paths = {"/",     "/d", "/d/f0", "/d/f1",
                                                 "/d/f2", "/e", "/e/g0"};
  return paths;
}

Status Harness::Setup(int clients) {
  ServerOptions opts;
  opts.host_id = 1;
  opts.version = 1;
  opts.deadline_timer = false;
  opts.root_perm = PermissionRecord{1, 1, static_cast<uint16_t>(kTypeDirectory | 0755)};
  auto server = Server::Create(opts, net_.NotifierFor(kServerAddress));
  if (!server.ok()) return server.status();
  server_ = std::move(*server);
  check_ = std::make_unique<ReplyCheck>(this, server_.get());
  net_.AttachServer(kServerAddress, check_.get());
  config_.AddServer(opts.host_id, server_->version(), kServerAddress);
  config_.SetHome(opts.host_id, server_->version());

  inodes_["/"] = server_->RootInode();
  {
    auto setup = net_.Connect(99);
    struct Spec {
      const char* path;
      const char* parent;
      const char* name;
      uint16_t mode;
    };
    const Spec specs[] = {
        {"/d", "/", "d", static_cast<uint16_t>(kTypeDirectory | 0755)},
        {"/d/f0", "/d", "f0", static_cast<uint16_t>(kTypeRegular | 0640)},
        {"/d/f1", "/d", "f1", static_cast<uint16_t>(kTypeRegular | 0640)},
        {"/d/f2", "/d", "f2", static_cast<uint16_t>(kTypeRegular | 0640)},
        {"/e", "/", "e", static_cast<uint16_t>(kTypeDirectory | 0711)},
        {"/e/g0", "/e", "g0", static_cast<uint16_t>(kTypeRegular | 0644)},
    };
    for (const auto& sp : specs) {
      CreateRequest req{inodes_.at(sp.parent), sp.name, PermissionRecord{1, 1, sp.mode},
                        (sp.mode & kTypeMask) == kTypeDirectory};
      auto reply = setup->Call(kServerAddress, req);
      if (!reply.ok()) return reply.status();
      auto created = Expect<CreateReply>(std::move(*reply));
      if (!created.ok()) return created.status();
      inodes_[sp.path] = created->entry.inode;
    }
  }
  for (const auto& [path, inode] : inodes_) {
    auto perm = server_->PermissionOf(inode.file_id);
    if (!perm) return Status::Corruption("no permission for " + path);
    initial_.perms[path] = *perm;
  }

  const Credentials creds[] = {{1, 1}, {2, 1}, {3, 3}};
  const char* names[] = {"A", "B", "C"};
  for (int i = 0; i < clients; i++) {
    auto a = std::make_unique<Actor>();
    a->name = names[i];
    a->id = static_cast<ClientId>(i + 1);
    a->cred = creds[i];
    a->transport = net_.Connect(a->id);
    a->agent = std::make_unique<Agent>(a->transport.get(), config_);
    actors_.push_back(std::move(a));
  }
  auto srv = std::make_unique<Actor>();
  srv->name = "server";
  srv->id = kServerAdminClient;
  srv->cred = Credentials{1, 1};
  srv->transport = net_.Connect(kServerAdminClient);
  actors_.push_back(std::move(srv));

  for (auto& a : actors_) {
    Actor* p = a.get();
    p->thread = std::thread([this, p] { ActorLoop(p); });
  }
  net_.SetCallWaiter(this);
  return Status::OK();
}

Harness::Actor* Harness::Find(const std::string& name) const {
  for (const auto& a : actors_) {
    if (a->name == name) return a.get();
  }
  return nullptr;
}

std::vector<std::string> Harness::Clients() const {
  std::vector<std::string> out;
  for (const auto& a : actors_) {
    if (a->agent) out.push_back(a->name);
  }
  return out;
}

bool Harness::Busy(const std::string& actor) const {
  Actor* a = Find(actor);
  std::lock_guard<std::mutex> l(mu_);
  return a != nullptr && a->state != Actor::State::kIdle;
}

size_t Harness::PendingPushes(const std::string& actor) const {
  Actor* a = Find(actor);
  return a == nullptr ? 0 : net_.PendingCount(kServerAddress, SimNetwork::ClientAddress(a->id));
}

size_t Harness::PendingAsync(const std::string& actor) const {
  Actor* a = Find(actor);
  return a == nullptr ? 0 : net_.PendingCount(SimNetwork::ClientAddress(a->id), kServerAddress);
}

std::vector<std::string> Harness::Handles(const std::string& actor) const {
  Actor* a = Find(actor);
  std::vector<std::string> out;
  if (a == nullptr) return out;
  std::lock_guard<std::mutex> l(mu_);
  for (const auto& [name, info] : a->handles) out.push_back(name);
  return out;
}

Agent* Harness::agent(const std::string& actor) const {
  Actor* a = Find(actor);
  return a == nullptr ? nullptr : a->agent.get();
}

std::optional<PermissionRecord> Harness::PermissionAt(const std::string& path) const {
  auto it = inodes_.find(path);
  if (it == inodes_.end()) return std::nullopt;
  return server_->PermissionOf(it->second.file_id);
}

uint64_t Harness::Tick() {
  std::lock_guard<std::mutex> l(mu_);
  return ++clock_;
}

void Harness::ActorLoop(Actor* a) {
  tls_actor = a;
  std::unique_lock<std::mutex> l(mu_);
  for (;;) {
    cv_.wait(l, [&] { return stop_ || (a->state == Actor::State::kRunning && a->task); });
    if (stop_) return;
    auto task = std::move(a->task);
    a->task = nullptr;
    l.unlock();
    task();
    l.lock();
    a->state = Actor::State::kIdle;
    cv_.notify_all();
  }
}

void Harness::Wait(PendingCall& call) {
  auto* a = static_cast<Actor*>(tls_actor);
  if (a == nullptr) {
    call.Wait();
    return;
  }
  {
    std::lock_guard<std::mutex> l(mu_);
    a->ready = false;
  }
  bool registered = call.OnDone([this, a] {
    std::lock_guard<std::mutex> l(mu_);
    a->ready = true;
  });
  if (!registered) return;  // replied synchronously
  std::unique_lock<std::mutex> l(mu_);
  a->state = Actor::State::kBlocked;
  cv_.notify_all();
  cv_.wait(l, [&] { return stop_ || a->state == Actor::State::kRunning; });
}

void Harness::Dispatch(Actor* a, std::function<void()> fn) {
  std::unique_lock<std::mutex> l(mu_);
  a->task = std::move(fn);
  a->state = Actor::State::kRunning;
  cv_.notify_all();
  cv_.wait(l, [&] { return a->state != Actor::State::kRunning; });
}

void Harness::Quiesce() {
  for (;;) {
    std::unique_lock<std::mutex> l(mu_);
    Actor* next = nullptr;
    for (auto& a : actors_) {
      if (a->state == Actor::State::kBlocked && a->ready) {
        next = a.get();
        break;
      }
    }
    if (next == nullptr) return;
    next->ready = false;
    next->state = Actor::State::kRunning;
    cv_.notify_all();
    cv_.wait(l, [&] { return next->state != Actor::State::kRunning; });
  }
}

size_t Harness::AddEntry(const Step& step) {
  std::lock_guard<std::mutex> l(mu_);
  TraceEntry e;
  e.step = trace_.entries.size();
  e.text = step.ToString();
  trace_.entries.push_back(std::move(e));
  return trace_.entries.size() - 1;
}

void Harness::Finish(size_t entry, const Status& s, std::string detail) {
  std::lock_guard<std::mutex> l(mu_);
  auto& e = trace_.entries[entry];
  e.completed = true;
  e.result = s;
  e.detail = std::move(detail);
}

void Harness::RunOp(Actor* a, const Step& step, size_t entry) {
  auto record = [&](HistoryOp op) {
    std::lock_guard<std::mutex> l(mu_);
    op.id = next_op_id_++;
    trace_.history.push_back(std::move(op));
    return trace_.history.back().id;
  };

  switch (step.kind) {
    case StepKind::kOpen: {
      uint64_t invoke = Tick();
      auto r = a->agent->Open(kPid, a->cred, step.path, step.flags);
      uint64_t complete = Tick();
      Status s = r.status();
      if (s.ok() || s.IsAccessDenied()) {
        HistoryOp op;
        op.actor = a->name;
        op.kind = HistoryKind::kOpenAdmission;
        op.path = step.path;
        op.cred = a->cred;
        op.mask = AccessMaskFor(step.flags);
        op.admitted = s.ok();
        op.invoke_ts = invoke;
        op.complete_ts = complete;
        record(std::move(op));
      }
      if (s.ok()) {
        std::lock_guard<std::mutex> l(mu_);
        std::string name = step.handle;
        if (name.empty()) name = a->name + std::to_string(++a->handle_seq);
        a->handles[name] = HandleInfo{*r, step.path, step.flags};
      }
      Finish(entry, s, "");
      return;
    }
    case StepKind::kRead:
    case StepKind::kWrite: {
      HandleInfo info;
      {
        std::lock_guard<std::mutex> l(mu_);
        auto it = a->handles.find(step.handle);
        if (it != a->handles.end()) info = it->second;
      }
      if (info.fd < 0) {
        Finish(entry, Status::BadHandle("no handle " + step.handle), "");
        return;
      }
      bool reading = step.kind == StepKind::kRead;
      bool allowed = reading ? info.flags.readable() : info.flags.writable();
      bool first = a->agent->StateOf(kPid, info.fd) == HandleState::kIncomplete;
      uint64_t invoke = Tick();
      Status s;
      std::string detail;
      if (reading) {
        auto r = a->agent->Read(kPid, info.fd, step.length);
        s = r.status();
        if (r.ok()) detail = "\"" + std::string(r->begin(), r->end()) + "\"";
      } else {
        auto r = a->agent->Write(
            kPid, info.fd,
            std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(step.data.data()),
                                     step.data.size()));
        s = r.status();
        if (r.ok()) detail = std::to_string(*r) + " bytes";
      }
      uint64_t complete = Tick();
      if (first && allowed && (s.ok() || s.IsAccessDenied())) {
        HistoryOp op;
        op.actor = a->name;
        op.kind = HistoryKind::kServerAdmission;
        op.path = info.path;
        op.cred = a->cred;
        op.mask = AccessMaskFor(info.flags);
        op.admitted = s.ok();
        op.invoke_ts = invoke;
        op.complete_ts = complete;
        record(std::move(op));
      }
      Finish(entry, s, std::move(detail));
      return;
    }
    case StepKind::kClose: {
      int fd = -1;
      {
        std::lock_guard<std::mutex> l(mu_);
        auto it = a->handles.find(step.handle);
        if (it != a->handles.end()) {
          fd = it->second.fd;
          a->handles.erase(it);
        }
      }
      Status s = fd < 0 ? Status::BadHandle("no handle " + step.handle) : a->agent->Close(kPid, fd);
      Finish(entry, s, "");
      return;
    }
    case StepKind::kChmod: {
      HistoryOp op;
      op.actor = a->name;
      op.kind = HistoryKind::kChmod;
      op.path = step.path;
      op.mode = step.mode;
      op.invoke_ts = Tick();
      int id = record(op);
      Status s;
      if (a->agent) {
        s = a->agent->Chmod(a->cred, step.path, step.mode);
      } else {
        auto it = inodes_.find(step.path);
        auto perm = it == inodes_.end() ? std::nullopt : server_->PermissionOf(it->second.file_id);
        if (!perm) {
          s = Status::NotFound(step.path);
        } else {
          PermissionRecord next = *perm;
          next.mode = static_cast<uint16_t>((perm->mode & kTypeMask) | (step.mode & kPermMask));
          auto reply = a->transport->Call(kServerAddress,
                                          SetPermissionRequest{it->second, next, a->cred});
          s = reply.ok() ? Expect<SetPermissionReply>(std::move(*reply)).status() : reply.status();
        }
      }
      uint64_t complete = Tick();
      {
        std::lock_guard<std::mutex> l(mu_);
        auto it = std::find_if(trace_.history.begin(), trace_.history.end(),
                               [&](const HistoryOp& h) { return h.id == id; });
        if (s.ok()) {
          it->complete_ts = complete;
        } else {
          trace_.history.erase(it);  // never applied
        }
      }
      Finish(entry, s, "");
      return;
    }
    default:
      Finish(entry, Status::InvalidArgument("not an actor op"), "");
  }
}

Status Harness::ExecuteLocal(const Step& step, size_t entry) {
  switch (step.kind) {
    case StepKind::kFlush:
      Flush();
      Finish(entry, Status::OK(), "");
      return Status::OK();
    case StepKind::kDump: {
      AdminDumpReply d = server_->AdminDump();
      std::ostringstream detail;
      detail << "epoch=" << d.invalidation_epoch << " round_active=" << d.round_active
             << " awaiting=" << d.awaiting_acks << " held=" << d.held_get_dirs;
      {
        std::lock_guard<std::mutex> l(mu_);
        trace_.dumps.push_back(std::move(d));
      }
      Finish(entry, Status::OK(), detail.str());
      return Status::OK();
    }
    case StepKind::kDeliverInvalidation:
    case StepKind::kDeliverAsync: {
      Actor* a = Find(step.actor);
      if (a == nullptr || !a->agent) return Status::InvalidArgument("no client " + step.actor);
      std::string client = SimNetwork::ClientAddress(a->id);
      Status s = step.kind == StepKind::kDeliverInvalidation
                     ? net_.DeliverNext(kServerAddress, client)
                     : net_.DeliverNext(client, kServerAddress);
      Quiesce();
      Finish(entry, s, "");
      return Status::OK();
    }
    default:
      return Status::InvalidArgument("not a local step");
  }
}

Status Harness::Execute(const Step& step) {
  size_t entry = AddEntry(step);
  bool actor_op = step.kind == StepKind::kOpen || step.kind == StepKind::kRead ||
                  step.kind == StepKind::kWrite || step.kind == StepKind::kClose ||
                  step.kind == StepKind::kChmod;
  if (actor_op) {
    Actor* a = Find(step.actor);
    if (a == nullptr) return Status::InvalidArgument("no actor " + step.actor);
    if (!a->agent && step.kind != StepKind::kChmod) {
      return Status::InvalidArgument("server actor only runs chmod and dump");
    }
    if (Busy(step.actor)) return Status::InvalidArgument(step.actor + " is blocked");
    Dispatch(a, [this, a, step, entry] { RunOp(a, step, entry); });
    Quiesce();
  } else {
    Status s = ExecuteLocal(step, entry);
    if (!s.ok()) return s;
  }

  if (step.expect) {
    std::lock_guard<std::mutex> l(mu_);
    const auto& e = trace_.entries[entry];
    std::string got = e.completed ? ResultName(e.result) : "PENDING";
    if (got != *step.expect) {
      trace_.violations.push_back("step " + std::to_string(entry) + " '" + e.text + "' got " + got);
    }
  }
  return Status::OK();
}

void Harness::Flush() {
  for (;;) {
    Quiesce();
    auto pending = net_.PendingMessages();
    if (pending.empty()) return;
    (void)net_.DeliverNext(pending.front().src, pending.front().dst);
  }
}

Result<Trace> Harness::Run(const std::vector<Step>& steps) {
  for (const auto& s : steps) {
    Status st = Execute(s);
    if (!st.ok()) {
      return Status::InvalidArgument("line " + std::to_string(s.line) + ": " + st.ToString());
    }
  }
  Flush();
  std::lock_guard<std::mutex> l(mu_);
  return trace_;
}

RandomResult RunRandomSchedule(uint64_t seed, const RandomOptions& options) {
  RandomResult out;
  auto created = Harness::Create(options.clients);
  if (!created.ok()) {
    out.status = created.status();
    return out;
  }
  Harness& h = **created;
  std::mt19937_64 rng(seed);
  auto pick = [&](size_t n) { return static_cast<size_t>(rng() % n); };

  const std::vector<std::string> files = {"/d/f0", "/d/f1", "/d/f2", "/e/g0"};
  const uint16_t file_modes[] = {0600, 0640, 0644, 0604, 0000};
  const uint16_t dir_modes[] = {0755, 0750, 0700, 0711, 0705};
  const OpenFlags flag_choices[] = {OpenFlags::ReadOnly(), OpenFlags::WriteOnly(),
                                    OpenFlags::ReadWrite()};

  for (int i = 0; i < options.steps; i++) {
    std::vector<std::pair<int, Step>> candidates;
    auto add = [&](int weight, Step s) { candidates.emplace_back(weight, std::move(s)); };

    for (const auto& c : h.Clients()) {
      if (h.PendingPushes(c) > 0) {
        Step s;
        s.actor = c;
        s.kind = StepKind::kDeliverInvalidation;
        add(3, s);
      }
      if (h.PendingAsync(c) > 0) {
        Step s;
        s.actor = c;
        s.kind = StepKind::kDeliverAsync;
        add(3, s);
      }
      if (h.Busy(c)) continue;
      Step open;
      open.actor = c;
      open.kind = StepKind::kOpen;
      open.path = files[pick(files.size())];
      open.flags = flag_choices[pick(3)];
      add(4, open);
      auto handles = h.Handles(c);
      if (!handles.empty()) {
        const std::string& hd = handles[pick(handles.size())];
        Step rd;
        rd.actor = c;
        rd.kind = StepKind::kRead;
        rd.handle = hd;
        rd.length = 16;
        add(2, rd);
        Step wr = rd;
        wr.kind = StepKind::kWrite;
        wr.data = "x" + std::to_string(i);
        add(2, wr);
        Step cl = rd;
        cl.kind = StepKind::kClose;
        add(1, cl);
      }
    }
    for (const std::string actor : {"server", "A"}) {
      if (h.Busy(actor)) continue;
      Step ch;
      ch.actor = actor;
      ch.kind = StepKind::kChmod;
      const auto& paths = Harness::Paths();
      ch.path = paths[pick(paths.size())];
      auto perm = h.PermissionAt(ch.path);
      bool dir = perm && perm->is_dir();
      ch.mode = dir ? dir_modes[pick(5)] : file_modes[pick(5)];
      add(actor == "server" ? 3 : 1, ch);
    }
    if (candidates.empty()) break;

    int total = 0;
    for (const auto& [w, s] : candidates) total += w;
    int r = static_cast<int>(rng() % static_cast<uint64_t>(total));
    size_t chosen = 0;
    while (r >= candidates[chosen].first) {
      r -= candidates[chosen].first;
      chosen++;
    }
    Step step = candidates[chosen].second;
    out.steps.push_back(step);
    Status s = h.Execute(step);
    if (!s.ok()) {
      out.status = s;
      break;
    }
  }
  h.Flush();
  out.trace = h.trace();
  out.verdict = CheckLinearizable(out.trace.history, h.InitialModel());
  return out;
}

}  // namespace buffetfs
