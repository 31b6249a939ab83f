#include "buffetfs/bench.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "buffetfs/baseline.h"
#include "buffetfs/server.h"
#include "buffetfs/sim_network.h"
#include "buffetfs/socket_transport.h"
#include "json.hpp"

namespace buffetfs {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kSampling = "uniform-with-repetition";
constexpr const char* kSimServerAddress = "bserver:1";
constexpr ClientId kPopulatorId = 1;
constexpr ClientId kProbeId = 2;

uint64_t SplitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::string Pad(uint64_t v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
  return s;
}

std::string Hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string FormatDouble(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, p);
}

double PsToUs(int64_t ps) { return static_cast<double>(ps) / 1e6; }

// The server and network a benchmark runs against.
class Cluster {
 public:
  static Result<std::unique_ptr<Cluster>> Make(const BenchConfig& config) {
    std::unique_ptr<Cluster> c(new Cluster());
    c->kind_ = config.transport;
    ServerOptions so;
    so.root_perm = PermissionRecord{kBenchCred.uid, kBenchCred.gid,
                                    static_cast<uint16_t>(kTypeDirectory | 0755)};
    so.persist_root = config.persist_root;
    if (config.transport == TransportKind::kSim) {
      c->net_ = std::make_unique<SimNetwork>(SimOptions{config.latency, true});
      auto server = Server::Create(so, c->net_->NotifierFor(kSimServerAddress));
      if (!server.ok()) return server.status();
      c->server_ = std::move(*server);
      c->net_->AttachServer(kSimServerAddress, c->server_.get());
      c->address_ = kSimServerAddress;
    } else if (config.server_address.empty()) {
      auto server = Server::Create(so, nullptr);
      if (!server.ok()) return server.status();
      c->server_ = std::move(*server);
      std::string host;
      uint16_t port;
      Status s = ParseAddress(config.listen_address, &host, &port);
      if (!s.ok()) return s;
      auto listener = SocketServer::Listen(host, port, c->server_.get());
      if (!listener.ok()) return listener.status();
      c->listener_ = std::move(*listener);
      c->server_->SetNotifier(c->listener_.get());
      c->address_ = c->listener_->address();
    } else {
      c->address_ = config.server_address;
    }
    // Learn the serving incarnation the same way any client would.
    auto probe = c->Connect(kProbeId);
    auto reply = probe->Call(c->address_, AdminDumpRequest{});
    if (!reply.ok()) return reply.status();
    auto dump = Expect<AdminDumpReply>(std::move(*reply));
    if (!dump.ok()) return dump.status();
    c->config_.AddServer(dump->host_id, dump->version, c->address_);
    c->config_.SetHome(dump->host_id, dump->version);
    return c;
  }

  ~Cluster() {
    if (listener_) listener_->Stop();
    if (net_) net_->Drain();
  }

  std::unique_ptr<Transport> Connect(ClientId id) {
    if (net_) return net_->Connect(id);
    return std::make_unique<SocketTransport>(id);
  }

  const ClusterConfig& config() const { return config_; }
  const std::string& address() const { return address_; }

 private:
  Cluster() = default;

  TransportKind kind_ = TransportKind::kSim;
  std::unique_ptr<SimNetwork> net_;
  std::unique_ptr<Server> server_;
  std::unique_ptr<SocketServer> listener_;
  std::string address_;
  ClusterConfig config_;
};

// Clients of one kind for a set of workers.
struct ClientSet {
  std::vector<std::unique_ptr<Transport>> transports;
  std::vector<std::unique_ptr<Agent>> agents;
  std::vector<std::unique_ptr<FileClient>> per_worker;

  void Drain() {
    for (auto& t : transports) t->Drain();
  }
};

ClientSet MakeClients(Cluster& cluster, ClientKind kind, uint32_t workers, bool agent_per_worker,
                      uint32_t dom_threshold, ClientId base_id) {
  ClientSet set;
  size_t ntransports = agent_per_worker ? workers : 1;
  for (size_t i = 0; i < ntransports; i++) {
    set.transports.push_back(cluster.Connect(base_id + static_cast<ClientId>(i)));
    if (kind == ClientKind::kBuffetFS) {
      set.agents.push_back(std::make_unique<Agent>(set.transports.back().get(), cluster.config()));
    }
  }
  for (uint32_t w = 0; w < workers; w++) {
    size_t t = agent_per_worker ? w : 0;
    if (kind == ClientKind::kBuffetFS) {
      set.per_worker.push_back(std::make_unique<AgentLib>(set.agents[t].get(), w + 1, kBenchCred));
    } else {
      BaselineMode mode = kind == ClientKind::kBaselineDom ? BaselineMode::kDom : BaselineMode::kNormal;
      set.per_worker.push_back(std::make_unique<BaselineClient>(
          set.transports[t].get(), cluster.config(), mode, kBenchCred, dom_threshold));
    }
  }
  return set;
}

struct WorkerResult {
  Flow flow;
  int64_t open_ps = 0;
  int64_t data_ps = 0;
  int64_t close_ps = 0;
  uint64_t files = 0;
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
  uint64_t hash = 0;
  Status status;
};

// One open + read-or-write + close, charged to the worker's flow.
Status AccessOne(FileClient* fc, const Manifest& m, WorkloadOp op, uint64_t index, WorkerResult* r) {
  ScopedFlow bind(&r->flow);
  const std::string& path = m.files[index];
  Bytes expect = FileContent(m.seed, index, m.file_size);
  int64_t t0 = r->flow.counters.elapsed_ps;
  auto fd = fc->Open(path, op == WorkloadOp::kRead ? OpenFlags::ReadOnly() : OpenFlags::WriteOnly());
  if (!fd.ok()) return fd.status();
  int64_t t1 = r->flow.counters.elapsed_ps;
  if (op == WorkloadOp::kRead) {
    auto data = fc->Read(*fd, static_cast<uint32_t>(m.file_size));
    if (!data.ok()) return data.status();
    r->bytes_read += data->size();
    r->hash += Fnv1a(*data);
    if (*data != expect) {
      fc->Close(*fd);
      return Status::Verification("content mismatch in " + path);
    }
  } else {
    auto n = fc->Write(*fd, expect);
    if (!n.ok()) return n.status();
    r->bytes_written += *n;
    r->hash += Fnv1a(expect);
  }
  int64_t t2 = r->flow.counters.elapsed_ps;
  Status s = fc->Close(*fd);
  if (!s.ok()) return s;
  int64_t t3 = r->flow.counters.elapsed_ps;
  r->open_ps += t1 - t0;
  r->data_ps += t2 - t1;
  r->close_ps += t3 - t2;
  r->files++;
  return Status::OK();
}

void Prewarm(ClientSet& set, const Manifest& m, uint64_t fanout) {
  for (auto& agent : set.agents) {
    for (size_t d = 0; d < m.dirs.size(); d++) {
      uint64_t first = d * fanout;
      if (first < m.files.size()) agent->Resolve(m.files[first]);
    }
  }
}

KindReport Aggregate(ClientKind kind, const std::string& variant, WorkloadOp op,
                     std::vector<WorkerResult>& results, double wall_us, bool wall) {
  KindReport k;
  k.client_kind = ClientKindName(kind);
  k.variant = variant;
  k.workers = static_cast<uint32_t>(results.size());
  RpcCounters total;
  uint64_t hash = 0;
  int64_t makespan = 0;
  for (auto& r : results) {
    total.Add(r.flow.counters);
    k.files_accessed += r.files;
    k.bytes_read += r.bytes_read;
    k.bytes_written += r.bytes_written;
    k.open_us += PsToUs(r.open_ps);
    if (op == WorkloadOp::kRead) {
      k.read_us += PsToUs(r.data_ps);
    } else {
      k.write_us += PsToUs(r.data_ps);
    }
    k.close_us += PsToUs(r.close_ps);
    hash += r.hash;
    makespan = std::max(makespan, r.flow.counters.elapsed_ps);
    if (r.status.code() == Code::kVerification) k.verified = false;
  }
  k.sync_rpcs = total.sync_rpcs;
  k.async_msgs = total.async_msgs;
  k.metadata_rpcs = total.count(GetDirRequest::kTag) + total.count(CreateRequest::kTag) +
                    total.count(BaselineOpenRequest::kTag);
  k.bytes_sent = total.bytes_sent;
  k.bytes_received = total.bytes_received;
  k.elapsed_us = PsToUs(total.elapsed_ps);
  k.makespan_us = wall ? wall_us : PsToUs(makespan);
  k.content_hash = Hex64(hash);
  return k;
}

Status FirstError(const std::vector<WorkerResult>& results) {
  for (const auto& r : results) {
    if (!r.status.ok()) return r.status;
  }
  return Status::OK();
}

Status RunSingle(Cluster& cluster, const BenchConfig& config, const Manifest& m, ClientKind kind,
                 ClientId base_id, BenchReport* report) {
  ClientSet set = MakeClients(cluster, kind, 1, false, config.dom_threshold, base_id);
  bool wall = config.transport == TransportKind::kSocket;
  for (const char* variant : {"cold", "warm"}) {
    std::vector<WorkerResult> results(1);
    auto start = std::chrono::steady_clock::now();
    results[0].status = AccessOne(set.per_worker[0].get(), m, config.op, 0, &results[0]);
    double wall_us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
    set.Drain();
    report->kinds.push_back(Aggregate(kind, variant, config.op, results, wall_us, wall));
    Status s = FirstError(results);
    if (!s.ok()) return s;
  }
  return Status::OK();
}

Status RunConcurrent(Cluster& cluster, const BenchConfig& config, const Manifest& m,
                     ClientKind kind, ClientId base_id, BenchReport* report) {
  ClientSet set = MakeClients(cluster, kind, config.workers, config.agent_per_worker,
                              config.dom_threshold, base_id);
  if (config.warm) Prewarm(set, m, config.dir_fanout);
  set.Drain();

  // Access sequences depend only on (seed, worker).
  std::vector<std::vector<uint64_t>> picks(config.workers);
  for (uint32_t w = 0; w < config.workers; w++) {
    std::mt19937_64 rng(SplitMix64(config.seed * 0x100000001B3ull + w));
    for (uint64_t i = 0; i < config.files_per_worker; i++) picks[w].push_back(rng() % m.files.size());
  }

  std::vector<WorkerResult> results(config.workers);
  auto start = std::chrono::steady_clock::now();
  bool sequential = config.transport == TransportKind::kSim && config.lockstep;
  if (sequential) {
    for (uint64_t i = 0; i < config.files_per_worker; i++) {
      for (uint32_t w = 0; w < config.workers; w++) {
        if (!results[w].status.ok()) continue;
        results[w].status = AccessOne(set.per_worker[w].get(), m, config.op, picks[w][i], &results[w]);
      }
    }
  } else {
    std::vector<std::thread> threads;
    for (uint32_t w = 0; w < config.workers; w++) {
      threads.emplace_back([&, w] {
        for (uint64_t idx : picks[w]) {
          results[w].status = AccessOne(set.per_worker[w].get(), m, config.op, idx, &results[w]);
          if (!results[w].status.ok()) return;
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  double wall_us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  set.Drain();
  report->kinds.push_back(Aggregate(kind, config.warm ? "warm" : "cold", config.op, results, wall_us,
                                    config.transport == TransportKind::kSocket));
  return FirstError(results);
}

Status PopulateCluster(Cluster& cluster, const Manifest& m) {
  auto t = cluster.Connect(kPopulatorId);
  Agent agent(t.get(), cluster.config());
  Status s = Populate(&agent, m);
  t->Drain();
  return s;
}

template <typename T>
Status Assign(Result<T> r, T* out) {
  if (!r.ok()) return r.status();
  *out = *r;
  return Status::OK();
}

}  // namespace

const char* ScenarioName(Scenario s) {
  return s == Scenario::kSingleFile ? "single-file" : "concurrent";
}

const char* ClientKindName(ClientKind k) {
  switch (k) {
    case ClientKind::kBuffetFS: return "buffetfs";
    case ClientKind::kBaselineNormal: return "baseline-normal";
    case ClientKind::kBaselineDom: return "baseline-dom";
  }
  return "?";
}

const char* TransportKindName(TransportKind t) { return t == TransportKind::kSim ? "sim" : "socket"; }

const char* WorkloadOpName(WorkloadOp op) { return op == WorkloadOp::kRead ? "read" : "write"; }

Result<ClientKind> ParseClientKind(const std::string& s) {
  if (s == "buffetfs") return ClientKind::kBuffetFS;
  if (s == "baseline-normal") return ClientKind::kBaselineNormal;
  if (s == "baseline-dom") return ClientKind::kBaselineDom;
  return Status::InvalidArgument("unknown client_kind: " + s);
}

Result<ReportFormat> ParseReportFormat(const std::string& s) {
  if (s == "text") return ReportFormat::kText;
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  return Status::InvalidArgument("unknown format: " + s);
}

Result<BenchConfig> BenchConfig::FromKv(const KvConfig& kv) {
  static const std::set<std::string> kKnown = {
      "scenario", "client_kind", "file_count", "file_size_bytes", "files_per_worker", "workers",
      "dir_fanout", "rtt_us", "per_byte_us", "service_us", "seed", "transport", "op", "warm",
      "agent_per_worker", "lockstep", "dom_threshold", "populate", "server_address",
      "listen_address", "persist_root"};
  for (const auto& [k, v] : kv.values()) {
    if (kKnown.count(k) == 0) return Status::InvalidArgument("unknown config key: " + k);
  }
  BenchConfig c;
  std::string scenario = kv.GetString("scenario", "concurrent");
  if (scenario == "single-file" || scenario == "single_file") {
    c.scenario = Scenario::kSingleFile;
  } else if (scenario == "concurrent") {
    c.scenario = Scenario::kConcurrent;
  } else {
    return Status::InvalidArgument("unknown scenario: " + scenario);
  }
  if (kv.Has("client_kind")) {
    c.client_kinds.clear();
    std::stringstream ss(kv.GetString("client_kind"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(' '));
      item.erase(item.find_last_not_of(' ') + 1);
      auto k = ParseClientKind(item);
      if (!k.ok()) return k.status();
      c.client_kinds.push_back(*k);
    }
  }
  std::string transport = kv.GetString("transport", "sim");
  if (transport == "sim") {
    c.transport = TransportKind::kSim;
  } else if (transport == "socket") {
    c.transport = TransportKind::kSocket;
  } else {
    return Status::InvalidArgument("unknown transport: " + transport);
  }
  std::string op = kv.GetString("op", "read");
  if (op == "read") {
    c.op = WorkloadOp::kRead;
  } else if (op == "write") {
    c.op = WorkloadOp::kWrite;
  } else {
    return Status::InvalidArgument("unknown op: " + op);
  }
  uint64_t workers = c.workers, fanout = c.dir_fanout, dom = c.dom_threshold;
  Status s;
  if (s.ok()) s = Assign(kv.GetUint("file_count", c.file_count), &c.file_count);
  if (s.ok()) s = Assign(kv.GetUint("file_size_bytes", c.file_size_bytes), &c.file_size_bytes);
  if (s.ok()) s = Assign(kv.GetUint("files_per_worker", c.files_per_worker), &c.files_per_worker);
  if (s.ok()) s = Assign(kv.GetUint("workers", workers), &workers);
  if (s.ok()) s = Assign(kv.GetUint("dir_fanout", fanout), &fanout);
  if (s.ok()) s = Assign(kv.GetUint("dom_threshold", dom), &dom);
  if (s.ok()) s = Assign(kv.GetUint("seed", c.seed), &c.seed);
  if (s.ok()) s = Assign(kv.GetDouble("rtt_us", c.latency.rtt_us), &c.latency.rtt_us);
  if (s.ok()) s = Assign(kv.GetDouble("per_byte_us", c.latency.per_byte_us), &c.latency.per_byte_us);
  if (s.ok()) s = Assign(kv.GetDouble("service_us", c.latency.service_us), &c.latency.service_us);
  if (s.ok()) s = Assign(kv.GetBool("warm", c.warm), &c.warm);
  if (s.ok()) s = Assign(kv.GetBool("agent_per_worker", c.agent_per_worker), &c.agent_per_worker);
  if (s.ok()) s = Assign(kv.GetBool("lockstep", c.lockstep), &c.lockstep);
  if (s.ok()) s = Assign(kv.GetBool("populate", c.populate), &c.populate);
  if (!s.ok()) return s;
  if (workers > 1024 || fanout > 0xFFFFFFFFu || dom > 0xFFFFFFFFu) {
    return Status::InvalidArgument("workers, dir_fanout or dom_threshold out of range");
  }
  c.workers = static_cast<uint32_t>(workers);
  c.dir_fanout = static_cast<uint32_t>(fanout);
  c.dom_threshold = static_cast<uint32_t>(dom);
  c.server_address = kv.GetString("server_address");
  c.listen_address = kv.GetString("listen_address", c.listen_address);
  c.persist_root = kv.GetString("persist_root");
  s = c.Validate();
  if (!s.ok()) return s;
  return c;
}

Status BenchConfig::Validate() const {
  if (client_kinds.empty()) return Status::InvalidArgument("no client_kind");
  if (file_count == 0) return Status::InvalidArgument("file_count must be positive");
  if (dir_fanout == 0) return Status::InvalidArgument("dir_fanout must be positive");
  if (file_size_bytes > 0xFFFFFFFFu) return Status::InvalidArgument("file_size_bytes too large");
  if (files_per_worker > file_count) {
    return Status::InvalidArgument("files_per_worker exceeds file_count");
  }
  if (scenario == Scenario::kConcurrent && workers == 0) {
    return Status::InvalidArgument("workers must be positive");
  }
  if (!latency.Valid()) return Status::InvalidArgument("negative latency parameter");
  if (transport == TransportKind::kSim && !server_address.empty()) {
    return Status::InvalidArgument("server_address needs transport = socket");
  }
  return Status::OK();
}

Manifest BuildManifest(const BenchConfig& config) {
  Manifest m;
  m.file_size = config.file_size_bytes;
  m.seed = config.seed;
  uint64_t ndirs = (config.file_count + config.dir_fanout - 1) / config.dir_fanout;
  for (uint64_t d = 0; d < ndirs; d++) m.dirs.push_back("/d" + Pad(d, 4));
  for (uint64_t i = 0; i < config.file_count; i++) {
    m.files.push_back(m.dirs[i / config.dir_fanout] + "/f" + Pad(i, 6));
  }
  return m;
}

Bytes FileContent(uint64_t seed, uint64_t index, uint64_t size) {
  Bytes out(size);
  uint64_t x = SplitMix64(seed ^ SplitMix64(index)) | 1;
  for (uint64_t i = 0; i < size; i += 8) {
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    uint64_t v = x * 0x2545F4914F6CDD1Dull;
    for (uint64_t b = 0; b < 8 && i + b < size; b++) out[i + b] = static_cast<uint8_t>(v >> (8 * b));
  }
  return out;
}

uint64_t Fnv1a(std::span<const uint8_t> data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

Status Populate(Agent* agent, const Manifest& m) {
  auto root = agent->Readdir(kBenchCred, "/");
  if (!root.ok()) return root.status();
  if (!root->empty()) return Status::Exists("server namespace is not empty");
  for (const auto& d : m.dirs) {
    Status s = agent->Mkdir(kBenchCred, d, 0755);
    if (!s.ok()) return s;
  }
  OpenFlags create{AccessMode::kWriteOnly, true, false};
  for (size_t i = 0; i < m.files.size(); i++) {
    auto fd = agent->Open(1, kBenchCred, m.files[i], create, 0644);
    if (!fd.ok()) return fd.status();
    Bytes content = FileContent(m.seed, i, m.file_size);
    if (!content.empty()) {
      auto n = agent->Write(1, *fd, content);
      if (!n.ok()) return n.status();
    }
    Status s = agent->Close(1, *fd);
    if (!s.ok()) return s;
  }
  return Status::OK();
}

const KindReport* BenchReport::Find(const std::string& kind, const std::string& variant) const {
  for (const auto& k : kinds) {
    if (k.client_kind == kind && (variant.empty() || k.variant == variant)) return &k;
  }
  return nullptr;
}

Result<Manifest> RunPopulate(const BenchConfig& config) {
  Status s = config.Validate();
  if (!s.ok()) return s;
  auto cluster = Cluster::Make(config);
  if (!cluster.ok()) return cluster.status();
  Manifest m = BuildManifest(config);
  s = PopulateCluster(**cluster, m);
  if (!s.ok()) return s;
  return m;
}

Status Serve(const BenchConfig& config, const std::function<void(const std::string&)>& on_ready,
             const std::atomic<bool>& stop) {
  BenchConfig c = config;
  c.transport = TransportKind::kSocket;
  c.server_address.clear();
  Status s = c.Validate();
  if (!s.ok()) return s;
  auto cluster = Cluster::Make(c);
  if (!cluster.ok()) return cluster.status();
  if (c.populate) {
    s = PopulateCluster(**cluster, BuildManifest(c));
    // A persisted namespace from an earlier run is served as is.
    if (!s.ok() && s.code() != Code::kExists) return s;
  }
  on_ready((*cluster)->address());
  while (!stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  return Status::OK();
}

BenchOutcome RunBench(const BenchConfig& config) {
  BenchOutcome out;
  BenchReport& r = out.report;
  r.scenario = ScenarioName(config.scenario);
  r.transport = TransportKindName(config.transport);
  r.op = WorkloadOpName(config.op);
  r.sampling = kSampling;
  r.seed = config.seed;
  r.file_count = config.file_count;
  r.file_size_bytes = config.file_size_bytes;
  r.files_per_worker = config.scenario == Scenario::kSingleFile ? 1 : config.files_per_worker;
  r.workers = config.scenario == Scenario::kSingleFile ? 1 : config.workers;
  out.status = config.Validate();
  if (!out.status.ok()) return out;

  auto cluster = Cluster::Make(config);
  if (!cluster.ok()) {
    out.status = cluster.status();
    return out;
  }
  Manifest m = BuildManifest(config);
  if (config.populate) {
    out.status = PopulateCluster(**cluster, m);
    if (!out.status.ok()) return out;
  }
  ClientId base = 100;
  for (ClientKind kind : config.client_kinds) {
    Status s = config.scenario == Scenario::kSingleFile
                   ? RunSingle(**cluster, config, m, kind, base, &r)
                   : RunConcurrent(**cluster, config, m, kind, base, &r);
    base += 2000;
    if (!s.ok() && out.status.ok()) out.status = s;
    if (!s.ok() && s.code() != Code::kVerification) break;
  }
  return out;
}

// ---------------------------------------------------------------- formats

namespace {

ordered_json KindToJson(const KindReport& k) {
  ordered_json j;
  j["client_kind"] = k.client_kind;
  j["variant"] = k.variant;
  j["workers"] = k.workers;
  j["files_accessed"] = k.files_accessed;
  j["sync_rpcs"] = k.sync_rpcs;
  j["async_msgs"] = k.async_msgs;
  j["metadata_rpcs"] = k.metadata_rpcs;
  j["bytes_sent"] = k.bytes_sent;
  j["bytes_received"] = k.bytes_received;
  j["bytes_read"] = k.bytes_read;
  j["bytes_written"] = k.bytes_written;
  j["elapsed_us"] = k.elapsed_us;
  j["makespan_us"] = k.makespan_us;
  j["latency_us"] = {{"open", k.open_us}, {"read", k.read_us}, {"write", k.write_us},
                     {"close", k.close_us}};
  j["content_hash"] = k.content_hash;
  j["verified"] = k.verified;
  return j;
}

KindReport KindFromJson(const ordered_json& j) {
  KindReport k;
  k.client_kind = j.at("client_kind").get<std::string>();
  k.variant = j.at("variant").get<std::string>();
  k.workers = j.at("workers").get<uint32_t>();
  k.files_accessed = j.at("files_accessed").get<uint64_t>();
  k.sync_rpcs = j.at("sync_rpcs").get<uint64_t>();
  k.async_msgs = j.at("async_msgs").get<uint64_t>();
  k.metadata_rpcs = j.at("metadata_rpcs").get<uint64_t>();
  k.bytes_sent = j.at("bytes_sent").get<uint64_t>();
  k.bytes_received = j.at("bytes_received").get<uint64_t>();
  k.bytes_read = j.at("bytes_read").get<uint64_t>();
  k.bytes_written = j.at("bytes_written").get<uint64_t>();
  k.elapsed_us = j.at("elapsed_us").get<double>();
  k.makespan_us = j.at("makespan_us").get<double>();
  const auto& lat = j.at("latency_us");
  k.open_us = lat.at("open").get<double>();
  k.read_us = lat.at("read").get<double>();
  k.write_us = lat.at("write").get<double>();
  k.close_us = lat.at("close").get<double>();
  k.content_hash = j.at("content_hash").get<std::string>();
  k.verified = j.at("verified").get<bool>();
  return k;
}

std::string Json(const BenchReport& r) {
  ordered_json j;
  j["scenario"] = r.scenario;
  j["transport"] = r.transport;
  j["op"] = r.op;
  j["sampling"] = r.sampling;
  j["seed"] = r.seed;
  j["file_count"] = r.file_count;
  j["file_size_bytes"] = r.file_size_bytes;
  j["files_per_worker"] = r.files_per_worker;
  j["workers"] = r.workers;
  j["kinds"] = ordered_json::array();
  for (const auto& k : r.kinds) j["kinds"].push_back(KindToJson(k));
  return j.dump(2) + "\n";
}

std::string Text(const BenchReport& r) {
  std::ostringstream out;
  out << "scenario " << r.scenario << "  transport " << r.transport << "  op " << r.op
      << "  seed " << r.seed << "\n";
  out << "files " << r.file_count << " x " << r.file_size_bytes << " B  workers " << r.workers
      << " x " << r.files_per_worker << " (" << r.sampling << ")\n";
  char line[512];
  std::snprintf(line, sizeof(line), "%-16s %-5s %8s %9s %7s %7s %14s %12s %12s %12s %12s  %s\n",
                "client", "cache", "files", "sync_rpcs", "async", "meta", "elapsed_us", "open_us",
                "read_us", "write_us", "close_us", "hash");
  out << line;
  for (const auto& k : r.kinds) {
    std::snprintf(line, sizeof(line),
                  "%-16s %-5s %8llu %9llu %7llu %7llu %14.3f %12.3f %12.3f %12.3f %12.3f  %s%s\n",
                  k.client_kind.c_str(), k.variant.c_str(),
                  static_cast<unsigned long long>(k.files_accessed),
                  static_cast<unsigned long long>(k.sync_rpcs),
                  static_cast<unsigned long long>(k.async_msgs),
                  static_cast<unsigned long long>(k.metadata_rpcs), k.elapsed_us, k.open_us,
                  k.read_us, k.write_us, k.close_us, k.content_hash.c_str(),
                  k.verified ? "" : "  VERIFICATION FAILED");
    out << line;
  }
  return out.str();
}

std::string Csv(const BenchReport& r) {
  std::ostringstream out;
  const auto& cols = CsvColumns();
  for (size_t i = 0; i < cols.size(); i++) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const auto& k : r.kinds) {
    std::vector<std::string> v = {
        r.scenario, r.transport, r.op, r.sampling, std::to_string(r.seed),
        std::to_string(r.file_count), std::to_string(r.file_size_bytes),
        std::to_string(r.files_per_worker), std::to_string(r.workers), k.client_kind, k.variant,
        std::to_string(k.workers), std::to_string(k.files_accessed), std::to_string(k.sync_rpcs),
        std::to_string(k.async_msgs), std::to_string(k.metadata_rpcs),
        std::to_string(k.bytes_sent), std::to_string(k.bytes_received),
        std::to_string(k.bytes_read), std::to_string(k.bytes_written), FormatDouble(k.elapsed_us),
        FormatDouble(k.makespan_us), FormatDouble(k.open_us), FormatDouble(k.read_us),
        FormatDouble(k.write_us), FormatDouble(k.close_us), k.content_hash,
        k.verified ? "true" : "false"};
    for (size_t i = 0; i < v.size(); i++) out << (i ? "," : "") << v[i];
    out << "\n";
  }
  return out.str();
}

template <typename T>
bool ParseNum(const std::string& s, T* out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

}  // namespace

const std::vector<std::string>& CsvColumns() {
  static const std::vector<std::string> kColumns = {
      "scenario",       "transport",   "op",           "sampling",      "seed",
      "file_count",     "file_size_bytes", "files_per_worker", "run_workers", "client_kind",
      "variant",        "workers",     "files_accessed", "sync_rpcs",   "async_msgs",
      "metadata_rpcs",  "bytes_sent",  "bytes_received", "bytes_read",  "bytes_written",
      "elapsed_us",     "makespan_us", "open_us",      "read_us",       "write_us",
      "close_us",       "content_hash", "verified"};
  return kColumns;
}

std::string FormatReport(const BenchReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kText: return Text(report);
    case ReportFormat::kCsv: return Csv(report);
    case ReportFormat::kJson: return Json(report);
  }
  return "";
}

Result<BenchReport> ParseJsonReport(const std::string& text) {
  try {
    auto j = ordered_json::parse(text);
    BenchReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.transport = j.at("transport").get<std::string>();
    r.op = j.at("op").get<std::string>();
    r.sampling = j.at("sampling").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.file_count = j.at("file_count").get<uint64_t>();
    r.file_size_bytes = j.at("file_size_bytes").get<uint64_t>();
    r.files_per_worker = j.at("files_per_worker").get<uint64_t>();
    r.workers = j.at("workers").get<uint32_t>();
    for (const auto& k : j.at("kinds")) r.kinds.push_back(KindFromJson(k));
    return r;
  } catch (const std::exception& e) {
    return Status::Corruption(std::string("bad report: ") + e.what());
  }
}

Result<BenchReport> ParseCsvReport(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return Status::Corruption("empty csv");
  const auto& cols = CsvColumns();
  std::string header;
  for (size_t i = 0; i < cols.size(); i++) header += (i ? "," : "") + cols[i];
  if (line != header) return Status::Corruption("unexpected csv header");
  BenchReport r;
  int row = 1;
  while (std::getline(in, line)) {
    row++;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.push_back("");
    if (f.size() != cols.size()) return Status::Corruption("row " + std::to_string(row) + ": wrong column count");
    KindReport k;
    bool ok = true;
    r.scenario = f[0];
    r.transport = f[1];
    r.op = f[2];
    r.sampling = f[3];
    ok &= ParseNum(f[4], &r.seed);
    ok &= ParseNum(f[5], &r.file_count);
    ok &= ParseNum(f[6], &r.file_size_bytes);
    ok &= ParseNum(f[7], &r.files_per_worker);
    ok &= ParseNum(f[8], &r.workers);
    k.client_kind = f[9];
    k.variant = f[10];
    ok &= ParseNum(f[11], &k.workers);
    ok &= ParseNum(f[12], &k.files_accessed);
    ok &= ParseNum(f[13], &k.sync_rpcs);
    ok &= ParseNum(f[14], &k.async_msgs);
    ok &= ParseNum(f[15], &k.metadata_rpcs);
    ok &= ParseNum(f[16], &k.bytes_sent);
    ok &= ParseNum(f[17], &k.bytes_received);
    ok &= ParseNum(f[18], &k.bytes_read);
    ok &= ParseNum(f[19], &k.bytes_written);
    ok &= ParseNum(f[20], &k.elapsed_us);
    ok &= ParseNum(f[21], &k.makespan_us);
    ok &= ParseNum(f[22], &k.open_us);
    ok &= ParseNum(f[23], &k.read_us);
    ok &= ParseNum(f[24], &k.write_us);
    ok &= ParseNum(f[25], &k.close_us);
    k.content_hash = f[26];
    if (f[27] != "true" && f[27] != "false") ok = false;
    k.verified = f[27] == "true";
    if (!ok) return Status::Corruption("row " + std::to_string(row) + ": bad field");
    r.kinds.push_back(std::move(k));
  }
  return r;
}

std::string CompareReports(const BenchReport& a, const BenchReport& b) {
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof(line), "%-16s %-5s %12s %12s %14s %14s %8s  %s\n", "client", "cache",
                "sync_a", "sync_b", "elapsed_a_us", "elapsed_b_us", "b/a", "hash");
  out << line;
  for (const auto& ka : a.kinds) {
    const KindReport* kb = b.Find(ka.client_kind, ka.variant);
    if (kb == nullptr) {
      out << ka.client_kind << " " << ka.variant << ": missing from second report\n";
      continue;
    }
    double ratio = ka.elapsed_us > 0 ? kb->elapsed_us / ka.elapsed_us : 0;
    std::snprintf(line, sizeof(line), "%-16s %-5s %12llu %12llu %14.3f %14.3f %8.3f  %s\n",
                  ka.client_kind.c_str(), ka.variant.c_str(),
                  static_cast<unsigned long long>(ka.sync_rpcs),
                  static_cast<unsigned long long>(kb->sync_rpcs), ka.elapsed_us, kb->elapsed_us,
                  ratio, ka.content_hash == kb->content_hash ? "same" : "DIFFERENT");
    out << line;
  }
  for (const auto& kb : b.kinds) {
    if (a.Find(kb.client_kind, kb.variant) == nullptr) {
      out << kb.client_kind << " " << kb.variant << ": missing from first report\n";
    }
  }
  return out.str();
}

}  // namespace buffetfs
