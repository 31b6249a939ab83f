#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "buffetfs/agent.h"
#include "buffetfs/kv_config.h"
#include "buffetfs/transport.h"

namespace buffetfs {

enum class Scenario : uint8_t { kSingleFile, kConcurrent };
enum class ClientKind : uint8_t { kBuffetFS, kBaselineNormal, kBaselineDom };
enum class TransportKind : uint8_t { kSim, kSocket };
enum class ReportFormat : uint8_t { kText, kCsv, kJson };
enum class WorkloadOp : uint8_t { kRead, kWrite };

const char* ScenarioName(Scenario s);
const char* ClientKindName(ClientKind k);
const char* TransportKindName(TransportKind t);
const char* WorkloadOpName(WorkloadOp op);
Result<ClientKind> ParseClientKind(const std::string& s);
Result<ReportFormat> ParseReportFormat(const std::string& s);

// Owner of every populated object.
constexpr Credentials kBenchCred{1000, 1000};

struct BenchConfig {
  Scenario scenario = Scenario::kConcurrent;
  std::vector<ClientKind> client_kinds{ClientKind::kBuffetFS};
  uint64_t file_count = 10000;
  uint64_t file_size_bytes = 4096;
  uint64_t files_per_worker = 100;
  uint32_t workers = 8;
  uint32_t dir_fanout = 100;
  LatencyModel latency{200, 0.01, 50};
  uint64_t seed = 1;
  TransportKind transport = TransportKind::kSim;
  WorkloadOp op = WorkloadOp::kRead;
  // Fetch every directory listing before the measured phase.
  bool warm = true;
  // One agent (and client id) per worker instead of one shared agent.
  bool agent_per_worker = false;
  // SIM only: run workers in fixed round-robin turns on one thread so
  // reports are reproducible. Off: real threads.
  bool lockstep = true;
  uint32_t dom_threshold = 64 * 1024;
  // Populate before running; off when an external server was populated.
  bool populate = true;
  // SOCKET only: use this server instead of starting one in-process.
  std::string server_address;
  std::string listen_address = "127.0.0.1:0";
  std::string persist_root;

  // Keys: scenario, client_kind (comma list), file_count, file_size_bytes,
  // files_per_worker, workers, dir_fanout, rtt_us, per_byte_us, service_us,
  // seed, transport, op, warm, agent_per_worker, lockstep, dom_threshold,
  // populate, server_address, listen_address, persist_root.
  static Result<BenchConfig> FromKv(const KvConfig& kv);
  Status Validate() const;
};

// Deterministic namespace layout: ceil(file_count / dir_fanout) directories
// "/dNNNN", each holding up to dir_fanout files "fNNNNNN".
struct Manifest {
  std::vector<std::string> dirs;
  std::vector<std::string> files;
  uint64_t file_size = 0;
  uint64_t seed = 0;

  bool operator==(const Manifest&) const = default;
};

Manifest BuildManifest(const BenchConfig& config);
// Content of file `index`, a pure function of (seed, index, size).
Bytes FileContent(uint64_t seed, uint64_t index, uint64_t size);
uint64_t Fnv1a(std::span<const uint8_t> data);

// Creates the manifest through `agent`. EXISTS if the root is not empty.
Status Populate(Agent* agent, const Manifest& manifest);

struct KindReport {
  std::string client_kind;
  std::string variant;  // "cold" or "warm"
  uint32_t workers = 0;
  uint64_t files_accessed = 0;
  uint64_t sync_rpcs = 0;
  uint64_t async_msgs = 0;
  uint64_t metadata_rpcs = 0;  // GetDir, Create and baseline opens
  uint64_t bytes_sent = 0;
  uint64_t bytes_received = 0;
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
  double elapsed_us = 0;   // summed over workers
  double makespan_us = 0;  // slowest worker (SIM) or phase wall time (SOCKET)
  double open_us = 0;
  double read_us = 0;
  double write_us = 0;
  double close_us = 0;
  std::string content_hash;
  bool verified = true;

  bool operator==(const KindReport&) const = default;
};

struct BenchReport {
  std::string scenario;
  std::string transport;
  std::string op;
  std::string sampling;
  uint64_t seed = 0;
  uint64_t file_count = 0;
  uint64_t file_size_bytes = 0;
  uint64_t files_per_worker = 0;
  uint32_t workers = 0;
  std::vector<KindReport> kinds;

  bool operator==(const BenchReport&) const = default;
  const KindReport* Find(const std::string& kind, const std::string& variant = "") const;
};

// Builds the cluster described by `config`, populates it when asked, and
// runs the scenario once per client kind. A content mismatch yields a report
// with verified=false and a VERIFICATION status.
struct BenchOutcome {
  Status status;
  BenchReport report;
};
BenchOutcome RunBench(const BenchConfig& config);

// Populates the configured server (SOCKET) or an in-process one, returning
// the manifest.
Result<Manifest> RunPopulate(const BenchConfig& config);

// Serves the namespace over TCP at config.listen_address, populating it first
// unless it already has content. Returns once `stop` is set.
Status Serve(const BenchConfig& config, const std::function<void(const std::string&)>& on_ready,
             const std::atomic<bool>& stop);

std::string FormatReport(const BenchReport& report, ReportFormat format);
Result<BenchReport> ParseJsonReport(const std::string& text);
Result<BenchReport> ParseCsvReport(const std::string& text);
// Column list of the CSV format, in order.
const std::vector<std::string>& CsvColumns();

// Side-by-side summary of two reports.
std::string CompareReports(const BenchReport& a, const BenchReport& b);

}  // namespace buffetfs
