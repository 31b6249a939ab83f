// Command-line driver for the benchmark: populate, run, compare, serve.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "buffetfs/bench.h"
#include "buffetfs/kv_config.h"

namespace {

using namespace buffetfs;

std::atomic<bool> g_stop{false};

void OnSignal(int) { g_stop.store(true); }

int Fail(const Status& s) {
  std::fprintf(stderr, "bench: %s\n", s.ToString().c_str());
  return s.code() == Code::kVerification ? 2 : 1;
}

Result<BenchConfig> LoadConfig(const std::string& path, const std::vector<std::string>& sets) {
  KvConfig kv;
  if (!path.empty()) {
    auto loaded = KvConfig::Load(path);
    if (!loaded.ok()) return loaded.status();
    kv = std::move(*loaded);
  }
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) return Status::InvalidArgument("--set wants key=value: " + s);
    kv.Set(s.substr(0, eq), s.substr(eq + 1));
  }
  return BenchConfig::FromKv(kv);
}

Result<BenchReport> LoadReport(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Status::NotFound(path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return ParseJsonReport(text);
  return ParseCsvReport(text);
}

Status WriteOut(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return Status::OK();
  }
  std::ofstream out(path);
  out << text;
  if (!out) return Status::IOError("cannot write " + path);
  return Status::OK();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BuffetFS benchmark driver"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_path;
  std::string format = "text";
  std::string a_path, b_path;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--set", sets, "override one key (key=value), repeatable");
  };

  auto* run = app.add_subcommand("run", "run the configured scenario and print a report");
  add_config(run);
  run->add_option("--out", out_path, "report destination (default stdout)");
  run->add_option("--format", format, "text, csv or json")
      ->check(CLI::IsMember({"text", "csv", "json"}));

  auto* populate = app.add_subcommand("populate", "create the file tree (persist_root to keep it)");
  add_config(populate);

  auto* compare = app.add_subcommand("compare", "compare two saved reports (csv or json)");
  compare->add_option("--a", a_path, "first report")->required();
  compare->add_option("--b", b_path, "second report")->required();

  auto* serve = app.add_subcommand("serve", "serve the namespace over TCP until interrupted");
  add_config(serve);

  CLI11_PARSE(app, argc, argv);

  if (*compare) {
    auto a = LoadReport(a_path);
    if (!a.ok()) return Fail(a.status());
    auto b = LoadReport(b_path);
    if (!b.ok()) return Fail(b.status());
    std::cout << CompareReports(*a, *b);
    return 0;
  }

  auto config = LoadConfig(config_path, sets);
  if (!config.ok()) return Fail(config.status());

  if (*populate) {
    auto m = RunPopulate(*config);
    if (!m.ok()) return Fail(m.status());
    std::printf("populated %zu directories, %zu files of %llu bytes\n", m->dirs.size(),
                m->files.size(), static_cast<unsigned long long>(m->file_size));
    return 0;
  }

  if (*serve) {
    std::signal(SIGINT, OnSignal);
    std::signal(SIGTERM, OnSignal);
    Status s = Serve(
        *config,
        [](const std::string& address) {
          std::printf("serving on %s\n", address.c_str());
          std::fflush(stdout);
        },
        g_stop);
    return s.ok() ? 0 : Fail(s);
  }

  auto fmt = ParseReportFormat(format);
  if (!fmt.ok()) return Fail(fmt.status());
  BenchOutcome outcome = RunBench(*config);
  if (!outcome.status.ok() && outcome.status.code() != Code::kVerification) {
    return Fail(outcome.status);
  }
  Status w = WriteOut(out_path, FormatReport(outcome.report, *fmt));
  if (!w.ok()) return Fail(w);
  if (!outcome.status.ok()) return Fail(outcome.status);
  return 0;
}
