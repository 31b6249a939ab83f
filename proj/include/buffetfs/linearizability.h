#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "buffetfs/types.h"

namespace buffetfs {

// Single-node reference for permission decisions over a fixed set of paths.
struct PermModel {
  std::map<std::string, PermissionRecord> perms;  // "/" included

  // Open admission: EXEC on every ancestor directory, then `mask` on the
  // target. NOT admitted when a path is unknown.
  bool AdmitsOpen(const std::string& path, const Credentials& cred, AccessMask mask) const;
  // Server-side revalidation of a deferred open: the target alone.
  bool AdmitsTarget(const std::string& path, const Credentials& cred, AccessMask mask) const;
};

enum class HistoryKind : uint8_t { kChmod, kOpenAdmission, kServerAdmission };

const char* HistoryKindName(HistoryKind k);

struct HistoryOp {
  static constexpr uint64_t kPending = std::numeric_limits<uint64_t>::max();

  int id = 0;
  std::string actor;
  HistoryKind kind = HistoryKind::kChmod;
  std::string path;
  uint16_t mode = 0;  // chmod: new permission bits
  Credentials cred;   // admissions
  AccessMask mask;    // admissions
  bool admitted = false;
  uint64_t invoke_ts = 0;
  uint64_t complete_ts = kPending;

  bool completed() const { return complete_ts != kPending; }
  std::string ToString() const;
};

struct Verdict {
  bool linearizable = false;
  std::vector<int> witness;  // op ids in linearization order
  std::string explanation;
};

// Searches for a total order of the history that respects real-time order
// (a before b when a completed before b was invoked) and in which every
// admission decision matches the model state at its position. Completed
// chmods must appear; pending ones may appear (after their invocation) or
// be left out. Admission ops must be completed.
Verdict CheckLinearizable(const std::vector<HistoryOp>& history, const PermModel& initial);

}  // namespace buffetfs
