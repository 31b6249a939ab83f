#include "buffetfs/linearizability.h"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

namespace buffetfs {

namespace {

std::vector<std::string> Ancestors(const std::string& path) {
  std::vector<std::string> out{"/"};
  size_t pos = 1;
  for (;;) {
    size_t next = path.find('/', pos);
    if (next == std::string::npos) break;
    out.push_back(path.substr(0, next));
    pos = next + 1;
  }
  return out;
}

}  // namespace

bool PermModel::AdmitsTarget(const std::string& path, const Credentials& cred,
                             AccessMask mask) const {
  auto it = perms.find(path);
  return it != perms.end() && CheckPermission(it->second, cred, mask);
}

bool PermModel::AdmitsOpen(const std::string& path, const Credentials& cred,
                           AccessMask mask) const {
  if (path != "/") {
    for (const auto& dir : Ancestors(path)) {
      if (!AdmitsTarget(dir, cred, AccessMask::Exec())) return false;
    }
  }
  return AdmitsTarget(path, cred, mask);
}

const char* HistoryKindName(HistoryKind k) {
  switch (k) {
    case HistoryKind::kChmod: return "chmod";
    case HistoryKind::kOpenAdmission: return "open";
    case HistoryKind::kServerAdmission: return "first-io";
  }
  return "?";
}

std::string HistoryOp::ToString() const {
  std::ostringstream out;
  out << "#" << id << " " << actor << " " << HistoryKindName(kind) << " " << path;
  if (kind == HistoryKind::kChmod) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%04o", mode);
    out << " " << buf;
  } else {
    out << " uid=" << cred.uid << " gid=" << cred.gid << " " << mask.ToString() << " -> "
        << (admitted ? "admit" : "deny");
  }
  out << " [" << invoke_ts << ", ";
  if (completed()) {
    out << complete_ts;
  } else {
    out << "pending";
  }
  out << "]";
  return out.str();
}

Verdict CheckLinearizable(const std::vector<HistoryOp>& history, const PermModel& initial) {
  Verdict v;
  std::vector<const HistoryOp*> ops;
  for (const auto& op : history) {
    if (op.kind != HistoryKind::kChmod && !op.completed()) continue;  // undecided
    ops.push_back(&op);
  }
  size_t n = ops.size();
  // preds[i]: ops that must come before op i.
  std::vector<std::vector<size_t>> preds(n);
  for (size_t i = 0; i < n; i++) {
    for (size_t j = 0; j < n; j++) {
      if (i != j && ops[j]->completed() && ops[j]->complete_ts < ops[i]->invoke_ts) {
        preds[i].push_back(j);
      }
    }
  }

  // State key: placed ops plus the permission map; order of past chmods is
  // summarized by the map.
  std::set<std::string> dead;
  std::vector<bool> placed(n, false);
  std::vector<bool> skipped(n, false);  // pending chmods left out
  std::vector<size_t> order;
  PermModel state = initial;
  size_t deepest = 0;
  std::vector<size_t> deepest_order;

  auto key = [&]() {
    std::string k;
    k.reserve(n + state.perms.size() * 3);
    for (size_t i = 0; i < n; i++) k.push_back(placed[i] ? '1' : (skipped[i] ? '2' : '0'));
    for (const auto& [p, perm] : state.perms) {
      k.push_back(static_cast<char>(perm.mode & 0xFF));
      k.push_back(static_cast<char>(perm.mode >> 8));
    }
    return k;
  };

  std::function<bool()> dfs = [&]() -> bool {
    if (order.size() > deepest) {
      deepest = order.size();
      deepest_order = order;
    }
    bool all_done = true;
    for (size_t i = 0; i < n; i++) {
      if (!placed[i] && !skipped[i]) {
        all_done = false;
        break;
      }
    }
    if (all_done) return true;
    std::string k = key();
    if (dead.count(k)) return false;

    auto is_ready = [&](size_t i) {
      return std::all_of(preds[i].begin(), preds[i].end(),
                         [&](size_t j) { return placed[j] || skipped[j]; });
    };
    auto admits = [&](const HistoryOp& op) {
      return op.kind == HistoryKind::kOpenAdmission ? state.AdmitsOpen(op.path, op.cred, op.mask)
                                                    : state.AdmitsTarget(op.path, op.cred, op.mask);
    };
    // An admission that fits the current state can always go first: it
    // changes nothing and only unblocks later ops.
    for (size_t i = 0; i < n; i++) {
      if (placed[i] || skipped[i] || ops[i]->kind == HistoryKind::kChmod || !is_ready(i)) continue;
      if (admits(*ops[i]) != ops[i]->admitted) continue;
      placed[i] = true;
      order.push_back(i);
      if (dfs()) return true;
      order.pop_back();
      placed[i] = false;
      dead.insert(k);
      return false;
    }

    for (size_t i = 0; i < n; i++) {
      if (placed[i] || skipped[i]) continue;
      if (!is_ready(i)) continue;
      const HistoryOp& op = *ops[i];
      if (op.kind == HistoryKind::kChmod) {
        auto it = state.perms.find(op.path);
        if (it == state.perms.end()) continue;
        PermissionRecord saved = it->second;
        it->second.mode = static_cast<uint16_t>((saved.mode & kTypeMask) | (op.mode & kPermMask));
        placed[i] = true;
        order.push_back(i);
        if (dfs()) return true;
        order.pop_back();
        placed[i] = false;
        state.perms[op.path] = saved;
      }
    }
    // A pending chmod may never take effect.
    for (size_t i = 0; i < n; i++) {
      if (placed[i] || skipped[i] || ops[i]->completed()) continue;
      skipped[i] = true;
      if (dfs()) return true;
      skipped[i] = false;
    }
    dead.insert(k);
    return false;
  };

  if (dfs()) {
    v.linearizable = true;
    for (size_t i : order) v.witness.push_back(ops[i]->id);
    return v;
  }
  std::ostringstream out;
  out << "no linearization; longest consistent prefix:";
  for (size_t i : deepest_order) out << "\n  " << ops[i]->ToString();
  out << "\ncannot place next:";
  std::vector<bool> in_prefix(n, false);
  for (size_t i : deepest_order) in_prefix[i] = true;
  for (size_t i = 0; i < n; i++) {
    if (!in_prefix[i]) out << "\n  " << ops[i]->ToString();
  }
  v.explanation = out.str();
  return v;
}

}  // namespace buffetfs
