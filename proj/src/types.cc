#include "buffetfs/types.h"

namespace buffetfs {

std::string BuffetInode::ToString() const {
  return std::to_string(host_id) + ":" + std::to_string(file_id) + "@v" +
         std::to_string(version);
}

bool PermissionRecord::WellFormed() const {
  uint16_t type = mode & kTypeMask;
  if (type != kTypeRegular && type != kTypeDirectory) return false;
  return (mode & ~(kTypeMask | kPermMask)) == 0;
}

bool ValidEntryName(std::string_view name) {
  if (name.empty() || name.size() > 0xFFFF) return false;
  if (name == "." || name == "..") return false;
  return name.find('/') == std::string_view::npos;
}

Result<std::vector<std::string>> SplitPath(std::string_view path) {
  if (path.empty() || path.front() != '/') {
    return Status::InvalidArgument("path must be absolute: " + std::string(path));
  }
  std::vector<std::string> parts;
  size_t pos = 1;
  while (pos < path.size()) {
    size_t next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    std::string_view comp = path.substr(pos, next - pos);
    if (!ValidEntryName(comp)) {
      return Status::InvalidArgument("path is not normalized: " + std::string(path));
    }
    parts.emplace_back(comp);
    pos = next + 1;
  }
  if (path.size() > 1 && path.back() == '/') {
    return Status::InvalidArgument("trailing slash: " + std::string(path));
  }
  return parts;
}

std::string AccessMask::ToString() const {
  std::string s;
  s += has(kRead) ? 'r' : '-';
  s += has(kWrite) ? 'w' : '-';
  s += has(kExec) ? 'x' : '-';
  return s;
}

bool OpenFlags::WellFormed() const {
  if (access != AccessMode::kReadOnly && access != AccessMode::kWriteOnly &&
      access != AccessMode::kReadWrite) {
    return false;
  }
  return !truncate || writable();
}

void ClusterConfig::AddServer(uint32_t host_id, uint32_t version, std::string address) {
  servers_[{host_id, version}] = std::move(address);
}

void ClusterConfig::RemoveServer(uint32_t host_id, uint32_t version) {
  servers_.erase({host_id, version});
}

Result<std::string> ClusterConfig::Resolve(uint32_t host_id, uint32_t version) const {
  auto it = servers_.find({host_id, version});
  if (it == servers_.end()) {
    return Status::StaleInode("no server for host " + std::to_string(host_id) +
                              " version " + std::to_string(version));
  }
  return it->second;
}

void ClusterConfig::SetHome(uint32_t host_id, uint32_t version) {
  home_host_ = host_id;
  home_version_ = version;
}

bool CheckPermission(const PermissionRecord& perm, const Credentials& cred, AccessMask want) {
  unsigned shift;
  if (cred.uid == perm.uid) {
    shift = 6;
  } else if (cred.gid == perm.gid) {
    shift = 3;
  } else {
    shift = 0;
  }
  uint8_t granted = (perm.mode >> shift) & 7;
  return (want.bits() & ~granted) == 0;
}

AccessMask AccessMaskFor(const OpenFlags& flags) {
  AccessMask m;
  switch (flags.access) {
    case AccessMode::kReadOnly: m = AccessMask::Read(); break;
    case AccessMode::kWriteOnly: m = AccessMask::Write(); break;
    case AccessMode::kReadWrite: m = AccessMask::Read() | AccessMask::Write(); break;
  }
  if (flags.truncate) m = m | AccessMask::Write();
  return m;
}

}  // namespace buffetfs
