#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "buffetfs/status.h"

// Declares the serialized field order of a plain struct. The wire codec walks
// these tuples, so the order here IS the byte layout.
#define BUFFETFS_FIELDS(...)                               \
  auto Tie() { return std::tie(__VA_ARGS__); }             \
  auto Tie() const { return std::tie(__VA_ARGS__); }

namespace buffetfs {

using ClientId = uint32_t;

constexpr uint16_t kTypeMask = 0170000;
constexpr uint16_t kTypeRegular = 0100000;
constexpr uint16_t kTypeDirectory = 0040000;
constexpr uint16_t kPermMask = 0777;

constexpr uint64_t kRootFileId = 0;

// Global file identity: which server, which file on it, which incarnation of
// that server.
struct BuffetInode {
  uint32_t host_id = 0;
  uint64_t file_id = 0;
  uint32_t version = 0;

  BUFFETFS_FIELDS(host_id, version, file_id)

  auto operator<=>(const BuffetInode&) const = default;
  bool operator==(const BuffetInode&) const = default;
  std::string ToString() const;
};

// The ten bytes carried next to every directory entry.
struct PermissionRecord {
  uint32_t uid = 0;
  uint32_t gid = 0;
  uint16_t mode = 0;

  BUFFETFS_FIELDS(uid, gid, mode)

  bool operator==(const PermissionRecord&) const = default;

  bool is_dir() const { return (mode & kTypeMask) == kTypeDirectory; }
  bool is_regular() const { return (mode & kTypeMask) == kTypeRegular; }
  uint16_t bits() const { return mode & kPermMask; }
  // Exactly one supported file-type flag, nothing outside type|rwx bits.
  bool WellFormed() const;
};

struct DirEntryRecord {
  std::string name;
  BuffetInode inode;
  PermissionRecord perm;

  BUFFETFS_FIELDS(name, inode, perm)

  bool operator==(const DirEntryRecord&) const = default;
};

// Entry names: non-empty, no '/', not "." or "..", shorter than 64 KiB.
bool ValidEntryName(std::string_view name);

// Splits an absolute, normalized path into components. "/" yields none.
Result<std::vector<std::string>> SplitPath(std::string_view path);

struct Credentials {
  uint32_t uid = 0;
  uint32_t gid = 0;

  BUFFETFS_FIELDS(uid, gid)

  bool operator==(const Credentials&) const = default;
};

class AccessMask {
 public:
  static constexpr uint8_t kExec = 1;
  static constexpr uint8_t kWrite = 2;
  static constexpr uint8_t kRead = 4;

  constexpr AccessMask() = default;
  constexpr explicit AccessMask(uint8_t bits) : bits_(bits & 7) {}

  static constexpr AccessMask Read() { return AccessMask(kRead); }
  static constexpr AccessMask Write() { return AccessMask(kWrite); }
  static constexpr AccessMask Exec() { return AccessMask(kExec); }

  constexpr uint8_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool has(uint8_t bit) const { return (bits_ & bit) == bit; }

  constexpr AccessMask operator|(AccessMask o) const { return AccessMask(bits_ | o.bits_); }
  constexpr bool operator==(const AccessMask&) const = default;

  std::string ToString() const;

 private:
  uint8_t bits_ = 0;
};

enum class AccessMode : uint8_t { kReadOnly = 0, kWriteOnly = 1, kReadWrite = 2 };

struct OpenFlags {
  AccessMode access = AccessMode::kReadOnly;
  bool create = false;
  bool truncate = false;

  BUFFETFS_FIELDS(access, create, truncate)

  bool operator==(const OpenFlags&) const = default;

  static OpenFlags ReadOnly() { return {AccessMode::kReadOnly, false, false}; }
  static OpenFlags WriteOnly() { return {AccessMode::kWriteOnly, false, false}; }
  static OpenFlags ReadWrite() { return {AccessMode::kReadWrite, false, false}; }

  bool readable() const { return access != AccessMode::kWriteOnly; }
  bool writable() const { return access != AccessMode::kReadOnly; }
  // truncate requires write access
  bool WellFormed() const;
};

struct FileMetadata {
  BuffetInode inode;
  PermissionRecord perm;
  uint64_t size = 0;
  int64_t atime_ns = 0;
  int64_t mtime_ns = 0;
  int64_t ctime_ns = 0;

  BUFFETFS_FIELDS(inode, perm, size, atime_ns, mtime_ns, ctime_ns)

  bool operator==(const FileMetadata&) const = default;
};

// Maps (host_id, version) to a server address. An inode whose tuple is not
// listed is stale.
class ClusterConfig {
 public:
  void AddServer(uint32_t host_id, uint32_t version, std::string address);
  void RemoveServer(uint32_t host_id, uint32_t version);

  Result<std::string> Resolve(uint32_t host_id, uint32_t version) const;
  Result<std::string> Resolve(const BuffetInode& inode) const {
    return Resolve(inode.host_id, inode.version);
  }

  // The namespace root lives on the home server as file_id 0.
  void SetHome(uint32_t host_id, uint32_t version);
  BuffetInode RootInode() const { return {home_host_, kRootFileId, home_version_}; }
  Result<std::string> HomeAddress() const { return Resolve(home_host_, home_version_); }

  const std::map<std::pair<uint32_t, uint32_t>, std::string>& servers() const { return servers_; }

 private:
  std::map<std::pair<uint32_t, uint32_t>, std::string> servers_;
  uint32_t home_host_ = 0;
  uint32_t home_version_ = 0;
};

// Owner class if uid matches, else group class if gid matches, else other.
// No superuser bypass.
bool CheckPermission(const PermissionRecord& perm, const Credentials& cred, AccessMask want);

AccessMask AccessMaskFor(const OpenFlags& flags);

}  // namespace buffetfs

template <>
struct std::hash<buffetfs::BuffetInode> {
  size_t operator()(const buffetfs::BuffetInode& i) const noexcept {
    uint64_t h = i.file_id * 0x9E3779B97F4A7C15ull;
    h ^= (uint64_t(i.host_id) << 32 | i.version) + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
    return static_cast<size_t>(h);
  }
};
