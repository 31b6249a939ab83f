#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "buffetfs/codec.h"
#include "buffetfs/status.h"
#include "buffetfs/types.h"

namespace buffetfs {

// Extended attribute names on backing files.
inline constexpr const char* kInodeXattr = "user.buffetfs.inode";
inline constexpr const char* kPermXattr = "user.buffetfs.perm";

struct StoredObject {
  BuffetInode inode;
  PermissionRecord perm;
  Bytes content;                        // regular files
  std::vector<DirEntryRecord> entries;  // directories
};

struct StoredServer {
  uint32_t host_id = 0;
  uint32_t version = 0;
  uint64_t next_file_id = 1;
  std::vector<StoredObject> objects;
};

// Write-through backing for a server. Each file_id becomes one host file
// named by its decimal id; directories hold their encoded entry list.
class DirectoryStore {
 public:
  static Result<std::unique_ptr<DirectoryStore>> Open(const std::string& root);

  // Empty `found` flag when nothing has been persisted yet.
  Result<StoredServer> Load(bool* found) const;

  Status SaveServer(uint32_t host_id, uint32_t version, uint64_t next_file_id);
  Status SaveAttrs(uint64_t file_id, const BuffetInode& inode, const PermissionRecord& perm);
  Status WriteContent(uint64_t file_id, uint64_t offset, std::span<const uint8_t> data);
  Status Truncate(uint64_t file_id, uint64_t size);
  Status SaveEntries(uint64_t file_id, const std::vector<DirEntryRecord>& entries);

  const std::string& root() const { return root_; }
  std::string PathOf(uint64_t file_id) const;

 private:
  explicit DirectoryStore(std::string root) : root_(std::move(root)) {}

  std::string root_;
};

}  // namespace buffetfs
