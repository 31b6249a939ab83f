#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "buffetfs/codec.h"
#include "buffetfs/status.h"
#include "buffetfs/types.h"

namespace buffetfs {

// Server-side open bookkeeping that a client postponed from open() to its
// first read or write.
struct DeferredOpen {
  uint64_t open_token = 0;
  OpenFlags flags;
  Credentials cred;

  BUFFETFS_FIELDS(open_token, flags, cred)
  bool operator==(const DeferredOpen&) const = default;
};

struct OpenRecord {
  uint64_t open_token = 0;
  ClientId client_id = 0;
  uint64_t file_id = 0;
  OpenFlags flags;
  Credentials cred;

  BUFFETFS_FIELDS(open_token, client_id, file_id, flags, cred)
  bool operator==(const OpenRecord&) const = default;
};

struct RegistryEntry {
  uint64_t dir_id = 0;
  std::vector<ClientId> clients;

  BUFFETFS_FIELDS(dir_id, clients)
  bool operator==(const RegistryEntry&) const = default;
};

struct GetDirRequest {
  static constexpr uint8_t kTag = 1;
  BuffetInode dir_inode;
  ClientId client_id = 0;

  BUFFETFS_FIELDS(dir_inode, client_id)
  bool operator==(const GetDirRequest&) const = default;
};

struct GetDirReply {
  static constexpr uint8_t kTag = 2;
  std::vector<DirEntryRecord> entries;
  FileMetadata dir_meta;

  BUFFETFS_FIELDS(entries, dir_meta)
  bool operator==(const GetDirReply&) const = default;
};

struct ReadRequest {
  static constexpr uint8_t kTag = 3;
  BuffetInode inode;
  uint64_t open_token = 0;
  uint64_t offset = 0;
  uint32_t length = 0;
  std::optional<DeferredOpen> deferred_open;

  BUFFETFS_FIELDS(inode, open_token, offset, length, deferred_open)
  bool operator==(const ReadRequest&) const = default;
};

struct ReadReply {
  static constexpr uint8_t kTag = 4;
  Bytes data;
  FileMetadata file_meta;

  BUFFETFS_FIELDS(data, file_meta)
  bool operator==(const ReadReply&) const = default;
};

struct WriteRequest {
  static constexpr uint8_t kTag = 5;
  BuffetInode inode;
  uint64_t open_token = 0;
  uint64_t offset = 0;
  Bytes data;
  std::optional<DeferredOpen> deferred_open;

  BUFFETFS_FIELDS(inode, open_token, offset, data, deferred_open)
  bool operator==(const WriteRequest&) const = default;
};

struct WriteReply {
  static constexpr uint8_t kTag = 6;
  uint32_t bytes_written = 0;
  FileMetadata file_meta;

  BUFFETFS_FIELDS(bytes_written, file_meta)
  bool operator==(const WriteReply&) const = default;
};

struct CloseNotify {
  static constexpr uint8_t kTag = 7;
  BuffetInode inode;
  uint64_t open_token = 0;
  ClientId client_id = 0;

  BUFFETFS_FIELDS(inode, open_token, client_id)
  bool operator==(const CloseNotify&) const = default;
};

struct InvalidateRequest {
  static constexpr uint8_t kTag = 8;
  std::vector<BuffetInode> targets;
  uint64_t epoch = 0;

  BUFFETFS_FIELDS(targets, epoch)
  bool operator==(const InvalidateRequest&) const = default;
};

struct InvalidateAck {
  static constexpr uint8_t kTag = 9;
  uint64_t epoch = 0;
  ClientId client_id = 0;

  BUFFETFS_FIELDS(epoch, client_id)
  bool operator==(const InvalidateAck&) const = default;
};

struct SetPermissionRequest {
  static constexpr uint8_t kTag = 10;
  BuffetInode inode;
  PermissionRecord new_perm;
  Credentials cred;

  BUFFETFS_FIELDS(inode, new_perm, cred)
  bool operator==(const SetPermissionRequest&) const = default;
};

struct SetPermissionReply {
  static constexpr uint8_t kTag = 11;
  bool ok = false;

  BUFFETFS_FIELDS(ok)
  bool operator==(const SetPermissionReply&) const = default;
};

struct CreateRequest {
  static constexpr uint8_t kTag = 12;
  BuffetInode parent;
  std::string name;
  PermissionRecord perm;
  bool is_dir = false;

  BUFFETFS_FIELDS(parent, name, perm, is_dir)
  bool operator==(const CreateRequest&) const = default;
};

struct CreateReply {
  static constexpr uint8_t kTag = 13;
  DirEntryRecord entry;

  BUFFETFS_FIELDS(entry)
  bool operator==(const CreateReply&) const = default;
};

struct ErrorReply {
  static constexpr uint8_t kTag = 14;
  Code code = Code::kIO;
  std::string detail;

  BUFFETFS_FIELDS(code, detail)
  bool operator==(const ErrorReply&) const = default;
};

struct AdminDumpRequest {
  static constexpr uint8_t kTag = 15;

  BUFFETFS_FIELDS()
  bool operator==(const AdminDumpRequest&) const = default;
};

struct AdminDumpReply {
  static constexpr uint8_t kTag = 16;
  uint32_t host_id = 0;
  uint32_t version = 0;
  uint64_t invalidation_epoch = 0;
  std::vector<OpenRecord> opened;
  std::vector<RegistryEntry> registry;
  std::vector<FileMetadata> files;
  bool round_active = false;
  uint32_t awaiting_acks = 0;
  uint32_t held_get_dirs = 0;

  BUFFETFS_FIELDS(host_id, version, invalidation_epoch, opened, registry, files, round_active,
                  awaiting_acks, held_get_dirs)
  bool operator==(const AdminDumpReply&) const = default;
};

// Classic-DFS open: path resolution, permission check and open bookkeeping
// all happen on the server in one round trip.
struct BaselineOpenRequest {
  static constexpr uint8_t kTag = 17;
  std::string path;
  OpenFlags flags;
  Credentials cred;
  uint64_t open_token = 0;
  ClientId client_id = 0;
  uint16_t create_mode = 0;
  uint32_t inline_limit = 0;  // 0 disables inlining

  BUFFETFS_FIELDS(path, flags, cred, open_token, client_id, create_mode, inline_limit)
  bool operator==(const BaselineOpenRequest&) const = default;
};

struct BaselineOpenReply {
  static constexpr uint8_t kTag = 18;
  DirEntryRecord entry;
  FileMetadata file_meta;
  std::optional<Bytes> inline_data;

  BUFFETFS_FIELDS(entry, file_meta, inline_data)
  bool operator==(const BaselineOpenReply&) const = default;
};

enum class ChannelKind : uint8_t { kRpc = 0, kOneWay = 1, kPush = 2 };

// First frame on every socket connection.
struct RegisterClient {
  static constexpr uint8_t kTag = 19;
  ClientId client_id = 0;
  ChannelKind channel = ChannelKind::kRpc;

  BUFFETFS_FIELDS(client_id, channel)
  bool operator==(const RegisterClient&) const = default;
};

// Flushes a one-way channel; never counted as traffic.
struct BarrierRequest {
  static constexpr uint8_t kTag = 20;

  BUFFETFS_FIELDS()
  bool operator==(const BarrierRequest&) const = default;
};

struct BarrierReply {
  static constexpr uint8_t kTag = 21;

  BUFFETFS_FIELDS()
  bool operator==(const BarrierReply&) const = default;
};

// Alternative index + 1 == tag.
using RpcMessage =
    std::variant<GetDirRequest, GetDirReply, ReadRequest, ReadReply, WriteRequest, WriteReply,
                 CloseNotify, InvalidateRequest, InvalidateAck, SetPermissionRequest,
                 SetPermissionReply, CreateRequest, CreateReply, ErrorReply, AdminDumpRequest,
                 AdminDumpReply, BaselineOpenRequest, BaselineOpenReply, RegisterClient,
                 BarrierRequest, BarrierReply>;

constexpr uint8_t kMinTag = 1;
constexpr uint8_t kMaxTag = std::variant_size_v<RpcMessage>;

inline uint8_t TagOf(const RpcMessage& m) { return static_cast<uint8_t>(m.index() + 1); }

const char* MessageName(uint8_t tag);

// Requests that expect exactly one reply.
bool IsCallRequest(uint8_t tag);
// CloseNotify, InvalidateRequest (server push) and InvalidateAck.
bool IsOneWay(uint8_t tag);
// Reply tag for a call request; ErrorReply may always stand in.
uint8_t ReplyTagFor(uint8_t request_tag);

ErrorReply MakeError(const Status& s);
Status ToStatus(const ErrorReply& e);

// Extracts T from a reply, turning ErrorReply into its Status and anything
// else into a protocol error.
template <typename T>
Result<T> Expect(RpcMessage reply) {
  if (auto* v = std::get_if<T>(&reply)) return std::move(*v);
  if (auto* e = std::get_if<ErrorReply>(&reply)) return ToStatus(*e);
  return Status::Corruption(std::string("unexpected reply ") + MessageName(TagOf(reply)));
}

}  // namespace buffetfs
