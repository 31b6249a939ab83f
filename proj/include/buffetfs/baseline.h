#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "buffetfs/agent.h"

namespace buffetfs {

enum class BaselineMode : uint8_t { kNormal, kDom };

const char* BaselineModeName(BaselineMode mode);

// A classic-DFS client: every open is one round trip that resolves the path
// and checks permissions on the server. In DOM mode small files come back
// inline with the open reply and reads are served from that copy.
class BaselineClient : public FileClient {
 public:
  static constexpr uint32_t kDefaultDomThreshold = 64 * 1024;

  BaselineClient(Transport* transport, ClusterConfig config, BaselineMode mode, Credentials cred,
                 uint32_t dom_threshold = kDefaultDomThreshold);

  Result<int> Open(const std::string& path, OpenFlags flags, uint16_t create_mode = 0644) override;
  Result<Bytes> Read(int fd, uint32_t length) override;
  Result<uint32_t> Write(int fd, std::span<const uint8_t> data) override;
  Status Close(int fd) override;
  Status Seek(int fd, uint64_t offset) override;

  BaselineMode mode() const { return mode_; }
  // True when the handle still holds inlined content.
  bool HasInline(int fd) const;

 private:
  struct Handle {
    BuffetInode inode;
    OpenFlags flags;
    uint64_t offset = 0;
    uint64_t open_token = 0;
    std::optional<Bytes> inline_data;
    std::mutex mu;
  };

  Result<std::shared_ptr<Handle>> HandleOf(int fd) const;

  Transport* const transport_;
  const ClusterConfig config_;
  const BaselineMode mode_;
  const Credentials cred_;
  const uint32_t dom_threshold_;

  mutable std::mutex mu_;
  std::map<int, std::shared_ptr<Handle>> fds_;
  int next_fd_ = 3;
};

}  // namespace buffetfs
