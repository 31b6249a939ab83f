#include "buffetfs/baseline.h"

#include <algorithm>
#include <atomic>

namespace buffetfs {

namespace {
// Several clients may share one connection (one client id), and the server
// keys open records by (client id, token).
std::atomic<uint64_t> next_token{1};
}  // namespace

const char* BaselineModeName(BaselineMode mode) {
  return mode == BaselineMode::kDom ? "dom" : "normal";
}

BaselineClient::BaselineClient(Transport* transport, ClusterConfig config, BaselineMode mode,
                               Credentials cred, uint32_t dom_threshold)
    : transport_(transport),
      config_(std::move(config)),
      mode_(mode),
      cred_(cred),
      dom_threshold_(dom_threshold) {}

Result<std::shared_ptr<BaselineClient::Handle>> BaselineClient::HandleOf(int fd) const {
  std::lock_guard<std::mutex> l(mu_);
  auto it = fds_.find(fd);
  if (it == fds_.end()) return Status::BadHandle("fd " + std::to_string(fd));
  return it->second;
}

bool BaselineClient::HasInline(int fd) const {
  auto h = HandleOf(fd);
  if (!h.ok()) return false;
  std::lock_guard<std::mutex> l((*h)->mu);
  return (*h)->inline_data.has_value();
}

Result<int> BaselineClient::Open(const std::string& path, OpenFlags flags, uint16_t create_mode) {
  if (!flags.WellFormed()) return Status::InvalidArgument("malformed open flags");
  auto home = config_.HomeAddress();
  if (!home.ok()) return home.status();
  BaselineOpenRequest req;
  req.path = path;
  req.flags = flags;
  req.cred = cred_;
  req.open_token = next_token++;
  req.client_id = transport_->client_id();
  req.create_mode = create_mode & kPermMask;
  req.inline_limit = mode_ == BaselineMode::kDom ? dom_threshold_ : 0;
  auto reply = transport_->Call(*home, req);
  if (!reply.ok()) return reply.status();
  auto opened = Expect<BaselineOpenReply>(std::move(*reply));
  if (!opened.ok()) return opened.status();

  auto h = std::make_shared<Handle>();
  h->inode = opened->entry.inode;
  h->flags = flags;
  h->open_token = req.open_token;
  h->inline_data = std::move(opened->inline_data);
  std::lock_guard<std::mutex> l(mu_);
  int fd = next_fd_++;
  fds_[fd] = std::move(h);
  return fd;
}

Result<Bytes> BaselineClient::Read(int fd, uint32_t length) {
  auto handle = HandleOf(fd);
  if (!handle.ok()) return handle.status();
  Handle& h = **handle;
  std::lock_guard<std::mutex> l(h.mu);
  if (!h.flags.readable()) return Status::AccessDenied("fd " + std::to_string(fd) + " is write-only");
  if (h.inline_data) {
    const Bytes& d = *h.inline_data;
    uint64_t begin = std::min<uint64_t>(h.offset, d.size());
    uint64_t end = std::min<uint64_t>(begin + length, d.size());
    h.offset += end - begin;
    return Bytes(d.begin() + begin, d.begin() + end);
  }
  auto addr = config_.Resolve(h.inode);
  if (!addr.ok()) return addr.status();
  auto reply = transport_->Call(*addr, ReadRequest{h.inode, h.open_token, h.offset, length, std::nullopt});
  if (!reply.ok()) return reply.status();
  auto r = Expect<ReadReply>(std::move(*reply));
  if (!r.ok()) return r.status();
  h.offset += r->data.size();
  return std::move(r->data);
}

Result<uint32_t> BaselineClient::Write(int fd, std::span<const uint8_t> data) {
  auto handle = HandleOf(fd);
  if (!handle.ok()) return handle.status();
  Handle& h = **handle;
  std::lock_guard<std::mutex> l(h.mu);
  if (!h.flags.writable()) return Status::AccessDenied("fd " + std::to_string(fd) + " is read-only");
  auto addr = config_.Resolve(h.inode);
  if (!addr.ok()) return addr.status();
  WriteRequest req{h.inode, h.open_token, h.offset, Bytes(data.begin(), data.end()), std::nullopt};
  auto reply = transport_->Call(*addr, req);
  if (!reply.ok()) return reply.status();
  auto r = Expect<WriteReply>(std::move(*reply));
  if (!r.ok()) return r.status();
  h.inline_data.reset();  // the inlined copy no longer matches the server
  h.offset += r->bytes_written;
  return r->bytes_written;
}

Status BaselineClient::Close(int fd) {
  std::shared_ptr<Handle> h;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto it = fds_.find(fd);
    if (it == fds_.end()) return Status::BadHandle("fd " + std::to_string(fd));
    h = std::move(it->second);
    fds_.erase(it);
  }
  auto addr = config_.Resolve(h->inode);
  if (!addr.ok()) return Status::OK();
  return transport_->Notify(*addr, CloseNotify{h->inode, h->open_token, transport_->client_id()});
}

Status BaselineClient::Seek(int fd, uint64_t offset) {
  auto handle = HandleOf(fd);
  if (!handle.ok()) return handle.status();
  std::lock_guard<std::mutex> l((*handle)->mu);
  (*handle)->offset = offset;
  return Status::OK();
}

}  // namespace buffetfs
