#include "buffetfs/socket_transport.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <functional>

#include "buffetfs/wire.h"

namespace buffetfs {

namespace {

Status Errno(const std::string& what) {
  return Status::Unreachable(what + ": " + std::strerror(errno));
}

Status WriteAll(int fd, const Bytes& buf) {
  size_t done = 0;
  while (done < buf.size()) {
    ssize_t n = ::send(fd, buf.data() + done, buf.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return Errno("send");
    }
    done += static_cast<size_t>(n);
  }
  return Status::OK();
}

Status ReadExact(int fd, uint8_t* out, size_t len) {
  size_t done = 0;
  while (done < len) {
    ssize_t n = ::recv(fd, out + done, len - done, 0);
    if (n == 0) return Status::Unreachable("connection closed");
    if (n < 0) {
      if (errno == EINTR) continue;
      return Errno("recv");
    }
    done += static_cast<size_t>(n);
  }
  return Status::OK();
}

// Returns the raw frame so callers can count its bytes.
Result<Bytes> ReadFrame(int fd) {
  Bytes frame(kFrameHeaderSize);
  Status s = ReadExact(fd, frame.data(), kFrameHeaderSize);
  if (!s.ok()) return s;
  auto header = DecodeFrameHeader(frame);
  if (!header.ok()) return header.status();
  frame.resize(kFrameHeaderSize + header->body_len);
  s = ReadExact(fd, frame.data() + kFrameHeaderSize, header->body_len);
  if (!s.ok()) return s;
  return frame;
}

Result<int> Dial(const std::string& address) {
  std::string host;
  uint16_t port;
  Status s = ParseAddress(address, &host, &port);
  if (!s.ok()) return s;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
  if (rc != 0) return Status::Unreachable(address + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) return Errno("connect " + address);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

Result<int> DialAs(const std::string& address, ClientId id, ChannelKind channel) {
  auto fd = Dial(address);
  if (!fd.ok()) return fd;
  Status s = WriteAll(*fd, EncodeMessage(RegisterClient{id, channel}));
  if (!s.ok()) {
    ::close(*fd);
    return s;
  }
  return fd;
}

int64_t NowPs() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
             .count() *
         1000;
}

}  // namespace

Status ParseAddress(const std::string& address, std::string* host, uint16_t* port) {
  size_t colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    return Status::InvalidArgument("address must be host:port: " + address);
  }
  unsigned long p = 0;
  try {
    size_t used = 0;
    p = std::stoul(address.substr(colon + 1), &used);
    if (used != address.size() - colon - 1) throw std::invalid_argument(address);
  } catch (const std::exception&) {
    return Status::InvalidArgument("bad port in " + address);
  }
  if (p > 65535) return Status::InvalidArgument("bad port in " + address);
  *host = address.substr(0, colon);
  *port = static_cast<uint16_t>(p);
  return Status::OK();
}

// ---------------------------------------------------------------- server

struct SocketServer::Conn {
  explicit Conn(int f) : fd(f) {}
  ~Conn() { ::close(fd); }

  Status Send(const RpcMessage& msg) {
    Bytes frame = EncodeMessage(msg);
    std::lock_guard<std::mutex> l(write_mu);
    return WriteAll(fd, frame);
  }

  int fd;
  std::mutex write_mu;
};

Result<std::unique_ptr<SocketServer>> SocketServer::Listen(const std::string& host, uint16_t port,
                                                           ServerEndpoint* endpoint) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return Errno("socket");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host == "localhost" ? "127.0.0.1" : host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    return Status::InvalidArgument("not an IPv4 address: " + host);
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    Status s = Errno("bind " + host + ":" + std::to_string(port));
    ::close(fd);
    return s;
  }
  if (::listen(fd, 128) != 0) {
    Status s = Errno("listen");
    ::close(fd);
    return s;
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return std::unique_ptr<SocketServer>(new SocketServer(fd, host, ntohs(addr.sin_port), endpoint));
}

SocketServer::SocketServer(int listen_fd, std::string host, uint16_t port, ServerEndpoint* endpoint)
    : listen_fd_(listen_fd), host_(std::move(host)), port_(port), endpoint_(endpoint) {
  accept_ = std::thread([this] { AcceptLoop(); });
}

SocketServer::~SocketServer() { Stop(); }

std::string SocketServer::address() const { return host_ + ":" + std::to_string(port_); }

void SocketServer::Stop() {
  std::vector<std::thread> threads;
  {
    std::lock_guard<std::mutex> l(mu_);
    if (stopped_) return;
    stopped_ = true;
    ::shutdown(listen_fd_, SHUT_RDWR);
    for (auto& c : conns_) ::shutdown(c->fd, SHUT_RDWR);
  }
  if (accept_.joinable()) accept_.join();
  {
    std::lock_guard<std::mutex> l(mu_);
    threads = std::move(threads_);
  }
  for (auto& t : threads) t.join();
  ::close(listen_fd_);
  std::lock_guard<std::mutex> l(mu_);
  conns_.clear();
  push_.clear();
}

void SocketServer::AcceptLoop() {
  for (;;) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto conn = std::make_shared<Conn>(fd);
    std::lock_guard<std::mutex> l(mu_);
    if (stopped_) return;
    conns_.push_back(conn);
    threads_.emplace_back([this, conn] { Serve(conn); });
  }
}

void SocketServer::Serve(std::shared_ptr<Conn> conn) {
  auto first = ReadFrame(conn->fd);
  if (!first.ok()) return;
  auto hello = DecodeMessage(*first);
  if (!hello.ok() || !std::holds_alternative<RegisterClient>(*hello)) {
    LogToStderr(Status::Corruption("connection did not start with RegisterClient"));
    return;
  }
  RegisterClient reg = std::get<RegisterClient>(*hello);
  if (reg.channel == ChannelKind::kPush) {
    std::lock_guard<std::mutex> l(mu_);
    push_[reg.client_id] = conn;
  }
  // Confirms the push channel so the client knows it is reachable before it
  // makes its first call.
  if (reg.channel == ChannelKind::kPush && !conn->Send(BarrierReply{}).ok()) return;
  for (;;) {
    auto frame = ReadFrame(conn->fd);
    if (!frame.ok()) break;
    auto msg = DecodeMessage(*frame);
    if (!msg.ok()) {
      LogToStderr(msg.status());
      break;
    }
    if (std::holds_alternative<BarrierRequest>(*msg)) {
      conn->Send(BarrierReply{});
      continue;
    }
    switch (reg.channel) {
      case ChannelKind::kRpc:
        endpoint_->HandleCall(reg.client_id, std::move(*msg),
                              [conn](RpcMessage reply) { conn->Send(reply); });
        break;
      case ChannelKind::kOneWay:
        endpoint_->HandleOneWay(reg.client_id, std::move(*msg));
        break;
      case ChannelKind::kPush:
        break;  // nothing flows upstream on a push channel
    }
  }
  if (reg.channel == ChannelKind::kPush) {
    std::lock_guard<std::mutex> l(mu_);
    auto it = push_.find(reg.client_id);
    if (it != push_.end() && it->second == conn) push_.erase(it);
  }
}

bool SocketServer::Push(ClientId to, const RpcMessage& msg) {
  std::shared_ptr<Conn> conn;
  {
    std::lock_guard<std::mutex> l(mu_);
    auto it = push_.find(to);
    if (it == push_.end()) return false;
    conn = it->second;
  }
  return conn->Send(msg).ok();
}

// ---------------------------------------------------------------- client

struct SocketTransport::Peer {
  std::string address;

  std::mutex rpc_mu;
  std::vector<int> idle_rpc;

  // One-way sender: items are frames, or barriers carrying a completion.
  struct Item {
    Bytes frame;
    std::function<void()> barrier_done;
  };
  std::mutex q_mu;
  std::condition_variable q_cv;
  std::deque<Item> queue;
  bool stop = false;
  int oneway_fd = -1;
  std::thread sender;

  int push_fd = -1;
  std::thread pusher;

  ~Peer() {
    for (int fd : idle_rpc) ::close(fd);
    if (oneway_fd >= 0) ::close(oneway_fd);
    if (push_fd >= 0) ::close(push_fd);
  }
};

SocketTransport::SocketTransport(ClientId id) : id_(id) {}

SocketTransport::~SocketTransport() {
  Drain();
  std::map<std::string, std::shared_ptr<Peer>> peers;
  {
    std::lock_guard<std::mutex> l(mu_);
    peers = std::move(peers_);
  }
  for (auto& [addr, p] : peers) {
    {
      std::lock_guard<std::mutex> l(p->q_mu);
      p->stop = true;
    }
    p->q_cv.notify_all();
    if (p->push_fd >= 0) ::shutdown(p->push_fd, SHUT_RDWR);
    if (p->sender.joinable()) p->sender.join();
    if (p->pusher.joinable()) p->pusher.join();
  }
}

Result<std::shared_ptr<SocketTransport::Peer>> SocketTransport::PeerFor(const std::string& address) {
  std::lock_guard<std::mutex> l(mu_);
  auto it = peers_.find(address);
  if (it != peers_.end()) return it->second;
  auto peer = std::make_shared<Peer>();
  peer->address = address;
  // The push stream exists before the first call so no invalidation can
  // be sent before this client is reachable.
  auto push = DialAs(address, id_, ChannelKind::kPush);
  if (!push.ok()) return push.status();
  peer->push_fd = *push;
  auto confirm = ReadFrame(peer->push_fd);
  if (!confirm.ok()) return confirm.status();
  peer->pusher = std::thread([this, peer] { PushLoop(peer); });
  peer->sender = std::thread([this, peer] { SenderLoop(peer); });
  peers_[address] = peer;
  return peer;
}

void SocketTransport::SetPushSink(PushSink* sink) {
  std::lock_guard<std::mutex> l(sink_mu_);
  sink_ = sink;
}

void SocketTransport::PushLoop(std::shared_ptr<Peer> peer) {
  for (;;) {
    auto frame = ReadFrame(peer->push_fd);
    if (!frame.ok()) return;
    auto msg = DecodeMessage(*frame);
    if (!msg.ok()) {
      LogToStderr(msg.status());
      return;
    }
    std::lock_guard<std::mutex> l(sink_mu_);
    if (sink_ != nullptr) sink_->HandlePush(peer->address, std::move(*msg));
  }
}

void SocketTransport::SenderLoop(std::shared_ptr<Peer> peer) {
  std::unique_lock<std::mutex> l(peer->q_mu);
  for (;;) {
    peer->q_cv.wait(l, [&] { return peer->stop || !peer->queue.empty(); });
    if (peer->queue.empty()) return;
    Peer::Item item = std::move(peer->queue.front());
    peer->queue.pop_front();
    l.unlock();
    if (peer->oneway_fd < 0) {
      auto fd = DialAs(peer->address, id_, ChannelKind::kOneWay);
      if (fd.ok()) {
        peer->oneway_fd = *fd;
      } else {
        LogToStderr(fd.status());
      }
    }
    if (peer->oneway_fd >= 0) {
      if (item.barrier_done) {
        Status s = WriteAll(peer->oneway_fd, EncodeMessage(BarrierRequest{}));
        if (s.ok()) s = ReadFrame(peer->oneway_fd).status();
        if (!s.ok()) LogToStderr(s);
      } else {
        Status s = WriteAll(peer->oneway_fd, item.frame);
        if (!s.ok()) LogToStderr(s);
      }
    }
    if (item.barrier_done) item.barrier_done();
    l.lock();
  }
}

Result<RpcMessage> SocketTransport::Call(const std::string& address, const RpcMessage& request) {
  uint8_t tag = TagOf(request);
  if (!IsCallRequest(tag)) {
    return Status::InvalidArgument(std::string(MessageName(tag)) + " has no reply");
  }
  auto peer = PeerFor(address);
  if (!peer.ok()) return peer.status();
  int fd = -1;
  {
    std::lock_guard<std::mutex> l((*peer)->rpc_mu);
    if (!(*peer)->idle_rpc.empty()) {
      fd = (*peer)->idle_rpc.back();
      (*peer)->idle_rpc.pop_back();
    }
  }
  if (fd < 0) {
    auto dialed = DialAs(address, id_, ChannelKind::kRpc);
    if (!dialed.ok()) return dialed.status();
    fd = *dialed;
  }
  Bytes req = EncodeMessage(request);
  int64_t start = NowPs();
  Status s = WriteAll(fd, req);
  Result<Bytes> reply_frame = s.ok() ? ReadFrame(fd) : Result<Bytes>(s);
  if (!reply_frame.ok()) {
    ::close(fd);
    return reply_frame.status();
  }
  int64_t cost = NowPs() - start;
  {
    std::lock_guard<std::mutex> l((*peer)->rpc_mu);
    (*peer)->idle_rpc.push_back(fd);
  }
  auto reply = DecodeMessage(*reply_frame);
  if (!reply.ok()) return reply.status();
  counters_.RecordCall(tag, req.size(), reply_frame->size(), cost);
  ChargeCurrentFlowCall(tag, req.size(), reply_frame->size(), cost);
  return reply;
}

Status SocketTransport::Notify(const std::string& address, const RpcMessage& msg) {
  uint8_t tag = TagOf(msg);
  if (!IsOneWay(tag)) return Status::InvalidArgument(std::string(MessageName(tag)) + " is not one-way");
  auto peer = PeerFor(address);
  if (!peer.ok()) return peer.status();
  Bytes frame = EncodeMessage(msg);
  counters_.RecordAsync(tag, frame.size());
  ChargeCurrentFlowAsync(tag, frame.size());
  {
    std::lock_guard<std::mutex> l((*peer)->q_mu);
    (*peer)->queue.push_back(Peer::Item{std::move(frame), nullptr});
  }
  (*peer)->q_cv.notify_one();
  return Status::OK();
}

void SocketTransport::Drain() {
  std::vector<std::shared_ptr<Peer>> peers;
  {
    std::lock_guard<std::mutex> l(mu_);
    for (auto& [a, p] : peers_) peers.push_back(p);
  }
  for (auto& p : peers) {
    std::mutex m;
    std::condition_variable cv;
    bool done = false;
    {
      std::lock_guard<std::mutex> l(p->q_mu);
      if (p->stop) continue;
      p->queue.push_back(Peer::Item{{}, [&] {
                                      std::lock_guard<std::mutex> g(m);
                                      done = true;
                                      cv.notify_all();
                                    }});
    }
    p->q_cv.notify_one();
    std::unique_lock<std::mutex> l(m);
    cv.wait(l, [&] { return done; });
  }
}

}  // namespace buffetfs
