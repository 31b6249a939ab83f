#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "buffetfs/transport.h"

namespace buffetfs {

// Serves one endpoint over TCP. Every connection starts with a
// RegisterClient frame naming the client and the channel's role: calls
// (request/reply, in order), one-way messages (processed sequentially), or
// the server-to-client push stream.
class SocketServer : public ClientNotifier {
 public:
  // port 0 picks a free port.
  static Result<std::unique_ptr<SocketServer>> Listen(const std::string& host, uint16_t port,
                                                      ServerEndpoint* endpoint);
  ~SocketServer() override;

  SocketServer(const SocketServer&) = delete;
  SocketServer& operator=(const SocketServer&) = delete;

  std::string address() const;
  uint16_t port() const { return port_; }

  bool Push(ClientId to, const RpcMessage& msg) override;
  void Stop();

 private:
  struct Conn;

  SocketServer(int listen_fd, std::string host, uint16_t port, ServerEndpoint* endpoint);
  void AcceptLoop();
  void Serve(std::shared_ptr<Conn> conn);

  int listen_fd_;
  const std::string host_;
  const uint16_t port_;
  ServerEndpoint* const endpoint_;

  std::mutex mu_;
  bool stopped_ = false;
  std::vector<std::shared_ptr<Conn>> conns_;
  std::vector<std::thread> threads_;
  std::map<ClientId, std::shared_ptr<Conn>> push_;
  std::thread accept_;
};

// Client side over TCP. Addresses are "host:port". Elapsed time in the
// counters is wall time spent waiting for replies.
class SocketTransport : public Transport {
 public:
  explicit SocketTransport(ClientId id);
  ~SocketTransport() override;

  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  ClientId client_id() const override { return id_; }
  Result<RpcMessage> Call(const std::string& address, const RpcMessage& request) override;
  Status Notify(const std::string& address, const RpcMessage& msg) override;
  void Drain() override;
  void SetPushSink(PushSink* sink) override;

 private:
  struct Peer;

  Result<std::shared_ptr<Peer>> PeerFor(const std::string& address);
  void SenderLoop(std::shared_ptr<Peer> peer);
  void PushLoop(std::shared_ptr<Peer> peer);

  const ClientId id_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Peer>> peers_;
  std::mutex sink_mu_;
  PushSink* sink_ = nullptr;
};

// Splits "host:port". Port 0 is accepted (listen on any free port).
Status ParseAddress(const std::string& address, std::string* host, uint16_t* port);

}  // namespace buffetfs
