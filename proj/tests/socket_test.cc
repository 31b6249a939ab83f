#include "buffetfs/socket_transport.h"

#include <gtest/gtest.h>

#include <thread>

#include "buffetfs/agent.h"
#include "buffetfs/baseline.h"
#include "buffetfs/server.h"

namespace buffetfs {
namespace {

Bytes B(const std::string& s) { return Bytes(s.begin(), s.end()); }

class SocketTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServerOptions o;
    o.root_perm = PermissionRecord{1, 1, static_cast<uint16_t>(kTypeDirectory | 0755)};
    o.ack_deadline = std::chrono::milliseconds(2000);
    server_ = std::make_unique<Server>(o, nullptr);
    auto l = SocketServer::Listen("127.0.0.1", 0, server_.get());
    ASSERT_TRUE(l.ok()) << l.status().ToString();
    listener_ = std::move(*l);
    server_->SetNotifier(listener_.get());
    config_.AddServer(1, server_->version(), listener_->address());
    config_.SetHome(1, server_->version());
  }
  void TearDown() override {
    listener_->Stop();
  }

  std::unique_ptr<Server> server_;
  std::unique_ptr<SocketServer> listener_;
  ClusterConfig config_;
};

TEST(ParseAddressTest, Forms) {
  std::string host;
  uint16_t port;
  ASSERT_TRUE(ParseAddress("127.0.0.1:8080", &host, &port).ok());
  EXPECT_EQ(host, "127.0.0.1");
  EXPECT_EQ(port, 8080);
  ASSERT_TRUE(ParseAddress("localhost:0", &host, &port).ok());
  EXPECT_EQ(port, 0);
  EXPECT_FALSE(ParseAddress("nohost", &host, &port).ok());
  EXPECT_FALSE(ParseAddress("h:70000", &host, &port).ok());
  EXPECT_FALSE(ParseAddress("h:x", &host, &port).ok());
}

TEST_F(SocketTest, ListensOnAssignedPort) {
  EXPECT_NE(listener_->port(), 0);
  EXPECT_EQ(listener_->address(), "127.0.0.1:" + std::to_string(listener_->port()));
}

TEST_F(SocketTest, AgentReadWriteOverTcp) {
  SocketTransport t(1);
  Agent agent(&t, config_);
  ASSERT_TRUE(agent.Mkdir({1, 1}, "/d", 0755).ok());
  auto fd = agent.Open(1, {1, 1}, "/d/f", OpenFlags{AccessMode::kReadWrite, true, false});
  ASSERT_TRUE(fd.ok()) << fd.status().ToString();
  ASSERT_TRUE(agent.Write(1, *fd, B("over the wire")).ok());
  ASSERT_TRUE(agent.Seek(1, *fd, 0).ok());
  EXPECT_EQ(*agent.Read(1, *fd, 100), B("over the wire"));
  RpcCounters before = t.SnapshotCounters();
  ASSERT_TRUE(agent.Close(1, *fd).ok());
  t.Drain();
  EXPECT_TRUE(server_->AdminDump().opened.empty());
  RpcCounters c = t.SnapshotCounters();
  EXPECT_EQ(c.async_msgs - before.async_msgs, 1u);
  EXPECT_EQ(c.sync_rpcs, before.sync_rpcs);
  EXPECT_GT(c.bytes_sent, 0u);
}

TEST_F(SocketTest, InvalidationsArePushedAndAcked) {
  SocketTransport t1(1), t2(2);
  Agent owner(&t1, config_);
  Agent reader(&t2, config_);
  auto fd = owner.Open(1, {1, 1}, "/f", OpenFlags{AccessMode::kWriteOnly, true, false}, 0644);
  ASSERT_TRUE(fd.ok());
  ASSERT_TRUE(reader.Open(1, {2, 1}, "/f", OpenFlags::ReadOnly()).ok());
  // Completes only after the reader acked over its push channel.
  auto start = std::chrono::steady_clock::now();
  ASSERT_TRUE(owner.Chmod({1, 1}, "/f", 0600).ok());
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(1500));
  EXPECT_EQ(reader.invalidations_handled(), 1u);
  EXPECT_TRUE(reader.Open(1, {2, 1}, "/f", OpenFlags::ReadOnly()).status().IsAccessDenied());
}

TEST_F(SocketTest, BaselineOverTcp) {
  SocketTransport t(3);
  BaselineClient w(&t, config_, BaselineMode::kNormal, {1, 1});
  auto fd = w.Open("/x", OpenFlags{AccessMode::kWriteOnly, true, false});
  ASSERT_TRUE(fd.ok()) << fd.status().ToString();
  ASSERT_TRUE(w.Write(*fd, B("abc")).ok());
  ASSERT_TRUE(w.Close(*fd).ok());
  BaselineClient r(&t, config_, BaselineMode::kDom, {1, 1});
  auto rfd = r.Open("/x", OpenFlags::ReadOnly());
  ASSERT_TRUE(rfd.ok());
  EXPECT_TRUE(r.HasInline(*rfd));
  EXPECT_EQ(*r.Read(*rfd, 10), B("abc"));
  ASSERT_TRUE(r.Close(*rfd).ok());
}

TEST_F(SocketTest, ConcurrentClients) {
  {
    SocketTransport t(1);
    Agent a(&t, config_);
    for (int i = 0; i < 8; i++) {
      auto fd = a.Open(1, {1, 1}, "/f" + std::to_string(i), OpenFlags{AccessMode::kWriteOnly, true, false});
      ASSERT_TRUE(fd.ok());
      ASSERT_TRUE(a.Write(1, *fd, B("v" + std::to_string(i))).ok());
      ASSERT_TRUE(a.Close(1, *fd).ok());
    }
    t.Drain();
  }
  std::vector<std::thread> threads;
  std::atomic<int> good{0};
  for (int w = 0; w < 4; w++) {
    threads.emplace_back([&, w] {
      SocketTransport t(10 + w);
      Agent a(&t, config_);
      for (int i = 0; i < 8; i++) {
        auto fd = a.Open(1, {2, 1}, "/f" + std::to_string(i), OpenFlags::ReadOnly());
        if (!fd.ok()) continue;
        auto r = a.Read(1, *fd, 10);
        if (r.ok() && *r == B("v" + std::to_string(i))) good++;
        (void)a.Close(1, *fd);
      }
      t.Drain();
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(good.load(), 32);
}

TEST_F(SocketTest, UnreachableServer) {
  SocketTransport t(1);
  auto r = t.Call("127.0.0.1:1", AdminDumpRequest{});
  EXPECT_EQ(r.status().code(), Code::kUnreachable);
}

}  // namespace
}  // namespace buffetfs
