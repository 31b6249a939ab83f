#include "buffetfs/agent.h"

#include <gtest/gtest.h>

#include "buffetfs/server.h"
#include "buffetfs/sim_network.h"

namespace buffetfs {
namespace {

constexpr char kAddr[] = "bserver:1";
const Credentials kOwner{1, 1};
const Credentials kGroupMate{2, 1};
const Credentials kOther{3, 3};

Bytes B(const std::string& s) { return Bytes(s.begin(), s.end()); }

class AgentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServerOptions o;
    o.deadline_timer = false;
    o.root_perm = PermissionRecord{1, 1, static_cast<uint16_t>(kTypeDirectory | 0755)};
    server_ = std::make_unique<Server>(o, net_.NotifierFor(kAddr));
    net_.AttachServer(kAddr, server_.get());
    config_.AddServer(1, server_->version(), kAddr);
    config_.SetHome(1, server_->version());
    t1_ = net_.Connect(1);
    t2_ = net_.Connect(2);
    a1_ = std::make_unique<Agent>(t1_.get(), config_);
    a2_ = std::make_unique<Agent>(t2_.get(), config_);
  }

  void TearDown() override { net_.Drain(); }

  void MakeFile(const std::string& path, uint16_t mode, const std::string& content = "") {
    OpenFlags f{AccessMode::kWriteOnly, true, false};
    auto fd = a1_->Open(1, kOwner, path, f, mode);
    ASSERT_TRUE(fd.ok()) << path << ": " << fd.status().ToString();
    if (!content.empty()) ASSERT_TRUE(a1_->Write(1, *fd, B(content)).ok());
    ASSERT_TRUE(a1_->Close(1, *fd).ok());
    net_.Drain();
  }

  RpcCounters Delta(Agent* a, const std::function<void()>& fn) {
    net_.Drain();
    a->ResetCounters();
    fn();
    net_.Drain();
    return a->SnapshotCounters();
  }

  SimNetwork net_{SimOptions{LatencyModel{}, true}};
  std::unique_ptr<Server> server_;
  ClusterConfig config_;
  std::unique_ptr<Transport> t1_, t2_;
  std::unique_ptr<Agent> a1_, a2_;
};

TEST_F(AgentTest, WarmOpenReadCloseIsOneRpcPlusOneMessage) {
  MakeFile("/f", 0644, "hello");
  ASSERT_TRUE(a2_->Resolve("/f").ok());
  Bytes got;
  auto c = Delta(a2_.get(), [&] {
    auto fd = a2_->Open(7, kGroupMate, "/f", OpenFlags::ReadOnly());
    ASSERT_TRUE(fd.ok());
    auto r = a2_->Read(7, *fd, 4096);
    ASSERT_TRUE(r.ok());
    got = *r;
    ASSERT_TRUE(a2_->Close(7, *fd).ok());
  });
  EXPECT_EQ(got, B("hello"));
  EXPECT_EQ(c.sync_rpcs, 1u);
  EXPECT_EQ(c.async_msgs, 1u);
  EXPECT_EQ(c.count(ReadRequest::kTag), 1u);
  EXPECT_EQ(c.count(CloseNotify::kTag), 1u);
}

TEST_F(AgentTest, OpenAloneSendsNothing) {
  MakeFile("/f", 0644);
  ASSERT_TRUE(a2_->Resolve("/f").ok());
  auto c = Delta(a2_.get(), [&] {
    auto fd = a2_->Open(1, kGroupMate, "/f", OpenFlags::ReadOnly());
    ASSERT_TRUE(fd.ok());
    EXPECT_EQ(a2_->StateOf(1, *fd), HandleState::kIncomplete);
    // Never reached the server, so there is nothing to close there.
    ASSERT_TRUE(a2_->Close(1, *fd).ok());
  });
  EXPECT_EQ(c.sync_rpcs, 0u);
  EXPECT_EQ(c.async_msgs, 0u);
  EXPECT_TRUE(server_->AdminDump().opened.empty());
}

TEST_F(AgentTest, ColdOpenFetchesEachDirectoryOnce) {
  ASSERT_TRUE(a1_->Mkdir(kOwner, "/a", 0755).ok());
  ASSERT_TRUE(a1_->Mkdir(kOwner, "/a/b", 0755).ok());
  MakeFile("/a/b/f", 0644);
  MakeFile("/a/b/g", 0644);
  auto c = Delta(a2_.get(), [&] {
    ASSERT_TRUE(a2_->Open(1, kGroupMate, "/a/b/f", OpenFlags::ReadOnly()).ok());
  });
  EXPECT_EQ(c.count(GetDirRequest::kTag), 3u);
  EXPECT_EQ(c.sync_rpcs, 3u);
  auto again = Delta(a2_.get(), [&] {
    ASSERT_TRUE(a2_->Open(1, kGroupMate, "/a/b/g", OpenFlags::ReadOnly()).ok());
  });
  EXPECT_EQ(again.sync_rpcs, 0u);
}

TEST_F(AgentTest, SiblingOpensNeedNoMetadataRpcs) {
  ASSERT_TRUE(a1_->Mkdir(kOwner, "/d", 0755).ok());
  for (int i = 0; i < 100; i++) MakeFile("/d/f" + std::to_string(i), 0644);
  ASSERT_TRUE(a2_->Open(1, kGroupMate, "/d/f0", OpenFlags::ReadOnly()).ok());
  auto c = Delta(a2_.get(), [&] {
    for (int i = 1; i < 100; i++) {
      ASSERT_TRUE(a2_->Open(1, kGroupMate, "/d/f" + std::to_string(i), OpenFlags::ReadOnly()).ok());
    }
  });
  EXPECT_EQ(c.count(GetDirRequest::kTag), 0u);
  EXPECT_EQ(c.sync_rpcs, 0u);
}

TEST_F(AgentTest, PermissionDeniedLocally) {
  MakeFile("/secret", 0600);
  ASSERT_TRUE(a2_->Resolve("/secret").ok());
  auto c = Delta(a2_.get(), [&] {
    EXPECT_TRUE(a2_->Open(1, kGroupMate, "/secret", OpenFlags::ReadOnly()).status().IsAccessDenied());
    EXPECT_TRUE(a2_->Open(1, kOther, "/secret", OpenFlags::WriteOnly()).status().IsAccessDenied());
  });
  EXPECT_EQ(c.sync_rpcs, 0u);
  EXPECT_TRUE(a2_->Open(1, kOwner, "/secret", OpenFlags::ReadWrite()).ok());
}

TEST_F(AgentTest, TraversalNeedsExecOnEveryDirectory) {
  ASSERT_TRUE(a1_->Mkdir(kOwner, "/p", 0700).ok());
  MakeFile("/p/f", 0644);
  EXPECT_TRUE(a2_->Open(1, kGroupMate, "/p/f", OpenFlags::ReadOnly()).status().IsAccessDenied());
  ASSERT_TRUE(a1_->Mkdir(kOwner, "/x", 0711).ok());
  MakeFile("/x/f", 0644);
  // EXEC without READ: traversal works, listing does not.
  EXPECT_TRUE(a2_->Open(1, kOther, "/x/f", OpenFlags::ReadOnly()).ok());
  EXPECT_TRUE(a2_->Readdir(kOther, "/x").status().IsAccessDenied());
  auto owner_list = a1_->Readdir(kOwner, "/x");
  ASSERT_TRUE(owner_list.ok());
  EXPECT_EQ(owner_list->size(), 1u);
}

TEST_F(AgentTest, MissingFileAndCreateRules) {
  EXPECT_TRUE(a2_->Open(1, kGroupMate, "/nope", OpenFlags::ReadOnly()).status().IsNotFound());
  // Root is 0755 owned by uid 1: others cannot create in it.
  OpenFlags create{AccessMode::kWriteOnly, true, false};
  EXPECT_TRUE(a2_->Open(1, kGroupMate, "/new", create, 0644).status().IsAccessDenied());
  auto fd = a1_->Open(1, kOwner, "/new", create, 0640);
  ASSERT_TRUE(fd.ok());
  auto view = a1_->Resolve("/new");
  ASSERT_TRUE(view.ok());
  EXPECT_EQ(view->entry.perm.mode, kTypeRegular | 0640);
  EXPECT_EQ(view->entry.perm.uid, 1u);
  // create on an existing file just opens it
  EXPECT_TRUE(a1_->Open(1, kOwner, "/new", create).ok());
}

TEST_F(AgentTest, DirectoryOpenedForWriteFails) {
  ASSERT_TRUE(a1_->Mkdir(kOwner, "/d", 0777).ok());
  EXPECT_EQ(a1_->Open(1, kOwner, "/d", OpenFlags::WriteOnly()).status().code(), Code::kIO);
  EXPECT_TRUE(a1_->Open(1, kOwner, "/d", OpenFlags::ReadOnly()).ok());
}

TEST_F(AgentTest, WriteThenReadWithGap) {
  MakeFile("/f", 0644);
  auto fd = a1_->Open(1, kOwner, "/f", OpenFlags::ReadWrite());
  ASSERT_TRUE(fd.ok());
  ASSERT_TRUE(a1_->Write(1, *fd, B("ab")).ok());
  ASSERT_TRUE(a1_->Seek(1, *fd, 6).ok());
  ASSERT_TRUE(a1_->Write(1, *fd, B("xyz")).ok());
  ASSERT_TRUE(a1_->Seek(1, *fd, 0).ok());
  auto r = a1_->Read(1, *fd, 100);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(*r, (Bytes{'a', 'b', 0, 0, 0, 0, 'x', 'y', 'z'}));
  // offset advanced to EOF: the next read is empty
  EXPECT_TRUE(a1_->Read(1, *fd, 100)->empty());
}

TEST_F(AgentTest, DirectionChecksAreLocal) {
  MakeFile("/f", 0666);
  auto ro = a1_->Open(1, kOwner, "/f", OpenFlags::ReadOnly());
  auto wo = a1_->Open(1, kOwner, "/f", OpenFlags::WriteOnly());
  auto c = Delta(a1_.get(), [&] {
    EXPECT_FALSE(a1_->Write(1, *ro, B("x")).ok());
    EXPECT_FALSE(a1_->Read(1, *wo, 1).ok());
  });
  EXPECT_EQ(c.sync_rpcs, 0u);
}

TEST_F(AgentTest, FdsArePerProcessAndNeverReused) {
  MakeFile("/f", 0644);
  auto a = a1_->Open(10, kOwner, "/f", OpenFlags::ReadOnly());
  auto b = a1_->Open(11, kOwner, "/f", OpenFlags::ReadOnly());
  EXPECT_EQ(*a, 3);
  EXPECT_EQ(*b, 3);
  ASSERT_TRUE(a1_->Close(10, *a).ok());
  EXPECT_EQ(a1_->Close(10, *a).code(), Code::kBadHandle);
  EXPECT_EQ(a1_->Read(10, *a, 1).status().code(), Code::kBadHandle);
  EXPECT_EQ(*a1_->Open(10, kOwner, "/f", OpenFlags::ReadOnly()), 4);
  EXPECT_EQ(a1_->Read(11, 99, 1).status().code(), Code::kBadHandle);
}

TEST_F(AgentTest, CloseAfterServerOpenReleasesRecord) {
  MakeFile("/f", 0644, "x");
  auto fd = a2_->Open(1, kGroupMate, "/f", OpenFlags::ReadOnly());
  ASSERT_TRUE(a2_->Read(1, *fd, 1).ok());
  EXPECT_EQ(a2_->StateOf(1, *fd), HandleState::kServerOpened);
  EXPECT_EQ(server_->AdminDump().opened.size(), 1u);
  ASSERT_TRUE(a2_->Close(1, *fd).ok());
  net_.Drain();
  EXPECT_TRUE(server_->AdminDump().opened.empty());
}

TEST_F(AgentTest, ChmodInvalidatesOtherCaches) {
  MakeFile("/f", 0644);
  ASSERT_TRUE(a2_->Open(1, kGroupMate, "/f", OpenFlags::ReadOnly()).ok());
  ASSERT_TRUE(a1_->Chmod(kOwner, "/f", 0600).ok());
  EXPECT_GE(a2_->invalidations_handled(), 1u);
  auto view = a2_->Peek("/f");
  EXPECT_TRUE(!view.ok() || !view->valid);
  EXPECT_TRUE(a2_->Open(1, kGroupMate, "/f", OpenFlags::ReadOnly()).status().IsAccessDenied());
  auto owner_view = a1_->Resolve("/f");
  ASSERT_TRUE(owner_view.ok());
  EXPECT_EQ(owner_view->entry.perm.mode, kTypeRegular | 0600);
}

TEST_F(AgentTest, ChmodOfDirectoryRevokesTraversal) {
  ASSERT_TRUE(a1_->Mkdir(kOwner, "/d", 0755).ok());
  MakeFile("/d/f", 0644);
  ASSERT_TRUE(a2_->Open(1, kOther, "/d/f", OpenFlags::ReadOnly()).ok());
  ASSERT_TRUE(a1_->Chmod(kOwner, "/d", 0700).ok());
  EXPECT_TRUE(a2_->Open(1, kOther, "/d/f", OpenFlags::ReadOnly()).status().IsAccessDenied());
}

TEST_F(AgentTest, ChmodByNonOwnerRejected) {
  MakeFile("/f", 0644);
  EXPECT_TRUE(a2_->Chmod(kGroupMate, "/f", 0777).IsAccessDenied());
}

TEST_F(AgentTest, CreateByOtherClientBecomesVisible) {
  ASSERT_TRUE(a2_->Resolve("/").ok());
  EXPECT_TRUE(a2_->Open(1, kGroupMate, "/late", OpenFlags::ReadOnly()).status().IsNotFound());
  MakeFile("/late", 0644);
  EXPECT_TRUE(a2_->Open(1, kGroupMate, "/late", OpenFlags::ReadOnly()).ok());
}

TEST_F(AgentTest, DeferredOpenRefusedAfterRevocation) {
  MakeFile("/f", 0644, "x");
  auto fd = a2_->Open(1, kGroupMate, "/f", OpenFlags::ReadOnly());
  ASSERT_TRUE(fd.ok());
  ASSERT_TRUE(a1_->Chmod(kOwner, "/f", 0600).ok());
  EXPECT_TRUE(a2_->Read(1, *fd, 1).status().IsAccessDenied());
  EXPECT_EQ(a2_->StateOf(1, *fd), HandleState::kIncomplete);
}

TEST_F(AgentTest, ServerRestartWithNewVersion) {
  MakeFile("/f", 0644, "x");
  auto fd = a2_->Open(1, kGroupMate, "/f", OpenFlags::ReadOnly());
  ASSERT_TRUE(fd.ok());

  // A new incarnation replaces the server at the same address.
  ServerOptions o;
  o.deadline_timer = false;
  o.version = server_->version() + 1;
  o.root_perm = PermissionRecord{1, 1, static_cast<uint16_t>(kTypeDirectory | 0755)};
  auto next = std::make_unique<Server>(o, net_.NotifierFor(kAddr));
  net_.AttachServer(kAddr, next.get());
  ClusterConfig fresh;
  fresh.AddServer(1, o.version, kAddr);
  fresh.SetHome(1, o.version);

  // Handles on inodes of the old incarnation are refused.
  EXPECT_TRUE(a2_->Read(1, *fd, 1).status().IsStaleInode());
  // Without a configuration source the agent cannot find the new root.
  EXPECT_TRUE(a2_->Resolve("/").status().IsStaleInode());

  // With one, the walk restarts on the new incarnation's root.
  auto t3 = net_.Connect(3);
  Agent agent(t3.get(), config_, AgentOptions{[fresh] { return Result<ClusterConfig>(fresh); }});
  auto created = agent.Open(1, kOwner, "/g", OpenFlags{AccessMode::kWriteOnly, true, false});
  EXPECT_TRUE(created.ok()) << created.status().ToString();
  auto root = agent.Resolve("/");
  ASSERT_TRUE(root.ok());
  EXPECT_EQ(root->entry.inode.version, o.version);
  net_.Drain();
  server_ = std::move(next);
}

TEST_F(AgentTest, ResolveAndPeekExposeCache) {
  ASSERT_TRUE(a1_->Mkdir(kOwner, "/d", 0755).ok());
  EXPECT_FALSE(a2_->Peek("/d").ok());
  auto r = a2_->Resolve("/d");
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(r->entry.perm.is_dir());
  auto p = a2_->Peek("/d");
  ASSERT_TRUE(p.ok());
  EXPECT_TRUE(p->valid);
  a2_->DropCache();
  EXPECT_FALSE(a2_->Peek("/d").ok());
}

}  // namespace
}  // namespace buffetfs
