#include "buffetfs/server.h"

#include <gtest/gtest.h>

#include <optional>

namespace buffetfs {
namespace {

constexpr uint16_t kDir = kTypeDirectory;
constexpr uint16_t kReg = kTypeRegular;

class RecordingNotifier : public ClientNotifier {
 public:
  bool Push(ClientId to, const RpcMessage& msg) override {
    if (offline.count(to)) return false;
    pushes.emplace_back(to, msg);
    return true;
  }
  std::vector<std::pair<ClientId, RpcMessage>> pushes;
  std::set<ClientId> offline;
};

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServerOptions o;
    o.deadline_timer = false;
    o.ack_deadline = std::chrono::milliseconds(100);
    o.root_perm = PermissionRecord{1, 1, static_cast<uint16_t>(kDir | 0755)};
    server_ = std::make_unique<Server>(o, &notifier_);
    root_ = server_->RootInode();
  }

  // Issues a call; the reply may arrive later.
  std::shared_ptr<std::optional<RpcMessage>> Start(ClientId from, RpcMessage req) {
    auto slot = std::make_shared<std::optional<RpcMessage>>();
    server_->HandleCall(from, std::move(req), [slot](RpcMessage r) { *slot = std::move(r); });
    return slot;
  }

  RpcMessage Call(ClientId from, RpcMessage req) {
    auto slot = Start(from, std::move(req));
    EXPECT_TRUE(slot->has_value()) << "reply deferred";
    return slot->has_value() ? **slot : RpcMessage(ErrorReply{Code::kIO, "deferred"});
  }

  DirEntryRecord Create(const BuffetInode& parent, const std::string& name, uint16_t mode,
                        uint32_t uid = 1) {
    auto r = Expect<CreateReply>(
        Call(9, CreateRequest{parent, name, PermissionRecord{uid, 1, mode}, (mode & kDir) != 0}));
    EXPECT_TRUE(r.ok()) << r.status().ToString();
    return r.ok() ? r->entry : DirEntryRecord{};
  }

  Result<GetDirReply> GetDir(ClientId c, const BuffetInode& dir) {
    return Expect<GetDirReply>(Call(c, GetDirRequest{dir, c}));
  }

  Result<ReadReply> Read(ClientId c, const BuffetInode& f, uint64_t token, uint64_t off, uint32_t len,
                         std::optional<DeferredOpen> d = std::nullopt) {
    return Expect<ReadReply>(Call(c, ReadRequest{f, token, off, len, d}));
  }

  Result<WriteReply> Write(ClientId c, const BuffetInode& f, uint64_t token, uint64_t off,
                           const std::string& s, std::optional<DeferredOpen> d = std::nullopt) {
    return Expect<WriteReply>(Call(c, WriteRequest{f, token, off, Bytes(s.begin(), s.end()), d}));
  }

  std::vector<ClientId> RegistryOf(uint64_t dir) {
    for (const auto& e : server_->AdminDump().registry) {
      if (e.dir_id == dir) return e.clients;
    }
    return {};
  }

  RecordingNotifier notifier_;
  std::unique_ptr<Server> server_;
  BuffetInode root_;
};

TEST_F(ServerTest, GetDirListsEntriesAndRegistersClient) {
  Create(root_, "b", kReg | 0600);
  Create(root_, "a", kDir | 0750);
  auto r = GetDir(4, root_);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r->entries.size(), 2u);
  EXPECT_EQ(r->entries[0].name, "a");
  EXPECT_EQ(r->entries[0].perm.mode, kDir | 0750);
  EXPECT_EQ(r->entries[1].perm.mode, kReg | 0600);
  EXPECT_EQ(r->dir_meta.perm.mode, kDir | 0755);
  EXPECT_EQ(RegistryOf(kRootFileId), std::vector<ClientId>{4});
}

TEST_F(ServerTest, GetDirErrors) {
  auto f = Create(root_, "f", kReg | 0644);
  EXPECT_EQ(GetDir(1, f.inode).status().code(), Code::kNotADirectory);
  EXPECT_EQ(GetDir(1, BuffetInode{1, 999, root_.version}).status().code(), Code::kNotFound);
  BuffetInode old = root_;
  old.version++;
  EXPECT_EQ(GetDir(1, old).status().code(), Code::kStaleInode);
}

TEST_F(ServerTest, CreateErrors) {
  auto f = Create(root_, "f", kReg | 0644);
  auto dup = Expect<CreateReply>(
      Call(9, CreateRequest{root_, "f", PermissionRecord{1, 1, kReg | 0644}, false}));
  EXPECT_EQ(dup.status().code(), Code::kExists);
  auto under_file = Expect<CreateReply>(
      Call(9, CreateRequest{f.inode, "x", PermissionRecord{1, 1, kReg | 0644}, false}));
  EXPECT_EQ(under_file.status().code(), Code::kNotADirectory);
}

TEST_F(ServerTest, DeferredOpenInsertsOpenRecord) {
  auto f = Create(root_, "f", kReg | 0644);
  EXPECT_TRUE(server_->AdminDump().opened.empty());
  auto r = Read(2, f.inode, 77, 0, 10, DeferredOpen{77, OpenFlags::ReadOnly(), {2, 2}});
  ASSERT_TRUE(r.ok()) << r.status().ToString();
  auto dump = server_->AdminDump();
  ASSERT_EQ(dump.opened.size(), 1u);
  EXPECT_EQ(dump.opened[0].open_token, 77u);
  EXPECT_EQ(dump.opened[0].client_id, 2u);
  EXPECT_EQ(dump.opened[0].file_id, f.inode.file_id);
  // Later RPCs on the same token need no deferred open.
  EXPECT_TRUE(Read(2, f.inode, 77, 0, 10).ok());
  // The token is per client.
  EXPECT_EQ(Read(3, f.inode, 77, 0, 10).status().code(), Code::kBadHandle);
  server_->HandleOneWay(2, CloseNotify{f.inode, 77, 2});
  EXPECT_TRUE(server_->AdminDump().opened.empty());
  EXPECT_EQ(Read(2, f.inode, 77, 0, 10).status().code(), Code::kBadHandle);
}

TEST_F(ServerTest, DeferredOpenRevalidatesPermission) {
  auto f = Create(root_, "f", kReg | 0600);
  auto r = Read(2, f.inode, 1, 0, 10, DeferredOpen{1, OpenFlags::ReadOnly(), {2, 2}});
  EXPECT_TRUE(r.status().IsAccessDenied());
  EXPECT_TRUE(server_->AdminDump().opened.empty());
  auto w = Write(1, f.inode, 1, 0, "x", DeferredOpen{1, OpenFlags::ReadOnly(), {1, 1}});
  EXPECT_TRUE(w.status().IsAccessDenied());  // read-only handle
}

TEST_F(ServerTest, WriteZeroFillsGapAndReadsShortAtEof) {
  auto f = Create(root_, "f", kReg | 0644);
  auto w = Write(1, f.inode, 5, 5, "ab", DeferredOpen{5, OpenFlags::ReadWrite(), {1, 1}});
  ASSERT_TRUE(w.ok()) << w.status().ToString();
  EXPECT_EQ(w->bytes_written, 2u);
  EXPECT_EQ(w->file_meta.size, 7u);
  auto r = Read(1, f.inode, 5, 0, 100);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->data, (Bytes{0, 0, 0, 0, 0, 'a', 'b'}));
  auto past = Read(1, f.inode, 5, 50, 10);
  ASSERT_TRUE(past.ok());
  EXPECT_TRUE(past->data.empty());
  auto mid = Read(1, f.inode, 5, 6, 10);
  EXPECT_EQ(mid->data, (Bytes{'b'}));
}

TEST_F(ServerTest, DeferredTruncateRunsOnFirstWrite) {
  auto f = Create(root_, "f", kReg | 0644);
  ASSERT_TRUE(Write(1, f.inode, 1, 0, "hello", DeferredOpen{1, OpenFlags::WriteOnly(), {1, 1}}).ok());
  OpenFlags trunc{AccessMode::kReadWrite, false, true};
  ASSERT_TRUE(Write(1, f.inode, 2, 0, "X", DeferredOpen{2, trunc, {1, 1}}).ok());
  auto r = Read(1, f.inode, 2, 0, 10);
  EXPECT_EQ(r->data, (Bytes{'X'}));
}

TEST_F(ServerTest, ChmodWithoutCachersAppliesAtOnce) {
  auto f = Create(root_, "f", kReg | 0644);
  auto r = Expect<SetPermissionReply>(
      Call(1, SetPermissionRequest{f.inode, PermissionRecord{1, 1, kReg | 0600}, {1, 1}}));
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(server_->PermissionOf(f.inode.file_id)->mode, kReg | 0600);
  EXPECT_TRUE(notifier_.pushes.empty());
}

TEST_F(ServerTest, ChmodByNonOwnerDenied) {
  auto f = Create(root_, "f", kReg | 0644);
  auto r = Expect<SetPermissionReply>(
      Call(2, SetPermissionRequest{f.inode, PermissionRecord{1, 1, kReg | 0777}, {2, 1}}));
  EXPECT_TRUE(r.status().IsAccessDenied());
  EXPECT_EQ(server_->PermissionOf(f.inode.file_id)->mode, kReg | 0644);
}

TEST_F(ServerTest, ChmodWaitsForEveryAckAndHoldsParentListing) {
  auto d = Create(root_, "d", kDir | 0755);
  auto f = Create(d.inode, "f", kReg | 0644);
  ASSERT_TRUE(GetDir(2, d.inode).ok());
  ASSERT_TRUE(GetDir(3, d.inode).ok());

  auto chmod = Start(1, SetPermissionRequest{f.inode, PermissionRecord{1, 1, kReg | 0600}, {1, 1}});
  EXPECT_FALSE(chmod->has_value());
  ASSERT_EQ(notifier_.pushes.size(), 2u);
  auto inv = std::get<InvalidateRequest>(notifier_.pushes[0].second);
  EXPECT_EQ(inv.targets, (std::vector<BuffetInode>{f.inode, d.inode}));
  EXPECT_TRUE(RegistryOf(d.inode.file_id).empty());  // removed at push time

  auto dump = server_->AdminDump();
  EXPECT_TRUE(dump.round_active);
  EXPECT_EQ(dump.awaiting_acks, 2u);
  EXPECT_EQ(server_->PermissionOf(f.inode.file_id)->mode, kReg | 0644);

  auto held = Start(4, GetDirRequest{d.inode, 4});
  EXPECT_FALSE(held->has_value());
  EXPECT_EQ(server_->AdminDump().held_get_dirs, 1u);
  // Other directories are not held.
  EXPECT_TRUE(GetDir(4, root_).ok());

  server_->HandleOneWay(2, InvalidateAck{inv.epoch, 2});
  EXPECT_FALSE(chmod->has_value());
  server_->HandleOneWay(3, InvalidateAck{inv.epoch + 100, 3});  // wrong epoch, ignored
  EXPECT_FALSE(chmod->has_value());
  server_->HandleOneWay(3, InvalidateAck{inv.epoch, 3});
  ASSERT_TRUE(chmod->has_value());
  EXPECT_TRUE(Expect<SetPermissionReply>(**chmod).ok());
  EXPECT_EQ(server_->PermissionOf(f.inode.file_id)->mode, kReg | 0600);
  ASSERT_TRUE(held->has_value());
  auto listing = Expect<GetDirReply>(**held);
  ASSERT_TRUE(listing.ok());
  EXPECT_EQ(listing->entries[0].perm.mode, kReg | 0600);
  dump = server_->AdminDump();
  EXPECT_FALSE(dump.round_active);
  EXPECT_EQ(dump.held_get_dirs, 0u);
}

TEST_F(ServerTest, DirectoryChmodHoldsItsOwnListingToo) {
  auto d = Create(root_, "d", kDir | 0755);
  ASSERT_TRUE(GetDir(2, root_).ok());
  auto chmod = Start(1, SetPermissionRequest{d.inode, PermissionRecord{1, 1, kDir | 0700}, {1, 1}});
  ASSERT_FALSE(chmod->has_value());
  auto inside = Start(3, GetDirRequest{d.inode, 3});
  EXPECT_FALSE(inside->has_value());
  auto inv = std::get<InvalidateRequest>(notifier_.pushes.back().second);
  server_->HandleOneWay(2, InvalidateAck{inv.epoch, 2});
  ASSERT_TRUE(inside->has_value());
  EXPECT_EQ(Expect<GetDirReply>(**inside)->dir_meta.perm.mode, kDir | 0700);
}

TEST_F(ServerTest, DirectoryChmodInvalidatesCachersOfItsOwnListing) {
  // Client 3 caches only the listing of /d, whose reply carries /d's record.
  auto d = Create(root_, "d", kDir | 0755);
  ASSERT_TRUE(GetDir(3, d.inode).ok());
  auto chmod = Start(1, SetPermissionRequest{d.inode, PermissionRecord{1, 1, kDir | 0750}, {1, 1}});
  ASSERT_FALSE(chmod->has_value());
  ASSERT_EQ(notifier_.pushes.size(), 1u);
  EXPECT_EQ(notifier_.pushes[0].first, 3u);
  auto inv = std::get<InvalidateRequest>(notifier_.pushes[0].second);
  server_->HandleOneWay(3, InvalidateAck{inv.epoch, 3});
  ASSERT_TRUE(chmod->has_value());
  EXPECT_EQ(server_->PermissionOf(d.inode.file_id)->mode, kDir | 0750);
}

TEST_F(ServerTest, ListingReleasedByOneRoundIsInvalidatedByTheNext) {
  auto d = Create(root_, "d", kDir | 0755);
  ASSERT_TRUE(GetDir(2, root_).ok());
  auto c1 = Start(1, SetPermissionRequest{d.inode, PermissionRecord{1, 1, kDir | 0705}, {1, 1}});
  auto c2 = Start(1, SetPermissionRequest{d.inode, PermissionRecord{1, 1, kDir | 0750}, {1, 1}});
  auto inside = Start(3, GetDirRequest{d.inode, 3});
  auto inv = std::get<InvalidateRequest>(notifier_.pushes.back().second);
  server_->HandleOneWay(2, InvalidateAck{inv.epoch, 2});
  ASSERT_TRUE(c1->has_value());
  ASSERT_TRUE(inside->has_value());
  EXPECT_EQ(Expect<GetDirReply>(**inside)->dir_meta.perm.mode, kDir | 0705);
  // The released listing registered client 3, so the second round waits for it.
  EXPECT_FALSE(c2->has_value());
  EXPECT_EQ(notifier_.pushes.back().first, 3u);
  inv = std::get<InvalidateRequest>(notifier_.pushes.back().second);
  server_->HandleOneWay(3, InvalidateAck{inv.epoch, 3});
  ASSERT_TRUE(c2->has_value());
  EXPECT_EQ(server_->PermissionOf(d.inode.file_id)->mode, kDir | 0750);
}

TEST_F(ServerTest, RoundsRunOneAtATimeInOrder) {
  auto f = Create(root_, "f", kReg | 0644);
  auto g = Create(root_, "g", kReg | 0644);
  ASSERT_TRUE(GetDir(2, root_).ok());
  auto c1 = Start(1, SetPermissionRequest{f.inode, PermissionRecord{1, 1, kReg | 0600}, {1, 1}});
  auto c2 = Start(1, SetPermissionRequest{g.inode, PermissionRecord{1, 1, kReg | 0600}, {1, 1}});
  ASSERT_EQ(notifier_.pushes.size(), 1u);
  auto inv = std::get<InvalidateRequest>(notifier_.pushes[0].second);
  server_->HandleOneWay(2, InvalidateAck{inv.epoch, 2});
  EXPECT_TRUE(c1->has_value());
  // Client 2 is no longer registered, so the second round needs no acks.
  EXPECT_TRUE(c2->has_value());
  EXPECT_EQ(server_->PermissionOf(g.inode.file_id)->mode, kReg | 0600);
}

TEST_F(ServerTest, AckDeadlineAbortsRound) {
  auto f = Create(root_, "f", kReg | 0644);
  ASSERT_TRUE(GetDir(2, root_).ok());
  auto chmod = Start(1, SetPermissionRequest{f.inode, PermissionRecord{1, 1, kReg | 0600}, {1, 1}});
  auto held = Start(3, GetDirRequest{root_, 3});
  EXPECT_EQ(server_->ExpireOverdueRounds(std::chrono::steady_clock::now()), 0);
  EXPECT_EQ(server_->ExpireOverdueRounds(std::chrono::steady_clock::now() + std::chrono::hours(1)), 1);
  ASSERT_TRUE(chmod->has_value());
  EXPECT_EQ(Expect<SetPermissionReply>(**chmod).status().code(), Code::kIO);
  EXPECT_EQ(server_->PermissionOf(f.inode.file_id)->mode, kReg | 0644);
  EXPECT_TRUE(held->has_value());
  // The silent client may still cache the listing, so it stays registered.
  auto reg = RegistryOf(kRootFileId);
  EXPECT_NE(std::find(reg.begin(), reg.end(), 2u), reg.end());
}

TEST_F(ServerTest, UnreachableClientIsDroppedFromRound) {
  auto f = Create(root_, "f", kReg | 0644);
  ASSERT_TRUE(GetDir(2, root_).ok());
  notifier_.offline.insert(2);
  auto chmod = Start(1, SetPermissionRequest{f.inode, PermissionRecord{1, 1, kReg | 0600}, {1, 1}});
  ASSERT_TRUE(chmod->has_value());
  EXPECT_EQ(server_->PermissionOf(f.inode.file_id)->mode, kReg | 0600);
}

TEST_F(ServerTest, CreateInvalidatesParentCachers) {
  ASSERT_TRUE(GetDir(2, root_).ok());
  auto create = Start(9, CreateRequest{root_, "n", PermissionRecord{1, 1, kReg | 0644}, false});
  EXPECT_FALSE(create->has_value());
  ASSERT_EQ(notifier_.pushes.size(), 1u);
  auto inv = std::get<InvalidateRequest>(notifier_.pushes[0].second);
  EXPECT_EQ(inv.targets, std::vector<BuffetInode>{root_});
  server_->HandleOneWay(2, InvalidateAck{inv.epoch, 2});
  ASSERT_TRUE(create->has_value());
  EXPECT_TRUE(Expect<CreateReply>(**create).ok());
}

TEST_F(ServerTest, BaselineOpenResolvesPathWithTraversalChecks) {
  auto d = Create(root_, "d", kDir | 0700);
  auto f = Create(d.inode, "f", kReg | 0644);
  BaselineOpenRequest req;
  req.path = "/d/f";
  req.flags = OpenFlags::ReadOnly();
  req.cred = {1, 1};
  req.open_token = 3;
  req.client_id = 1;
  auto ok = Expect<BaselineOpenReply>(Call(1, req));
  ASSERT_TRUE(ok.ok()) << ok.status().ToString();
  EXPECT_EQ(ok->entry.inode, f.inode);
  EXPECT_FALSE(ok->inline_data.has_value());
  EXPECT_EQ(server_->AdminDump().opened.size(), 1u);

  req.cred = {2, 1};  // no EXEC on /d
  EXPECT_TRUE(Expect<BaselineOpenReply>(Call(2, req)).status().IsAccessDenied());
  req.path = "/d/missing";
  req.cred = {1, 1};
  EXPECT_EQ(Expect<BaselineOpenReply>(Call(1, req)).status().code(), Code::kNotFound);
}

TEST_F(ServerTest, BaselineOpenInlinesSmallFiles) {
  auto f = Create(root_, "f", kReg | 0644);
  ASSERT_TRUE(Write(1, f.inode, 1, 0, "data", DeferredOpen{1, OpenFlags::WriteOnly(), {1, 1}}).ok());
  BaselineOpenRequest req;
  req.path = "/f";
  req.flags = OpenFlags::ReadOnly();
  req.cred = {1, 1};
  req.open_token = 2;
  req.client_id = 1;
  req.inline_limit = 4;
  auto r = Expect<BaselineOpenReply>(Call(1, req));
  ASSERT_TRUE(r.ok());
  ASSERT_TRUE(r->inline_data.has_value());
  EXPECT_EQ(*r->inline_data, (Bytes{'d', 'a', 't', 'a'}));
  req.inline_limit = 3;
  req.open_token = 3;
  EXPECT_FALSE(Expect<BaselineOpenReply>(Call(1, req))->inline_data.has_value());
}

TEST_F(ServerTest, BaselineOpenCreates) {
  BaselineOpenRequest req;
  req.path = "/new";
  req.flags = OpenFlags{AccessMode::kWriteOnly, true, false};
  req.cred = {1, 1};
  req.open_token = 1;
  req.client_id = 1;
  req.create_mode = 0640;
  auto r = Expect<BaselineOpenReply>(Call(1, req));
  ASSERT_TRUE(r.ok()) << r.status().ToString();
  EXPECT_EQ(r->entry.perm.mode, kReg | 0640);
  EXPECT_EQ(r->entry.perm.uid, 1u);
}

TEST_F(ServerTest, AdminDumpListsFiles) {
  Create(root_, "a", kReg | 0644);
  Create(root_, "b", kDir | 0755);
  auto dump = Expect<AdminDumpReply>(Call(1, AdminDumpRequest{}));
  ASSERT_TRUE(dump.ok());
  EXPECT_EQ(dump->files.size(), 3u);
  EXPECT_EQ(dump->files[0].inode.file_id, kRootFileId);
  EXPECT_EQ(dump->version, server_->version());
}

}  // namespace
}  // namespace buffetfs
