#include "buffetfs/types.h"

#include <gtest/gtest.h>

#include <string>

#include "oracles.h"

namespace buffetfs {
namespace {

using testing::OracleAllows;

TEST(CheckPermissionTest, MatchesBruteForceOracle) {
  // uid 10 gid 20 owns every file; the three callers fall into one class each.
  const Credentials callers[3] = {{10, 99}, {11, 20}, {12, 21}};
  int checked = 0;
  for (uint16_t bits = 0; bits < 512; bits++) {
    for (uint16_t type : {kTypeRegular, kTypeDirectory}) {
      PermissionRecord perm{10, 20, static_cast<uint16_t>(type | bits)};
      for (int cls = 0; cls < 3; cls++) {
        for (uint8_t want = 1; want <= 7; want++) {
          ASSERT_EQ(CheckPermission(perm, callers[cls], AccessMask(want)),
                    OracleAllows(bits, cls, want))
              << "mode " << std::oct << bits << " class " << cls << " want " << int(want);
          checked++;
        }
      }
    }
  }
  EXPECT_EQ(checked, 512 * 2 * 3 * 7);
}

TEST(CheckPermissionTest, OwnerClassWinsOverGroup) {
  // Owner bits apply even when the group bits would grant more.
  PermissionRecord perm{5, 5, static_cast<uint16_t>(kTypeRegular | 0070)};
  EXPECT_FALSE(CheckPermission(perm, {5, 5}, AccessMask::Read()));
  EXPECT_TRUE(CheckPermission(perm, {6, 5}, AccessMask::Read()));
}

TEST(CheckPermissionTest, EmptyMaskAlwaysAllowed) {
  PermissionRecord perm{1, 1, static_cast<uint16_t>(kTypeRegular | 0000)};
  EXPECT_TRUE(CheckPermission(perm, {2, 2}, AccessMask()));
}

TEST(AccessMaskForTest, FlagsToMask) {
  EXPECT_EQ(AccessMaskFor(OpenFlags::ReadOnly()), AccessMask::Read());
  EXPECT_EQ(AccessMaskFor(OpenFlags::WriteOnly()), AccessMask::Write());
  EXPECT_EQ(AccessMaskFor(OpenFlags::ReadWrite()), AccessMask(6));
  OpenFlags trunc{AccessMode::kWriteOnly, false, true};
  EXPECT_EQ(AccessMaskFor(trunc), AccessMask::Write());
  OpenFlags create{AccessMode::kReadOnly, true, false};
  EXPECT_EQ(AccessMaskFor(create), AccessMask::Read());
}

TEST(AccessMaskTest, ToString) {
  EXPECT_EQ(AccessMask(7).ToString(), "rwx");
  EXPECT_EQ(AccessMask(5).ToString(), "r-x");
  EXPECT_EQ(AccessMask().ToString(), "---");
}

TEST(OpenFlagsTest, TruncateNeedsWrite) {
  EXPECT_TRUE(OpenFlags::ReadOnly().WellFormed());
  EXPECT_FALSE((OpenFlags{AccessMode::kReadOnly, false, true}).WellFormed());
  EXPECT_TRUE((OpenFlags{AccessMode::kReadWrite, true, true}).WellFormed());
}

TEST(PermissionRecordTest, WellFormed) {
  EXPECT_TRUE((PermissionRecord{0, 0, static_cast<uint16_t>(kTypeRegular | 0644)}).WellFormed());
  EXPECT_TRUE((PermissionRecord{0, 0, static_cast<uint16_t>(kTypeDirectory | 0755)}).WellFormed());
  EXPECT_FALSE((PermissionRecord{0, 0, 0644}).WellFormed());
  EXPECT_FALSE((PermissionRecord{0, 0, static_cast<uint16_t>(kTypeRegular | kTypeDirectory)}).WellFormed());
  EXPECT_FALSE((PermissionRecord{0, 0, static_cast<uint16_t>(kTypeRegular | 04755)}).WellFormed());
}

TEST(SplitPathTest, Components) {
  auto root = SplitPath("/");
  ASSERT_TRUE(root.ok());
  EXPECT_TRUE(root->empty());
  auto p = SplitPath("/a/bb/c");
  ASSERT_TRUE(p.ok());
  EXPECT_EQ(*p, (std::vector<std::string>{"a", "bb", "c"}));
}

TEST(SplitPathTest, RejectsUnnormalized) {
  for (const char* bad : {"", "a/b", "/a//b", "/a/", "/a/./b", "/..", "/a/../b"}) {
    EXPECT_FALSE(SplitPath(bad).ok()) << bad;
  }
}

TEST(EntryNameTest, Rules) {
  EXPECT_TRUE(ValidEntryName("f0"));
  EXPECT_TRUE(ValidEntryName("..."));
  EXPECT_FALSE(ValidEntryName(""));
  EXPECT_FALSE(ValidEntryName("."));
  EXPECT_FALSE(ValidEntryName(".."));
  EXPECT_FALSE(ValidEntryName("a/b"));
}

TEST(ClusterConfigTest, ResolveAndHome) {
  ClusterConfig c;
  c.AddServer(1, 2, "bserver:1");
  c.SetHome(1, 2);
  EXPECT_EQ(*c.HomeAddress(), "bserver:1");
  EXPECT_EQ(c.RootInode(), (BuffetInode{1, kRootFileId, 2}));
  EXPECT_EQ(c.Resolve(1, 3).status().code(), Code::kStaleInode);
  c.RemoveServer(1, 2);
  EXPECT_FALSE(c.HomeAddress().ok());
}

TEST(BuffetInodeTest, OrderingAndHash) {
  BuffetInode a{1, 5, 1}, b{1, 5, 2};
  EXPECT_NE(a, b);
  EXPECT_NE(std::hash<BuffetInode>()(a), std::hash<BuffetInode>()(b));
  EXPECT_EQ(std::hash<BuffetInode>()(a), std::hash<BuffetInode>()(BuffetInode{1, 5, 1}));
}

TEST(StatusTest, CodeNames) {
  EXPECT_STREQ(CodeName(Code::kAccessDenied), "ACCESS_DENIED");
  EXPECT_STREQ(CodeName(Code::kNotFound), "NOT_FOUND");
  EXPECT_STREQ(CodeName(Code::kStaleInode), "STALE_INODE");
  EXPECT_TRUE(IsWireCode(1));
  EXPECT_TRUE(IsWireCode(7));
  EXPECT_FALSE(IsWireCode(0));
  EXPECT_FALSE(IsWireCode(8));
}

}  // namespace
}  // namespace buffetfs
