#include <gtest/gtest.h>

#include <map>

#include "buffetfs/codec.h"
#include "buffetfs/wire.h"
#include "gen.h"

namespace buffetfs {
namespace {

using testing::Gen;

TEST(PermCodecTest, LayoutIsUidGidModeLittleEndian) {
  PermissionRecord p{0x01020304, 0x0A0B0C0D, static_cast<uint16_t>(kTypeRegular | 0644)};
  auto blob = EncodePerm(p);
  const uint8_t want[10] = {0x04, 0x03, 0x02, 0x01, 0x0D, 0x0C, 0x0B, 0x0A, 0xA4, 0x81};
  ASSERT_EQ(blob.size(), 10u);
  for (size_t i = 0; i < 10; i++) EXPECT_EQ(blob[i], want[i]) << "byte " << i;
}

TEST(PermCodecTest, RoundtripProperty) {
  Gen g(11);
  for (int i = 0; i < 20000; i++) {
    PermissionRecord p;
    g.Fill(&p);
    auto back = DecodePerm(EncodePerm(p));
    ASSERT_TRUE(back.ok());
    ASSERT_EQ(*back, p);
  }
}

TEST(PermCodecTest, WrongSizeRejected) {
  Bytes nine(9), eleven(11);
  EXPECT_EQ(DecodePerm(nine).status().code(), Code::kCorruption);
  EXPECT_EQ(DecodePerm(eleven).status().code(), Code::kCorruption);
}

TEST(InodeCodecTest, LayoutAndRoundtrip) {
  BuffetInode in{7, 0x1122334455667788ull, 3};
  auto blob = EncodeInode(in);
  ASSERT_EQ(blob.size(), 16u);
  EXPECT_EQ(blob[0], 7);   // host_id
  EXPECT_EQ(blob[4], 3);   // version
  EXPECT_EQ(blob[8], 0x88);  // file_id, low byte first
  EXPECT_EQ(blob[15], 0x11);
  Gen g(12);
  for (int i = 0; i < 20000; i++) {
    BuffetInode x;
    g.Fill(&x);
    auto back = DecodeInode(EncodeInode(x));
    ASSERT_TRUE(back.ok());
    ASSERT_EQ(*back, x);
  }
  EXPECT_FALSE(DecodeInode(Bytes(15)).ok());
}

TEST(WireTest, RandomMessagesRoundtrip) {
  Gen g(13);
  std::map<uint8_t, int> seen;
  for (int i = 0; i < 10000; i++) {
    RpcMessage m = g.Message();
    Bytes frame = EncodeMessage(m);
    auto back = DecodeMessage(frame);
    ASSERT_TRUE(back.ok()) << MessageName(TagOf(m)) << ": " << back.status().ToString();
    ASSERT_TRUE(*back == m) << MessageName(TagOf(m));
    ASSERT_EQ(EncodeMessage(*back), frame);
    seen[TagOf(m)]++;
  }
  EXPECT_EQ(seen.size(), static_cast<size_t>(kMaxTag));  // every type exercised
}

TEST(WireTest, FrameHeader) {
  Bytes f = EncodeMessage(SetPermissionReply{true});
  ASSERT_EQ(f.size(), kFrameHeaderSize + 1);
  EXPECT_EQ(std::string(f.begin(), f.begin() + 4), "BFS1");
  EXPECT_EQ(f[4], SetPermissionReply::kTag);
  EXPECT_EQ(f[5], 1);
  EXPECT_EQ(f[6] | f[7] | f[8], 0);
}

TEST(WireTest, TagsMatchVariantOrder) {
  EXPECT_EQ(TagOf(GetDirRequest{}), GetDirRequest::kTag);
  EXPECT_EQ(TagOf(InvalidateAck{}), InvalidateAck::kTag);
  EXPECT_EQ(TagOf(ErrorReply{}), ErrorReply::kTag);
  EXPECT_EQ(TagOf(BarrierReply{}), BarrierReply::kTag);
  EXPECT_EQ(kMaxTag, 21);
}

TEST(WireTest, EveryPrefixOfAFrameIsRejected) {
  Gen g(14);
  for (int i = 0; i < 300; i++) {
    Bytes frame = EncodeMessage(g.Message());
    for (size_t cut = 0; cut < frame.size(); cut++) {
      std::span<const uint8_t> prefix(frame.data(), cut);
      ASSERT_FALSE(DecodeMessage(prefix).ok()) << "cut " << cut;
    }
  }
}

TEST(WireTest, CorruptHeadersRejected) {
  Bytes f = EncodeMessage(GetDirRequest{{1, 2, 3}, 4});
  Bytes bad_magic = f;
  bad_magic[0] = 'X';
  EXPECT_EQ(DecodeMessage(bad_magic).status().code(), Code::kCorruption);
  Bytes bad_tag = f;
  bad_tag[4] = 0;
  EXPECT_FALSE(DecodeMessage(bad_tag).ok());
  bad_tag[4] = kMaxTag + 1;
  EXPECT_FALSE(DecodeMessage(bad_tag).ok());
  Bytes trailing = f;
  trailing.push_back(0);
  EXPECT_FALSE(DecodeMessage(trailing).ok());
  Bytes huge = f;
  huge[8] = 0x7F;
  EXPECT_FALSE(DecodeFrameHeader(huge).ok());
}

TEST(WireTest, OutOfRangeEnumsRejected) {
  BaselineOpenRequest req;
  Bytes f = EncodeMessage(req);
  // path is an empty string (2 bytes), then the flags' access byte.
  f[kFrameHeaderSize + 2] = 3;
  EXPECT_EQ(DecodeMessage(f).status().code(), Code::kCorruption);

  ErrorReply e{Code::kNotFound, ""};
  Bytes g = EncodeMessage(e);
  g[kFrameHeaderSize] = 64;  // a local-only code never travels
  EXPECT_FALSE(DecodeMessage(g).ok());
}

TEST(WireTest, OversizedVectorCountRejected) {
  GetDirReply r;
  Bytes f = EncodeMessage(r);
  f[kFrameHeaderSize + 3] = 0x10;  // claims 2^28 entries
  EXPECT_FALSE(DecodeMessage(f).ok());
}

TEST(WireTest, ErrorMapping) {
  ErrorReply e = MakeError(Status::AccessDenied("nope"));
  EXPECT_EQ(e.code, Code::kAccessDenied);
  EXPECT_EQ(ToStatus(e).message(), "nope");
  EXPECT_EQ(MakeError(Status::InvalidArgument("x")).code, Code::kIO);
  auto r = Expect<ReadReply>(RpcMessage(e));
  EXPECT_TRUE(r.status().IsAccessDenied());
  auto wrong = Expect<ReadReply>(RpcMessage(WriteReply{}));
  EXPECT_EQ(wrong.status().code(), Code::kCorruption);
}

TEST(WireTest, CallAndOneWayClassification) {
  EXPECT_TRUE(IsCallRequest(GetDirRequest::kTag));
  EXPECT_TRUE(IsCallRequest(BaselineOpenRequest::kTag));
  EXPECT_FALSE(IsCallRequest(CloseNotify::kTag));
  EXPECT_TRUE(IsOneWay(CloseNotify::kTag));
  EXPECT_TRUE(IsOneWay(InvalidateRequest::kTag));
  EXPECT_TRUE(IsOneWay(InvalidateAck::kTag));
  EXPECT_FALSE(IsOneWay(ReadRequest::kTag));
  EXPECT_EQ(ReplyTagFor(ReadRequest::kTag), ReadReply::kTag);
}

}  // namespace
}  // namespace buffetfs
