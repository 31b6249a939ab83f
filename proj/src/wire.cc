#include "buffetfs/wire.h"

#include <cstring>

namespace buffetfs {

namespace {

template <size_t I = 0>
bool DecodeAlternative(uint8_t tag, ByteReader* r, RpcMessage* out) {
  if constexpr (I < std::variant_size_v<RpcMessage>) {
    if (tag == I + 1) {
      std::variant_alternative_t<I, RpcMessage> v;
      r->Get(&v);
      *out = std::move(v);
      return r->ok();
    }
    return DecodeAlternative<I + 1>(tag, r, out);
  } else {
    return false;
  }
}

bool ValidFlags(const OpenFlags& f) { return static_cast<uint8_t>(f.access) <= 2; }

// Enum fields that the generic reader accepts as raw integers.
Status ValidateEnums(const RpcMessage& m) {
  bool ok = true;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ErrorReply>) {
          ok = IsWireCode(static_cast<uint16_t>(v.code));
        } else if constexpr (std::is_same_v<T, ReadRequest> || std::is_same_v<T, WriteRequest>) {
          ok = !v.deferred_open || ValidFlags(v.deferred_open->flags);
        } else if constexpr (std::is_same_v<T, BaselineOpenRequest>) {
          ok = ValidFlags(v.flags);
        } else if constexpr (std::is_same_v<T, AdminDumpReply>) {
          for (const auto& o : v.opened) ok = ok && ValidFlags(o.flags);
        } else if constexpr (std::is_same_v<T, RegisterClient>) {
          ok = static_cast<uint8_t>(v.channel) <= 2;
        }
      },
      m);
  return ok ? Status::OK() : Status::Corruption("enum value out of range");
}

}  // namespace

Bytes EncodeMessage(const RpcMessage& msg) {
  Bytes frame(kFrameHeaderSize);
  std::memcpy(frame.data(), kFrameMagic, 4);
  frame[4] = TagOf(msg);
  ByteWriter w(&frame);
  std::visit([&](const auto& v) { w.Put(v); }, msg);
  uint32_t body_len = static_cast<uint32_t>(frame.size() - kFrameHeaderSize);
  for (int i = 0; i < 4; i++) frame[5 + i] = static_cast<uint8_t>(body_len >> (8 * i));
  return frame;
}

Result<FrameHeader> DecodeFrameHeader(std::span<const uint8_t> header) {
  if (header.size() < kFrameHeaderSize) return Status::Corruption("truncated frame header");
  if (std::memcmp(header.data(), kFrameMagic, 4) != 0) return Status::Corruption("bad magic");
  FrameHeader h;
  h.tag = header[4];
  if (h.tag < kMinTag || h.tag > kMaxTag) {
    return Status::Corruption("unknown tag " + std::to_string(h.tag));
  }
  for (int i = 0; i < 4; i++) h.body_len |= uint32_t(header[5 + i]) << (8 * i);
  if (h.body_len > kMaxFrameBody) return Status::Corruption("frame body too large");
  return h;
}

Result<RpcMessage> DecodeMessage(std::span<const uint8_t> frame) {
  auto header = DecodeFrameHeader(frame);
  if (!header.ok()) return header.status();
  if (frame.size() - kFrameHeaderSize != header->body_len) {
    return Status::Corruption("body length mismatch: header says " +
                              std::to_string(header->body_len) + ", frame carries " +
                              std::to_string(frame.size() - kFrameHeaderSize));
  }
  ByteReader r(frame.subspan(kFrameHeaderSize));
  RpcMessage msg;
  if (!DecodeAlternative(header->tag, &r, &msg)) {
    return Status::Corruption(std::string("truncated ") + MessageName(header->tag) + " body");
  }
  if (r.remaining() != 0) {
    return Status::Corruption(std::string("trailing bytes in ") + MessageName(header->tag));
  }
  Status s = ValidateEnums(msg);
  if (!s.ok()) return s;
  return msg;
}

const char* MessageName(uint8_t tag) {
  static const char* const kNames[] = {
      "?",                   "GetDirRequest",   "GetDirReply",        "ReadRequest",
      "ReadReply",           "WriteRequest",    "WriteReply",         "CloseNotify",
      "InvalidateRequest",   "InvalidateAck",   "SetPermissionRequest", "SetPermissionReply",
      "CreateRequest",       "CreateReply",     "ErrorReply",         "AdminDumpRequest",
      "AdminDumpReply",      "BaselineOpenRequest", "BaselineOpenReply", "RegisterClient",
      "BarrierRequest",      "BarrierReply"};
  static_assert(sizeof(kNames) / sizeof(kNames[0]) == kMaxTag + 1);
  return tag <= kMaxTag ? kNames[tag] : "?";
}

bool IsCallRequest(uint8_t tag) { return ReplyTagFor(tag) != 0; }

bool IsOneWay(uint8_t tag) {
  return tag == CloseNotify::kTag || tag == InvalidateRequest::kTag ||
         tag == InvalidateAck::kTag;
}

uint8_t ReplyTagFor(uint8_t request_tag) {
  switch (request_tag) {
    case GetDirRequest::kTag: return GetDirReply::kTag;
    case ReadRequest::kTag: return ReadReply::kTag;
    case WriteRequest::kTag: return WriteReply::kTag;
    case SetPermissionRequest::kTag: return SetPermissionReply::kTag;
    case CreateRequest::kTag: return CreateReply::kTag;
    case AdminDumpRequest::kTag: return AdminDumpReply::kTag;
    case BaselineOpenRequest::kTag: return BaselineOpenReply::kTag;
    case BarrierRequest::kTag: return BarrierReply::kTag;
    default: return 0;
  }
}

ErrorReply MakeError(const Status& s) {
  ErrorReply e;
  e.code = IsWireCode(static_cast<uint16_t>(s.code())) ? s.code() : Code::kIO;
  e.detail = s.message().substr(0, 0xFFFF);
  return e;
}

Status ToStatus(const ErrorReply& e) { return Status(e.code, e.detail); }

}  // namespace buffetfs
