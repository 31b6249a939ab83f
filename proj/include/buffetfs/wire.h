#pragma once

#include <cstdint>
#include <span>

#include "buffetfs/codec.h"
#include "buffetfs/messages.h"
#include "buffetfs/status.h"

namespace buffetfs {

// Frame = "BFS1" | tag u8 | body_len u32 LE | body
constexpr uint8_t kFrameMagic[4] = {'B', 'F', 'S', '1'};
constexpr size_t kFrameHeaderSize = 9;
constexpr uint32_t kMaxFrameBody = 64u << 20;

struct FrameHeader {
  uint8_t tag = 0;
  uint32_t body_len = 0;
};

Bytes EncodeMessage(const RpcMessage& msg);
Result<RpcMessage> DecodeMessage(std::span<const uint8_t> frame);

// Validates magic, tag and the body size cap; used by stream readers before
// they know the whole frame.
Result<FrameHeader> DecodeFrameHeader(std::span<const uint8_t> header);

}  // namespace buffetfs
