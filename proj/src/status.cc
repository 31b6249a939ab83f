#include "buffetfs/status.h"

namespace buffetfs {

const char* CodeName(Code code) {
  switch (code) {
    case Code::kOk: return "OK";
    case Code::kNotFound: return "NOT_FOUND";
    case Code::kAccessDenied: return "ACCESS_DENIED";
    case Code::kStaleInode: return "STALE_INODE";
    case Code::kBadHandle: return "BAD_HANDLE";
    case Code::kNotADirectory: return "NOT_A_DIRECTORY";
    case Code::kExists: return "EXISTS";
    case Code::kIO: return "IO";
    case Code::kUnreachable: return "UNREACHABLE";
    case Code::kCorruption: return "CORRUPTION";
    case Code::kInvalidArgument: return "INVALID_ARGUMENT";
    case Code::kVerification: return "VERIFICATION";
  }
  return "UNKNOWN";
}

bool IsWireCode(uint16_t raw) { return raw >= 1 && raw <= 7; }

std::string Status::ToString() const {
  std::string s = CodeName(code_);
  if (!msg_.empty()) {
    s += ": ";
    s += msg_;
  }
  return s;
}

}  // namespace buffetfs
