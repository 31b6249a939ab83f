#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace buffetfs {

// Codes 1..7 travel on the wire inside ErrorReply and keep these values.
// The remaining codes are local to one process.
enum class Code : uint16_t {
  kOk = 0,
  kNotFound = 1,
  kAccessDenied = 2,
  kStaleInode = 3,
  kBadHandle = 4,
  kNotADirectory = 5,
  kExists = 6,
  kIO = 7,

  kUnreachable = 64,
  kCorruption = 65,
  kInvalidArgument = 66,
  kVerification = 67,
};

const char* CodeName(Code code);

// True for the codes that may appear in an ErrorReply.
bool IsWireCode(uint16_t raw);

class Status {
 public:
  Status() = default;
  Status(Code code, std::string msg) : code_(code), msg_(std::move(msg)) {}

  static Status OK() { return Status(); }
  static Status NotFound(std::string msg = "") { return {Code::kNotFound, std::move(msg)}; }
  static Status AccessDenied(std::string msg = "") { return {Code::kAccessDenied, std::move(msg)}; }
  static Status StaleInode(std::string msg = "") { return {Code::kStaleInode, std::move(msg)}; }
  static Status BadHandle(std::string msg = "") { return {Code::kBadHandle, std::move(msg)}; }
  static Status NotADirectory(std::string msg = "") { return {Code::kNotADirectory, std::move(msg)}; }
  static Status Exists(std::string msg = "") { return {Code::kExists, std::move(msg)}; }
  static Status IOError(std::string msg = "") { return {Code::kIO, std::move(msg)}; }
  static Status Unreachable(std::string msg = "") { return {Code::kUnreachable, std::move(msg)}; }
  static Status Corruption(std::string msg = "") { return {Code::kCorruption, std::move(msg)}; }
  static Status InvalidArgument(std::string msg = "") { return {Code::kInvalidArgument, std::move(msg)}; }
  static Status Verification(std::string msg = "") { return {Code::kVerification, std::move(msg)}; }

  bool ok() const { return code_ == Code::kOk; }
  Code code() const { return code_; }
  const std::string& message() const { return msg_; }

  bool IsNotFound() const { return code_ == Code::kNotFound; }
  bool IsAccessDenied() const { return code_ == Code::kAccessDenied; }
  bool IsStaleInode() const { return code_ == Code::kStaleInode; }

  std::string ToString() const;

  bool operator==(const Status& o) const { return code_ == o.code_; }

 private:
  Code code_ = Code::kOk;
  std::string msg_;
};

// Either a value or a non-OK status.
template <typename T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Status s) : v_(std::move(s)) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  Status status() const { return ok() ? Status::OK() : std::get<Status>(v_); }

  T& value() & { return std::get<T>(v_); }
  const T& value() const& { return std::get<T>(v_); }
  T&& value() && { return std::get<T>(std::move(v_)); }

  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, Status> v_;
};

}  // namespace buffetfs
