#pragma once

#include <array>
#include <cassert>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "buffetfs/status.h"
#include "buffetfs/types.h"

namespace buffetfs {

using Bytes = std::vector<uint8_t>;

constexpr size_t kPermBlobSize = 10;
constexpr size_t kInodeBlobSize = 16;

std::array<uint8_t, kPermBlobSize> EncodePerm(const PermissionRecord& perm);
Result<PermissionRecord> DecodePerm(std::span<const uint8_t> blob);

std::array<uint8_t, kInodeBlobSize> EncodeInode(const BuffetInode& inode);
Result<BuffetInode> DecodeInode(std::span<const uint8_t> blob);

template <typename T>
concept Tied = requires(const T& t) { t.Tie(); };

// Little-endian primitive writer. Strings carry a u16 length, byte payloads
// and lists a u32 length.
class ByteWriter {
 public:
  explicit ByteWriter(Bytes* out) : out_(out) {}

  void PutFixed(uint64_t v, size_t width) {
    for (size_t i = 0; i < width; i++) out_->push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void PutRaw(const void* p, size_t n) {
    auto* b = static_cast<const uint8_t*>(p);
    out_->insert(out_->end(), b, b + n);
  }

  template <typename T>
  void Put(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
      PutFixed(v ? 1 : 0, 1);
    } else if constexpr (std::is_enum_v<T>) {
      PutFixed(static_cast<uint64_t>(v), sizeof(T));
    } else if constexpr (std::is_integral_v<T>) {
      PutFixed(static_cast<uint64_t>(v), sizeof(T));
    } else if constexpr (std::is_same_v<T, std::string>) {
      assert(v.size() <= 0xFFFF);
      size_t n = v.size() > 0xFFFF ? 0xFFFF : v.size();
      PutFixed(n, 2);
      PutRaw(v.data(), n);
    } else if constexpr (std::is_same_v<T, Bytes>) {
      PutFixed(v.size(), 4);
      PutRaw(v.data(), v.size());
    } else if constexpr (Tied<T>) {
      std::apply([this](const auto&... f) { (Put(f), ...); }, v.Tie());
    } else {
      PutComposite(v);
    }
  }

 private:
  template <typename U>
  void PutComposite(const std::vector<U>& v) {
    PutFixed(v.size(), 4);
    for (const auto& e : v) Put(e);
  }
  template <typename U>
  void PutComposite(const std::optional<U>& v) {
    PutFixed(v.has_value() ? 1 : 0, 1);
    if (v) Put(*v);
  }

  Bytes* out_;
};

// Bounds-checked reader. Any failure latches and later reads are no-ops.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> in) : in_(in) {}

  bool ok() const { return ok_; }
  size_t remaining() const { return in_.size() - pos_; }

  bool GetFixed(uint64_t* v, size_t width) {
    if (!ok_ || remaining() < width) return ok_ = false;
    uint64_t r = 0;
    for (size_t i = 0; i < width; i++) r |= uint64_t(in_[pos_ + i]) << (8 * i);
    pos_ += width;
    *v = r;
    return true;
  }
  bool GetRaw(void* p, size_t n) {
    if (!ok_ || remaining() < n) return ok_ = false;
    if (n > 0) std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
    return true;
  }

  template <typename T>
  bool Get(T* v) {
    if constexpr (std::is_same_v<T, bool>) {
      uint64_t r;
      if (!GetFixed(&r, 1)) return false;
      if (r > 1) return ok_ = false;
      *v = r == 1;
    } else if constexpr (std::is_enum_v<T> || std::is_integral_v<T>) {
      uint64_t r;
      if (!GetFixed(&r, sizeof(T))) return false;
      *v = static_cast<T>(r);
    } else if constexpr (std::is_same_v<T, std::string>) {
      uint64_t n;
      if (!GetFixed(&n, 2) || remaining() < n) return ok_ = false;
      v->assign(reinterpret_cast<const char*>(in_.data() + pos_), n);
      pos_ += n;
    } else if constexpr (std::is_same_v<T, Bytes>) {
      uint64_t n;
      if (!GetFixed(&n, 4) || remaining() < n) return ok_ = false;
      v->assign(in_.begin() + pos_, in_.begin() + pos_ + n);
      pos_ += n;
    } else if constexpr (Tied<T>) {
      std::apply([this](auto&... f) { (Get(&f), ...); }, v->Tie());
    } else {
      GetComposite(v);
    }
    return ok_;
  }

 private:
  template <typename U>
  void GetComposite(std::vector<U>* v) {
    uint64_t n;
    if (!GetFixed(&n, 4)) return;
    v->clear();
    // every element occupies at least one byte
    if (n > remaining()) {
      ok_ = false;
      return;
    }
    v->reserve(n);
    for (uint64_t i = 0; i < n && ok_; i++) {
      U e{};
      if (Get(&e)) v->push_back(std::move(e));
    }
  }
  template <typename U>
  void GetComposite(std::optional<U>* v) {
    uint64_t present;
    if (!GetFixed(&present, 1)) return;
    if (present > 1) {
      ok_ = false;
      return;
    }
    if (present == 0) {
      v->reset();
      return;
    }
    U e{};
    if (Get(&e)) *v = std::move(e);
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
  bool ok_ = true;
};

}  // namespace buffetfs
