#include "buffetfs/codec.h"

namespace buffetfs {

namespace {

template <size_t N, typename T>
std::array<uint8_t, N> EncodeFixed(const T& v) {
  Bytes buf;
  buf.reserve(N);
  ByteWriter w(&buf);
  w.Put(v);
  assert(buf.size() == N);
  std::array<uint8_t, N> out{};
  std::copy(buf.begin(), buf.end(), out.begin());
  return out;
}

template <size_t N, typename T>
Result<T> DecodeFixed(std::span<const uint8_t> blob, const char* what) {
  if (blob.size() != N) {
    return Status::Corruption(std::string(what) + " blob must be " + std::to_string(N) +
                              " bytes, got " + std::to_string(blob.size()));
  }
  ByteReader r(blob);
  T v;
  r.Get(&v);
  if (!r.ok()) return Status::Corruption(what);
  return v;
}

}  // namespace

std::array<uint8_t, kPermBlobSize> EncodePerm(const PermissionRecord& perm) {
  return EncodeFixed<kPermBlobSize>(perm);
}

Result<PermissionRecord> DecodePerm(std::span<const uint8_t> blob) {
  return DecodeFixed<kPermBlobSize, PermissionRecord>(blob, "permission");
}

std::array<uint8_t, kInodeBlobSize> EncodeInode(const BuffetInode& inode) {
  return EncodeFixed<kInodeBlobSize>(inode);
}

Result<BuffetInode> DecodeInode(std::span<const uint8_t> blob) {
  return DecodeFixed<kInodeBlobSize, BuffetInode>(blob, "inode");
}

}  // namespace buffetfs
