#include "buffetfs/store.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <sys/xattr.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace buffetfs {

namespace fs = std::filesystem;

namespace {

constexpr const char* kServerMetaFile = "SERVER";

Status Errno(const std::string& what) {
  return Status::IOError(what + ": " + std::strerror(errno));
}

Status ReadWhole(const std::string& path, Bytes* out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Status::IOError("cannot read " + path);
  out->assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return Status::OK();
}

Result<Bytes> GetXattr(const std::string& path, const char* name, size_t expect) {
  Bytes buf(expect + 1);
  ssize_t n = ::getxattr(path.c_str(), name, buf.data(), buf.size());
  if (n < 0) return Errno(std::string("getxattr ") + name + " on " + path);
  buf.resize(static_cast<size_t>(n));
  return buf;
}

}  // namespace

Result<std::unique_ptr<DirectoryStore>> DirectoryStore::Open(const std::string& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) return Status::IOError("create " + root + ": " + ec.message());
  return std::unique_ptr<DirectoryStore>(new DirectoryStore(root));
}

std::string DirectoryStore::PathOf(uint64_t file_id) const {
  return (fs::path(root_) / std::to_string(file_id)).string();
}

Status DirectoryStore::SaveServer(uint32_t host_id, uint32_t version, uint64_t next_file_id) {
  std::string tmp = (fs::path(root_) / "SERVER.tmp").string();
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << host_id << ' ' << version << ' ' << next_file_id << '\n';
    if (!out) return Status::IOError("write " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, fs::path(root_) / kServerMetaFile, ec);
  if (ec) return Status::IOError("rename server meta: " + ec.message());
  return Status::OK();
}

Status DirectoryStore::SaveAttrs(uint64_t file_id, const BuffetInode& inode,
                                 const PermissionRecord& perm) {
  std::string path = PathOf(file_id);
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT, 0600);
  if (fd < 0) return Errno("open " + path);
  ::close(fd);
  auto ib = EncodeInode(inode);
  auto pb = EncodePerm(perm);
  if (::setxattr(path.c_str(), kInodeXattr, ib.data(), ib.size(), 0) != 0) {
    return Errno("setxattr inode on " + path);
  }
  if (::setxattr(path.c_str(), kPermXattr, pb.data(), pb.size(), 0) != 0) {
    return Errno("setxattr perm on " + path);
  }
  return Status::OK();
}

Status DirectoryStore::WriteContent(uint64_t file_id, uint64_t offset,
                                    std::span<const uint8_t> data) {
  std::string path = PathOf(file_id);
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT, 0600);
  if (fd < 0) return Errno("open " + path);
  // pwrite beyond EOF leaves a zero-filled hole, matching the in-memory rule
  size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::pwrite(fd, data.data() + done, data.size() - done,
                         static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      Status s = Errno("pwrite " + path);
      ::close(fd);
      return s;
    }
    done += static_cast<size_t>(n);
  }
  ::close(fd);
  return Status::OK();
}

Status DirectoryStore::Truncate(uint64_t file_id, uint64_t size) {
  std::string path = PathOf(file_id);
  if (::truncate(path.c_str(), static_cast<off_t>(size)) != 0) return Errno("truncate " + path);
  return Status::OK();
}

Status DirectoryStore::SaveEntries(uint64_t file_id, const std::vector<DirEntryRecord>& entries) {
  Bytes buf;
  ByteWriter w(&buf);
  w.Put(entries);
  std::string path = PathOf(file_id);
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) return Errno("open " + path);
  ::close(fd);
  return WriteContent(file_id, 0, buf);
}

Result<StoredServer> DirectoryStore::Load(bool* found) const {
  StoredServer out;
  std::ifstream meta(fs::path(root_) / kServerMetaFile);
  if (!meta) {
    *found = false;
    return out;
  }
  *found = true;
  if (!(meta >> out.host_id >> out.version >> out.next_file_id)) {
    return Status::Corruption("unreadable server meta in " + root_);
  }
  for (const auto& de : fs::directory_iterator(root_)) {
    std::string name = de.path().filename().string();
    if (name.empty() || name.find_first_not_of("0123456789") != std::string::npos) continue;
    std::string path = de.path().string();
    StoredObject obj;
    auto ib = GetXattr(path, kInodeXattr, kInodeBlobSize);
    if (!ib.ok()) return ib.status();
    auto inode = DecodeInode(*ib);
    if (!inode.ok()) return inode.status();
    auto pb = GetXattr(path, kPermXattr, kPermBlobSize);
    if (!pb.ok()) return pb.status();
    auto perm = DecodePerm(*pb);
    if (!perm.ok()) return perm.status();
    obj.inode = *inode;
    obj.perm = *perm;
    Bytes content;
    Status s = ReadWhole(path, &content);
    if (!s.ok()) return s;
    if (obj.perm.is_dir()) {
      ByteReader r(content);
      if (!r.Get(&obj.entries) || r.remaining() != 0) {
        return Status::Corruption("bad directory listing in " + path);
      }
    } else {
      obj.content = std::move(content);
    }
    out.objects.push_back(std::move(obj));
  }
  return out;
}

}  // namespace buffetfs
