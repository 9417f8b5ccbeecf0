#include "tdbgan/archive.hpp"

#include "tdbgan/types.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace tdbgan::archive {

namespace {

struct DtypeCode {
  torch::ScalarType type;
  uint8_t code;
};
constexpr DtypeCode kDtypes[] = {
    {torch::kFloat32, 1}, {torch::kFloat64, 2}, {torch::kInt64, 3},
    {torch::kInt32, 4},   {torch::kUInt8, 5},   {torch::kBool, 6},
};

uint8_t code_of(torch::ScalarType t) {
  for (const auto& d : kDtypes)
    if (d.type == t) return d.code;
  throw ShapeError(std::string("archive: unsupported dtype ") + c10::toString(t));
}

torch::ScalarType type_of(uint8_t code) {
  for (const auto& d : kDtypes)
    if (d.code == code) return d.type;
  throw ParseError("archive: unknown dtype code " + std::to_string(code));
}

uint64_t fnv1a(const char* data, size_t n, uint64_t h = 1469598103934665603ULL) {
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    bytes(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const char* p, size_t n) { buf_.append(p, n); }
  void str(const std::string& s) {
    bytes(s.data(), s.size());
  }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, size_t end, std::string path) : buf_(buf), end_(end), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  const char* take(size_t n) {
    need(n);
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  size_t pos() const { return pos_; }

 private:
  void need(size_t n) const {
    if (pos_ + n > end_) throw ParseError("archive '" + path_ + "' is truncated");
  }
  const std::string& buf_;
  size_t end_;
  size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void Archive::put(const std::string& name, const torch::Tensor& tensor) {
  auto t = tensor.detach().to(torch::kCPU).contiguous().clone();
  for (auto& [n, v] : entries_)
    if (n == name) {
      v = t;
      return;
    }
  entries_.emplace_back(name, t);
}

void Archive::put_bytes(const std::string& name, const std::string& bytes) {
  auto t = torch::empty({static_cast<int64_t>(bytes.size())}, torch::kUInt8);
  if (!bytes.empty()) std::memcpy(t.data_ptr<uint8_t>(), bytes.data(), bytes.size());
  put(name, t);
}

bool Archive::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

const torch::Tensor& Archive::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw ParseError("archive has no entry '" + name + "'");
}

std::string Archive::get_bytes(const std::string& name) const {
  const auto& t = get(name);
  return std::string(reinterpret_cast<const char*>(t.data_ptr<uint8_t>()), t.numel());
}

void save(const Archive& archive, const std::string& path, uint32_t version) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.pod<uint32_t>(version);
  w.pod<uint64_t>(archive.header.size());
  w.str(archive.header);
  w.pod<uint32_t>(static_cast<uint32_t>(archive.entries().size()));
  for (const auto& [name, t] : archive.entries()) {
    w.pod<uint32_t>(static_cast<uint32_t>(name.size()));
    w.str(name);
    w.pod<uint8_t>(code_of(t.scalar_type()));
    w.pod<uint8_t>(static_cast<uint8_t>(t.dim()));
    for (int64_t d : t.sizes()) w.pod<int64_t>(d);
    const uint64_t nbytes = t.numel() * t.element_size();
    w.pod<uint64_t>(nbytes);
    w.bytes(static_cast<const char*>(t.data_ptr()), nbytes);
  }
  const auto& buf = w.buffer();
  const uint64_t sum = fnv1a(buf.data(), buf.size());

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write '" + tmp + "'");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
    if (!out) throw RuntimeFailure("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Archive load(const std::string& path, uint32_t expected_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open archive '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + sizeof(uint64_t))
    throw ParseError("archive '" + path + "' is truncated");
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("'" + path + "' is not a tdbgan archive");
  const size_t body = buf.size() - sizeof(uint64_t);
  uint64_t stored;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));

  Reader r(buf, body, path);
  r.take(sizeof(kMagic));
  const auto version = r.pod<uint32_t>();
  if (version != expected_version)
    throw ParseError("archive '" + path + "' has format version " + std::to_string(version) +
                     ", expected " + std::to_string(expected_version));
  if (fnv1a(buf.data(), body) != stored)
    throw ParseError("archive '" + path + "' is corrupt or truncated (checksum mismatch)");

  Archive a;
  a.header = r.str(r.pod<uint64_t>());
  const auto count = r.pod<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.pod<uint32_t>());
    const auto dtype = type_of(r.pod<uint8_t>());
    const auto rank = r.pod<uint8_t>();
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) d = r.pod<int64_t>();
    const auto nbytes = r.pod<uint64_t>();
    const char* src = r.take(nbytes);
    auto t = torch::empty(dims, dtype);
    if (static_cast<uint64_t>(t.numel() * t.element_size()) != nbytes)
      throw ParseError("archive entry '" + name + "' has inconsistent size");
    if (nbytes) std::memcpy(t.data_ptr(), src, nbytes);
    a.put(name, t);
  }
  return a;
}

}  // namespace tdbgan::archive
