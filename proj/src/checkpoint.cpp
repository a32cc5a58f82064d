#include "pfbench/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pfbench/error.hpp"

namespace pfbench {
namespace {

constexpr char kMagic[8] = {'P', 'F', 'C', 'K', 'P', 'T', '0', '1'};

class Writer {
 public:
  explicit Writer(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError(fmt::format("cannot write checkpoint '{}'", path));
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  template <typename U>
  void le(U v) {
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    bytes(buf, sizeof(U));
  }
  void str(const std::string& s) {
    le<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void finish() {
    out_.close();
    if (!out_) throw IoError(fmt::format("write failed on '{}'", path_));
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError(fmt::format("cannot open checkpoint '{}'", path));
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw ParseError(fmt::format("truncated checkpoint '{}'", path_), offset_,
                       ParseError::OffsetKind::kByte);
    }
    offset_ += n;
  }
  template <typename U>
  U le() {
    unsigned char buf[sizeof(U)];
    bytes(buf, sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(buf[i]) << (8 * i);
    }
    return v;
  }
  std::string str() {
    const auto n = le<std::uint32_t>();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void Checkpoint::save(const std::string& path) const {
  Writer w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  w.le<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(t.name);
    w.le<std::uint64_t>(t.rows);
    w.le<std::uint64_t>(t.cols);
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.dtype));
    for (double x : t.data) {
      if (t.dtype == DType::kF64) {
        w.le<std::uint64_t>(std::bit_cast<std::uint64_t>(x));
      } else {
        w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(static_cast<float>(x)));
      }
    }
  }
  w.finish();
}

Checkpoint Checkpoint::load(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw FormatError(fmt::format("'{}' is not a checkpoint (bad magic)", path));
  }
  Checkpoint ckpt;
  const auto n_meta = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.str();
    ckpt.meta[k] = r.str();
  }
  const auto n_tensors = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Tensor t;
    t.name = r.str();
    t.rows = r.le<std::uint64_t>();
    t.cols = r.le<std::uint64_t>();
    const auto dtype = r.le<std::uint8_t>();
    if (dtype > 1) throw FormatError(fmt::format("unknown dtype {}", dtype));
    t.dtype = static_cast<DType>(dtype);
    t.data.resize(t.rows * t.cols);
    for (auto& x : t.data) {
      x = t.dtype == DType::kF64
              ? std::bit_cast<double>(r.le<std::uint64_t>())
              : static_cast<double>(std::bit_cast<float>(r.le<std::uint32_t>()));
    }
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw FormatError(fmt::format("checkpoint has no tensor '{}'", name));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

std::string hex64(std::uint64_t value) { return fmt::format("{:016x}", value); }

}  // namespace pfbench
