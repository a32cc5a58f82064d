#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pfbench/lstm.hpp"

namespace pfbench {

enum class DType : std::uint8_t { kF64 = 0, kF32 = 1 };

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 8 ? DType::kF64 : DType::kF32;
}

struct Tensor {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  DType dtype = DType::kF64;
  std::vector<double> data;  // column-major; exact for both dtypes

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Versioned binary container of named tensors plus string metadata.
// Layout: magic "PFCKPT01", u32 metadata count, (key, value) strings,
// u32 tensor count, then per tensor: name, u64 rows, u64 cols, u8 dtype and
// rows*cols little-endian values in that dtype. Strings are u32 length +
// bytes.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<Tensor> tensors;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;

  template <typename T>
  void put(const std::string& name, const nn::Matrix<T>& m) {
    Tensor t{name, static_cast<std::uint64_t>(m.rows()),
             static_cast<std::uint64_t>(m.cols()), dtype_of<T>(), {}};
    t.data.assign(m.data(), m.data() + m.size());
    tensors.push_back(std::move(t));
  }

  template <typename T>
  nn::Matrix<T> matrix(const std::string& name) const {
    const Tensor& t = get(name);
    nn::Matrix<T> m(static_cast<nn::Index>(t.rows),
                    static_cast<nn::Index>(t.cols));
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      m.data()[i] = static_cast<T>(t.data[i]);
    }
    return m;
  }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// 64-bit FNV-1a, used for content hashes of artifacts.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::string& path);
std::string hex64(std::uint64_t value);

}  // namespace pfbench
