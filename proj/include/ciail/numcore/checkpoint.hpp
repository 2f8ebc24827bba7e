#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ciail/errors.hpp"
#include "ciail/numcore/mlp.hpp"
#include "ciail/numcore/tensor.hpp"

// Binary parameter checkpoints:
//   "CIAIL1"
//   repeated until EOF:
//     u64 name length, name bytes, u64 rank, rank x u64 dims, size x f64 data
// All integers and reals are little-endian.

namespace ciail::numcore {

inline constexpr char kCheckpointMagic[] = "CIAIL1";

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  os.write(kCheckpointMagic, 6);
  for (const auto& t : tensors) {
    detail::put_u64(os, t.name.size());
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put_u64(os, t.value.rank());
    for (auto d : t.value.shape()) detail::put_u64(os, d);
    for (double v : t.value.data()) detail::put_f64(os, v);
  }
}

inline std::vector<NamedTensor> read_checkpoint(std::istream& is) {
  char magic[6];
  if (!is.read(magic, 6) || std::memcmp(magic, kCheckpointMagic, 6) != 0) {
    throw LoadError("checkpoint: bad magic");
  }
  std::vector<NamedTensor> out;
  std::uint64_t len = 0;
  while (detail::get_u64(is, len)) {
    if (len > (1u << 20)) throw LoadError("checkpoint: implausible name length");
    std::string name(len, '\0');
    std::uint64_t rank = 0;
    if (!is.read(name.data(), static_cast<std::streamsize>(len)) || !detail::get_u64(is, rank)) {
      throw LoadError("checkpoint: truncated record header");
    }
    if (rank > 8) throw LoadError("checkpoint: implausible rank for '" + name + "'");
    std::vector<std::size_t> shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      std::uint64_t v = 0;
      if (!detail::get_u64(is, v)) throw LoadError("checkpoint: truncated dims for '" + name + "'");
      d = v;
      count *= v;
    }
    std::vector<double> data(count);
    for (auto& v : data) {
      std::uint64_t bits = 0;
      if (!detail::get_u64(is, bits)) throw LoadError("checkpoint: truncated data for '" + name + "'");
      v = std::bit_cast<double>(bits);
    }
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_checkpoint(os, tensors);
}

inline std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(is);
}

// Appends the network's parameters under "<prefix>.<param name>".
inline void append_mlp(std::vector<NamedTensor>& out, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t k = 0; k < mlp.params().size(); ++k) {
    out.push_back({prefix + "." + mlp.param_names()[k], mlp.params()[k]});
  }
}

inline const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw LoadError("checkpoint has no tensor '" + name + "'");
}

inline bool has_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

// Overwrites the network's parameters from "<prefix>.*" records; shapes must match.
inline void restore_mlp(const std::vector<NamedTensor>& tensors, const std::string& prefix, Mlp& mlp) {
  const auto names = mlp.param_names();
  auto& params = mlp.mutable_params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor& src = find_tensor(tensors, prefix + "." + names[k]);
    if (!src.same_shape(params[k])) {
      throw LoadError("checkpoint tensor '" + prefix + "." + names[k] + "' has shape " +
                      src.shape_string() + ", network expects " + params[k].shape_string());
    }
    params[k] = src;
  }
}

}  // namespace ciail::numcore
