#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "advgray/errors.hpp"
#include "advgray/tensor.hpp"

namespace advgray {

// Shared binary container: magic "ADVG", format version, a JSON header,
// then tensor blocks (shape header + little-endian 64-bit reals).
inline constexpr char kContainerMagic[4] = {'A', 'D', 'V', 'G'};
inline constexpr std::uint32_t kContainerVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));  // little-endian hosts only
  os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw DataError("container: truncated stream");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

inline void write_tensor_block(std::ostream& os, const Tensor& t) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) write_le<std::uint64_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
}

inline Tensor read_tensor_block(std::istream& is) {
  const auto rank = read_le<std::uint32_t>(is);
  if (rank > 8) throw DataError("container: implausible tensor rank");
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(read_le<std::uint64_t>(is));
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!is) throw DataError("container: truncated tensor data");
  return t;
}

inline void write_container_header(std::ostream& os, const std::string& json) {
  os.write(kContainerMagic, 4);
  write_le<std::uint32_t>(os, kContainerVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(json.size()));
  os.write(json.data(), static_cast<std::streamsize>(json.size()));
}

inline std::string read_container_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kContainerMagic, 4) != 0)
    throw DataError("container: bad magic");
  const auto version = read_le<std::uint32_t>(is);
  if (version != kContainerVersion)
    throw DataError("container: unsupported version " +
                    std::to_string(version));
  const auto len = read_le<std::uint32_t>(is);
  std::string js(len, '\0');
  is.read(js.data(), len);
  if (!is) throw DataError("container: truncated header");
  return js;
}

}  // namespace detail
}  // namespace advgray
