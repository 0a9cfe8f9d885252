#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "advgray/errors.hpp"
#include "advgray/tensor.hpp"

namespace advgray {

// IDX container magics (big-endian).
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct Dataset {
  Tensor images;  // [n, 1, 28, 28], values in [0, 1]
  std::vector<std::uint8_t> labels;
  std::string name;

  std::size_t size() const { return labels.size(); }
};

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> b,
                               std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

inline void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace detail

// Pixels normalized to [0, 1] by /255. Returns [n, rows, cols].
inline Tensor parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw DataError("idx images: truncated header");
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  if (magic != kIdxImagesMagic) {
    throw DataError("idx images: bad magic " + std::to_string(magic) +
                    ", expected " + std::to_string(kIdxImagesMagic));
  }
  const std::size_t n = detail::read_be32(bytes, 4);
  const std::size_t rows = detail::read_be32(bytes, 8);
  const std::size_t cols = detail::read_be32(bytes, 12);
  const std::size_t need = 16 + n * rows * cols;
  if (bytes.size() != need) {
    throw DataError("idx images: payload is " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(need));
  }
  Tensor t({n, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i)
    t[i] = static_cast<double>(bytes[16 + i]) / 255.0;
  return t;
}

inline std::vector<std::uint8_t> parse_idx_labels(
    std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw DataError("idx labels: truncated header");
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  if (magic != kIdxLabelsMagic) {
    throw DataError("idx labels: bad magic " + std::to_string(magic) +
                    ", expected " + std::to_string(kIdxLabelsMagic));
  }
  const std::size_t n = detail::read_be32(bytes, 4);
  if (bytes.size() != 8 + n) {
    throw DataError("idx labels: payload is " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(8 + n));
  }
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.end());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 9) {
      throw DataError("idx labels: value " + std::to_string(labels[i]) +
                      " at index " + std::to_string(i) + " exceeds 9");
    }
  }
  return labels;
}

// Inverse of parse_idx_images; round(v*255) recovers the original byte.
inline std::vector<std::uint8_t> serialize_idx_images(const Tensor& images) {
  if (images.rank() != 3) {
    throw DimensionError("serialize_idx_images: need [n,rows,cols], got " +
                         shape_string(images));
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.size());
  detail::write_be32(out, kIdxImagesMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(images.dim(0)));
  detail::write_be32(out, static_cast<std::uint32_t>(images.dim(1)));
  detail::write_be32(out, static_cast<std::uint32_t>(images.dim(2)));
  for (std::size_t i = 0; i < images.size(); ++i)
    out.push_back(static_cast<std::uint8_t>(std::lround(images[i] * 255.0)));
  return out;
}

inline std::vector<std::uint8_t> serialize_idx_labels(
    const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  detail::write_be32(out, kIdxLabelsMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

// Reads a file, transparently inflating gzip content (1f 8b signature).
inline std::vector<std::uint8_t> read_file_maybe_gzip(
    const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  if (raw.size() < 2 || raw[0] != 0x1f || raw[1] != 0x8b) return raw;

  std::vector<std::uint8_t> out;
  out.resize(std::max<std::size_t>(raw.size() * 4, 1 << 16));
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK)
    throw DataError("gzip: inflateInit failed for " + path.string());
  zs.next_in = raw.data();
  zs.avail_in = static_cast<uInt>(raw.size());
  std::size_t written = 0;
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    if (written == out.size()) out.resize(out.size() * 2);
    zs.next_out = out.data() + written;
    zs.avail_out = static_cast<uInt>(out.size() - written);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError("gzip: corrupt stream in " + path.string());
    }
    written = out.size() - zs.avail_out;
  }
  inflateEnd(&zs);
  out.resize(written);
  return out;
}

inline Dataset load_dataset(const std::filesystem::path& images_path,
                            const std::filesystem::path& labels_path,
                            std::string name) {
  Tensor imgs = parse_idx_images(read_file_maybe_gzip(images_path));
  std::vector<std::uint8_t> labels =
      parse_idx_labels(read_file_maybe_gzip(labels_path));
  if (imgs.dim(0) != labels.size()) {
    throw DataError(name + ": " + std::to_string(imgs.dim(0)) +
                    " images vs " + std::to_string(labels.size()) + " labels");
  }
  Dataset d;
  d.images = imgs.reshaped({imgs.dim(0), 1, imgs.dim(1), imgs.dim(2)});
  d.labels = std::move(labels);
  d.name = std::move(name);
  return d;
}

// Deterministic prefix split of the 60k training file into 50k train and
// 10k holdout. The holdout drives the learning-rate schedule; the official
// test file stays untouched until final evaluation.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& full,
                                                    bool allow_any_size = false) {
  if (!allow_any_size && full.size() != 60000) {
    throw DataError("train split: expected 60000 samples, got " +
                    std::to_string(full.size()) +
                    " (pass the override flag to split anyway)");
  }
  const std::size_t train_n =
      full.size() == 60000 ? 50000 : (full.size() * 5) / 6;
  const std::size_t c = full.images.dim(1), h = full.images.dim(2),
                    w = full.images.dim(3);
  const std::size_t px = c * h * w;
  auto slice = [&](std::size_t b, std::size_t e, const std::string& name) {
    Dataset d;
    d.images = Tensor({e - b, c, h, w},
                      std::vector<double>(full.images.data() + b * px,
                                          full.images.data() + e * px));
    d.labels.assign(full.labels.begin() + b, full.labels.begin() + e);
    d.name = name;
    return d;
  };
  return {slice(0, train_n, full.name + "-train"),
          slice(train_n, full.size(), full.name + "-holdout")};
}

// First n samples; used by desk-scale runs.
inline Dataset subset(const Dataset& d, std::size_t n) {
  if (n >= d.size()) return d;
  const std::size_t c = d.images.dim(1), h = d.images.dim(2),
                    w = d.images.dim(3);
  Dataset out;
  out.images = Tensor({n, c, h, w},
                      std::vector<double>(d.images.data(),
                                          d.images.data() + n * c * h * w));
  out.labels.assign(d.labels.begin(), d.labels.begin() + n);
  out.name = d.name + "-subset" + std::to_string(n);
  return out;
}

}  // namespace advgray
