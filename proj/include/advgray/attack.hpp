#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "advgray/container.hpp"
#include "advgray/errors.hpp"
#include "advgray/mnist.hpp"
#include "advgray/model.hpp"

namespace advgray {

struct AttackConfig {
  double epsilon = 0.0;  // max-norm step size, units of normalized intensity
  double clamp_lo = 0.0;
  double clamp_hi = 1.0;
};

// The benchmark's eleven attack step sizes.
struct EpsilonGrid {
  std::vector<double> values;

  static EpsilonGrid standard() {
    return EpsilonGrid{{0.1, 0.2, 0.3, 0.5, 0.75, 1, 1.5, 2, 5, 10, 16}};
  }

  void validate() const {
    double prev = 0.0;
    for (double v : values) {
      if (!(v > prev)) {
        throw ConfigError(
            "epsilon grid must be strictly increasing and positive");
      }
      prev = v;
    }
  }
};

namespace detail {

// c - x == d + err exactly (Knuth two-sum residual).
inline bool abs_diff_exceeds(double c, double x, double eps) {
  const double d = c - x;
  const double bb = d - c;
  const double err = (c - (d - bb)) + ((-x) - bb);
  if (d >= 0) return (d - eps) > -err;
  return ((-d) - eps) > err;
}

// x stepped by +/-eps such that the exact |result - x| never exceeds eps;
// a plain x + eps can overshoot by half an ulp after rounding.
inline double bounded_step(double x, double eps, int sgn) {
  if (sgn == 0) return x;
  double c = x + (sgn > 0 ? eps : -eps);
  while (abs_diff_exceeds(c, x, eps)) c = std::nextafter(c, x);
  return c;
}

}  // namespace detail

// One-step white-box attack: x + eps * sign(dL/dx), clamped to the pixel
// range. sign(0) is 0, so zero-gradient pixels stay untouched. Disjoint
// sample shards give results identical to one sequential pass.
inline Tensor fgsm(const Model& m, const Tensor& x,
                   std::span<const std::uint8_t> labels,
                   const AttackConfig& cfg) {
  if (cfg.epsilon < 0) {
    throw ConfigError("fgsm: epsilon must be >= 0, got " +
                      std::to_string(cfg.epsilon));
  }
  if (cfg.epsilon == 0.0) return x;

  BatchActivations acts = model_forward(m, adapt_batch(m, x));
  BackwardResult back = model_backward(m, acts, labels);
  const Tensor& g = back.input_grads;

  Tensor adv = x;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const int sgn = g[i] > 0.0 ? 1 : (g[i] < 0.0 ? -1 : 0);
    double v = detail::bounded_step(x[i], cfg.epsilon, sgn);
    if (v < cfg.clamp_lo) v = cfg.clamp_lo;
    if (v > cfg.clamp_hi) v = cfg.clamp_hi;
    adv[i] = v;
  }
  return adv;
}

// Every image replaced by its perturbed counterpart computed from the true
// label; labels unchanged.
inline Dataset generate_adversarial_set(const Model& m, const Dataset& data,
                                        double epsilon,
                                        std::size_t shard = 256) {
  AttackConfig cfg;
  cfg.epsilon = epsilon;
  Dataset out;
  out.images = Tensor(data.images.shape());
  out.labels = data.labels;
  out.name = data.name + "-adv";
  const std::size_t per = data.images.size() / data.images.dim(0);
  for (std::size_t b = 0; b < data.size(); b += shard) {
    const std::size_t e = std::min(data.size(), b + shard);
    Tensor batch = slice_batch(data.images, b, e);
    Tensor adv =
        fgsm(m, batch, std::span(data.labels).subspan(b, e - b), cfg);
    std::copy(adv.data(), adv.data() + adv.size(),
              out.images.data() + b * per);
  }
  return out;
}

// Binary PGM (P5), maxval 255.
inline void export_pgm(const Tensor& image, const std::filesystem::path& path) {
  if (image.rank() != 2) {
    throw DimensionError("export_pgm: need a rank-2 image, got " +
                         shape_string(image));
  }
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (!(image[i] >= 0.0 && image[i] <= 1.0)) {
      throw DataError("export_pgm: value " + std::to_string(image[i]) +
                      " outside [0, 1]");
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << "P5\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
  for (std::size_t i = 0; i < image.size(); ++i)
    f.put(static_cast<char>(
        static_cast<std::uint8_t>(std::lround(image[i] * 255.0))));
}

// Datasets persist in the same container format as model checkpoints:
// JSON header, then an image tensor and a label tensor.
inline void save_dataset(const Dataset& d, const std::filesystem::path& path,
                         double epsilon = 0.0) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  nlohmann::json header{
      {"kind", "dataset"}, {"name", d.name}, {"epsilon", epsilon}};
  detail::write_container_header(f, header.dump());
  detail::write_le<std::uint32_t>(f, 2);
  detail::write_tensor_block(f, d.images);
  Tensor labels({d.labels.size()});
  for (std::size_t i = 0; i < d.labels.size(); ++i)
    labels[i] = static_cast<double>(d.labels[i]);
  detail::write_tensor_block(f, labels);
}

inline Dataset load_dataset_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  const auto header = nlohmann::json::parse(detail::read_container_header(f));
  if (header.value("kind", "") != "dataset")
    throw DataError(path.string() + ": not a dataset container");
  const auto n_tensors = detail::read_le<std::uint32_t>(f);
  if (n_tensors != 2)
    throw DataError(path.string() + ": dataset container wants 2 tensors");
  Dataset d;
  d.images = detail::read_tensor_block(f);
  Tensor labels = detail::read_tensor_block(f);
  d.labels.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = labels[i];
    if (v < 0 || v > 9 || v != std::floor(v))
      throw DataError(path.string() + ": bad label value");
    d.labels[i] = static_cast<std::uint8_t>(v);
  }
  d.name = header.value("name", "");
  return d;
}

}  // namespace advgray
