#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "advgray/errors.hpp"
#include "advgray/model.hpp"
#include "advgray/rng.hpp"

namespace advgray {

// The seven benchmark architectures. FNN ids encode hidden widths; CNN ids
// encode convolution counts. All consume 28x28 grayscale and emit 10 logits.
inline const std::vector<std::string>& catalog_ids() {
  static const std::vector<std::string> ids = {
      "fnn1-32", "fnn1-256", "fnn2", "cnn3", "cnn4", "cnn6", "cnn8"};
  return ids;
}

namespace detail {

inline ModelSpec fnn_spec(const std::string& id,
                          const std::vector<std::size_t>& hidden) {
  ModelSpec s;
  s.arch_id = id;
  s.input_shape = {784};
  std::size_t prev = 784;
  for (std::size_t h : hidden) {
    s.layers.push_back({LayerKind::Dense, prev, h});
    s.layers.push_back({LayerKind::Relu, 0, 0});
    prev = h;
  }
  s.layers.push_back({LayerKind::Dense, prev, 10});
  return s;
}

// N 3x3 convolutions; channel width doubles from 16 every second conv;
// a 2x2 max-pool follows every completed pair (a trailing unpaired conv
// is not pooled). Head: flatten + one dense layer to 10 classes.
inline ModelSpec cnn_spec(const std::string& id, std::size_t n_convs) {
  ModelSpec s;
  s.arch_id = id;
  s.input_shape = {1, 28, 28};
  std::size_t channels = 1;
  std::size_t side = 28;
  for (std::size_t i = 0; i < n_convs; ++i) {
    const std::size_t out_ch = 16u << (i / 2);
    s.layers.push_back({LayerKind::Conv, channels, out_ch});
    s.layers.push_back({LayerKind::Relu, 0, 0});
    channels = out_ch;
    if (i % 2 == 1) {
      s.layers.push_back({LayerKind::MaxPool2, 0, 0});
      side /= 2;
    }
  }
  s.layers.push_back({LayerKind::Flatten, 0, 0});
  s.layers.push_back({LayerKind::Dense, channels * side * side, 10});
  return s;
}

}  // namespace detail

inline ModelSpec catalog_spec(const std::string& arch_id) {
  if (arch_id == "fnn1-32") return detail::fnn_spec(arch_id, {32});
  if (arch_id == "fnn1-256") return detail::fnn_spec(arch_id, {256});
  if (arch_id == "fnn2") return detail::fnn_spec(arch_id, {256, 32});
  if (arch_id == "cnn3") return detail::cnn_spec(arch_id, 3);
  if (arch_id == "cnn4") return detail::cnn_spec(arch_id, 4);
  if (arch_id == "cnn6") return detail::cnn_spec(arch_id, 6);
  if (arch_id == "cnn8") return detail::cnn_spec(arch_id, 8);
  throw ConfigError("unknown architecture id '" + arch_id + "'");
}

// He-uniform weights (bound sqrt(6 / fan_in)), zero biases. Draw order is
// fixed, so (spec, seed) fully determines the initial parameters.
inline Model instantiate(const ModelSpec& spec, std::uint64_t seed) {
  Model m;
  m.spec = spec;
  m.seed = seed;
  Rng rng(seed);
  for (const LayerSpec& ls : spec.layers) {
    Layer layer;
    layer.spec = ls;
    if (ls.kind == LayerKind::Dense) {
      const double bound = std::sqrt(6.0 / static_cast<double>(ls.in));
      layer.dense.weights =
          Tensor({ls.in, ls.out}, rng.uniform_vec(-bound, bound, ls.in * ls.out));
      layer.dense.bias = Tensor({ls.out});
    } else if (ls.kind == LayerKind::Conv) {
      const std::size_t fan_in = ls.in * kConvKernel * kConvKernel;
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      layer.conv.kernels =
          Tensor({ls.out, ls.in, kConvKernel, kConvKernel},
                 rng.uniform_vec(-bound, bound, ls.out * fan_in));
      layer.conv.bias = Tensor({ls.out});
    }
    m.layers.push_back(std::move(layer));
  }
  return m;
}

inline Model build_model(const std::string& arch_id, std::uint64_t seed) {
  return instantiate(catalog_spec(arch_id), seed);
}

}  // namespace advgray
