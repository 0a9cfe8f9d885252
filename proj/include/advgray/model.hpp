#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advgray/layers.hpp"
#include "advgray/tensor.hpp"

namespace advgray {

enum class LayerKind { Dense, Conv, Relu, MaxPool2, Flatten };

struct LayerSpec {
  LayerKind kind;
  std::size_t in = 0;   // dense: input width; conv: input channels
  std::size_t out = 0;  // dense: output width; conv: output channels
};

struct ModelSpec {
  std::string arch_id;
  std::vector<std::size_t> input_shape;  // [784] for flat input, [1,28,28] for images
  std::vector<LayerSpec> layers;
};

struct Layer {
  LayerSpec spec;
  DenseLayer dense;  // populated when kind == Dense
  ConvLayer conv;    // populated when kind == Conv
};

struct Model {
  ModelSpec spec;
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  std::size_t output_classes() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
      if (it->spec.kind == LayerKind::Dense) return it->spec.out;
    return 0;
  }
};

// Walk parameter tensors in a canonical order: layer by layer, weights
// before bias. Gradients and optimizer steps index the same order.
template <typename Fn>
void for_each_parameter(Model& m, Fn&& fn) {
  for (auto& layer : m.layers) {
    if (layer.spec.kind == LayerKind::Dense) {
      fn(layer.dense.weights);
      fn(layer.dense.bias);
    } else if (layer.spec.kind == LayerKind::Conv) {
      fn(layer.conv.kernels);
      fn(layer.conv.bias);
    }
  }
}

template <typename Fn>
void for_each_parameter(const Model& m, Fn&& fn) {
  for (const auto& layer : m.layers) {
    if (layer.spec.kind == LayerKind::Dense) {
      fn(layer.dense.weights);
      fn(layer.dense.bias);
    } else if (layer.spec.kind == LayerKind::Conv) {
      fn(layer.conv.kernels);
      fn(layer.conv.bias);
    }
  }
}

inline std::size_t parameter_count(const Model& m) {
  std::size_t n = 0;
  for_each_parameter(m, [&](const Tensor& t) { n += t.size(); });
  return n;
}

// Per-layer forward inputs cached for one batch; feeds the backward pass.
struct BatchActivations {
  std::vector<Tensor> inputs;        // inputs[i] is what layers[i] consumed
  std::vector<PoolArgmax> pool_idx;  // parallel to layers, used by MaxPool2
  Tensor logits;
};

inline BatchActivations model_forward(const Model& m, const Tensor& x) {
  std::vector<std::size_t> want = {x.dim(0)};
  for (std::size_t d : m.spec.input_shape) want.push_back(d);
  if (x.shape() != want) {
    throw DimensionError("model_forward: batch " + shape_string(x) +
                         " does not match model input " +
                         Tensor::shape_string(want));
  }
  BatchActivations acts;
  acts.inputs.reserve(m.layers.size());
  acts.pool_idx.resize(m.layers.size());
  Tensor cur = x;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const Layer& layer = m.layers[i];
    acts.inputs.push_back(cur);
    switch (layer.spec.kind) {
      case LayerKind::Dense:
        cur = dense_forward(layer.dense, cur);
        break;
      case LayerKind::Conv:
        cur = conv2d_forward(layer.conv, cur);
        break;
      case LayerKind::Relu:
        cur = relu(cur);
        break;
      case LayerKind::MaxPool2: {
        PoolResult pr = maxpool2_forward(cur);
        acts.pool_idx[i] = std::move(pr.argmax);
        cur = std::move(pr.output);
        break;
      }
      case LayerKind::Flatten:
        cur = cur.reshaped({cur.dim(0), cur.size() / cur.dim(0)});
        break;
    }
  }
  acts.logits = std::move(cur);
  return acts;
}

// Contiguous sample slice [begin, end) of an [n, ...] tensor.
inline Tensor slice_batch(const Tensor& images, std::size_t begin,
                          std::size_t end) {
  const std::size_t per = images.size() / images.dim(0);
  std::vector<std::size_t> shape = images.shape();
  shape[0] = end - begin;
  return Tensor(std::move(shape),
                std::vector<double>(images.data() + begin * per,
                                    images.data() + end * per));
}

// Reshape an [n, c, h, w] batch to the model's input arity (flat models
// consume [n, c*h*w]).
inline Tensor adapt_batch(const Model& m, Tensor batch) {
  if (m.spec.input_shape.size() == 1 && batch.rank() != 2) {
    return batch.reshaped({batch.dim(0), batch.size() / batch.dim(0)});
  }
  return batch;
}

struct BackwardResult {
  std::vector<Tensor> param_grads;  // canonical parameter order
  Tensor input_grads;               // shape of the input batch
  double loss = 0.0;
};

inline BackwardResult model_backward(const Model& m,
                                     const BatchActivations& acts,
                                     std::span<const std::uint8_t> labels) {
  BackwardResult res;
  XentResult x = softmax_xent(acts.logits, labels);
  res.loss = x.loss;

  std::vector<Tensor> rev_grads;  // per layer, reversed order
  Tensor grad = std::move(x.grad_logits);
  for (std::size_t idx = m.layers.size(); idx-- > 0;) {
    const Layer& layer = m.layers[idx];
    const Tensor& input = acts.inputs[idx];
    switch (layer.spec.kind) {
      case LayerKind::Dense: {
        DenseGrads g = dense_backward(layer.dense, input, grad);
        rev_grads.push_back(std::move(g.bias));
        rev_grads.push_back(std::move(g.weights));
        grad = std::move(g.input);
        break;
      }
      case LayerKind::Conv: {
        ConvGrads g = conv2d_backward(layer.conv, input, grad);
        rev_grads.push_back(std::move(g.bias));
        rev_grads.push_back(std::move(g.kernels));
        grad = std::move(g.input);
        break;
      }
      case LayerKind::Relu:
        grad = relu_backward(input, grad);
        break;
      case LayerKind::MaxPool2:
        grad = maxpool2_backward(acts.pool_idx[idx], grad);
        break;
      case LayerKind::Flatten:
        grad = grad.reshaped(input.shape());
        break;
    }
  }
  res.param_grads.assign(rev_grads.rbegin(), rev_grads.rend());
  res.input_grads = std::move(grad);
  return res;
}

}  // namespace advgray
