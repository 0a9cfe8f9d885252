#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "advgray/errors.hpp"
#include "advgray/tensor.hpp"

namespace advgray {

struct DenseLayer {
  Tensor weights;  // [in, out]
  Tensor bias;     // [out]

  std::size_t in() const { return weights.dim(0); }
  std::size_t out() const { return weights.dim(1); }
};

// 3x3 kernels, padding 1, stride 1 throughout; spatial dims are preserved.
struct ConvLayer {
  Tensor kernels;  // [out_ch, in_ch, 3, 3]
  Tensor bias;     // [out_ch]

  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t out_channels() const { return kernels.dim(0); }
};

inline constexpr std::size_t kConvKernel = 3;
inline constexpr std::size_t kConvPad = 1;

// ---------------------------------------------------------------------------
// Dense

inline Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != layer.in()) {
    throw DimensionError("dense_forward: input " + shape_string(x) +
                         " does not match weights " +
                         shape_string(layer.weights));
  }
  Tensor y = matmul(x, layer.weights);
  const std::size_t b = y.dim(0), out = y.dim(1);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < out; ++j) y[i * out + j] += layer.bias[j];
  return y;
}

struct DenseGrads {
  Tensor weights;
  Tensor bias;
  Tensor input;
};

inline DenseGrads dense_backward(const DenseLayer& layer, const Tensor& x,
                                 const Tensor& grad_out) {
  if (grad_out.rank() != 2 || grad_out.dim(1) != layer.out() ||
      grad_out.dim(0) != x.dim(0)) {
    throw DimensionError("dense_backward: upstream " + shape_string(grad_out) +
                         " does not match input " + shape_string(x) +
                         " and weights " + shape_string(layer.weights));
  }
  DenseGrads g;
  g.weights = matmul(transpose(x), grad_out);
  g.bias = Tensor({layer.out()});
  const std::size_t b = grad_out.dim(0), out = layer.out();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < out; ++j) g.bias[j] += grad_out[i * out + j];
  g.input = matmul(grad_out, transpose(layer.weights));
  return g;
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation), via im2col + the deterministic matmul.

namespace detail {

// One sample [ic, h, w] -> columns [ic*9, h*w] under pad 1.
inline Tensor im2col(const double* x, std::size_t ic, std::size_t h,
                     std::size_t w) {
  Tensor cols({ic * kConvKernel * kConvKernel, h * w});
  double* pc = cols.data();
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < ic; ++c) {
    const double* plane = x + c * hw;
    for (std::size_t ky = 0; ky < kConvKernel; ++ky) {
      for (std::size_t kx = 0; kx < kConvKernel; ++kx) {
        double* row = pc + ((c * kConvKernel + ky) * kConvKernel + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy =
              static_cast<std::ptrdiff_t>(y + ky) - kConvPad;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const std::ptrdiff_t sx =
                static_cast<std::ptrdiff_t>(xx + kx) - kConvPad;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            row[y * w + xx] = plane[sy * w + sx];
          }
        }
      }
    }
  }
  return cols;
}

inline void col2im_add(const Tensor& cols, double* gx, std::size_t ic,
                       std::size_t h, std::size_t w) {
  const double* pc = cols.data();
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < ic; ++c) {
    double* plane = gx + c * hw;
    for (std::size_t ky = 0; ky < kConvKernel; ++ky) {
      for (std::size_t kx = 0; kx < kConvKernel; ++kx) {
        const double* row = pc + ((c * kConvKernel + ky) * kConvKernel + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy =
              static_cast<std::ptrdiff_t>(y + ky) - kConvPad;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const std::ptrdiff_t sx =
                static_cast<std::ptrdiff_t>(xx + kx) - kConvPad;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            plane[sy * w + sx] += row[y * w + xx];
          }
        }
      }
    }
  }
}

}  // namespace detail

inline Tensor conv2d_forward(const ConvLayer& layer, const Tensor& x) {
  if (x.rank() != 4 || x.dim(1) != layer.in_channels()) {
    throw DimensionError("conv2d_forward: input " + shape_string(x) +
                         " does not match kernels " +
                         shape_string(layer.kernels));
  }
  const std::size_t b = x.dim(0), ic = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oc = layer.out_channels(), hw = h * w;
  const Tensor kmat = layer.kernels.reshaped({oc, ic * 9});
  Tensor y({b, oc, h, w});
  for (std::size_t s = 0; s < b; ++s) {
    Tensor cols = detail::im2col(x.data() + s * ic * hw, ic, h, w);
    Tensor out = matmul(kmat, cols);  // [oc, hw]
    double* py = y.data() + s * oc * hw;
    for (std::size_t o = 0; o < oc; ++o) {
      const double bo = layer.bias[o];
      for (std::size_t p = 0; p < hw; ++p) py[o * hw + p] = out[o * hw + p] + bo;
    }
  }
  return y;
}

struct ConvGrads {
  Tensor kernels;
  Tensor bias;
  Tensor input;
};

inline ConvGrads conv2d_backward(const ConvLayer& layer, const Tensor& x,
                                 const Tensor& grad_out) {
  if (grad_out.rank() != 4 || grad_out.dim(0) != x.dim(0) ||
      grad_out.dim(1) != layer.out_channels() || grad_out.dim(2) != x.dim(2) ||
      grad_out.dim(3) != x.dim(3)) {
    throw DimensionError("conv2d_backward: upstream " + shape_string(grad_out) +
                         " does not match input " + shape_string(x) +
                         " and kernels " + shape_string(layer.kernels));
  }
  const std::size_t b = x.dim(0), ic = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oc = layer.out_channels(), hw = h * w;
  const Tensor kmat = layer.kernels.reshaped({oc, ic * 9});
  const Tensor kmat_t = transpose(kmat);

  ConvGrads g;
  g.kernels = Tensor(layer.kernels.shape());
  g.bias = Tensor({oc});
  g.input = Tensor(x.shape());
  Tensor gk_mat({oc, ic * 9});

  // Samples accumulate sequentially so the gradient sums have one fixed
  // order; the matmuls inside are row-parallel safe.
  for (std::size_t s = 0; s < b; ++s) {
    Tensor cols = detail::im2col(x.data() + s * ic * hw, ic, h, w);
    Tensor go({oc, hw},
              std::vector<double>(grad_out.data() + s * oc * hw,
                                  grad_out.data() + (s + 1) * oc * hw));
    add_inplace(gk_mat, matmul(go, transpose(cols)));
    for (std::size_t o = 0; o < oc; ++o) {
      double acc = 0.0;
      for (std::size_t p = 0; p < hw; ++p) acc += go[o * hw + p];
      g.bias[o] += acc;
    }
    Tensor gcols = matmul(kmat_t, go);  // [ic*9, hw]
    detail::col2im_add(gcols, g.input.data() + s * ic * hw, ic, h, w);
  }
  g.kernels = gk_mat.reshaped(layer.kernels.shape());
  return g;
}

// ---------------------------------------------------------------------------
// 2x2 max-pooling, stride 2, floor semantics (odd trailing row/col dropped).

struct PoolArgmax {
  std::vector<std::size_t> input_shape;
  std::vector<std::size_t> flat;  // per output element: flat input index of max
};

struct PoolResult {
  Tensor output;
  PoolArgmax argmax;
};

inline PoolResult maxpool2_forward(const Tensor& x) {
  if (x.rank() != 4 || x.dim(2) < 2 || x.dim(3) < 2) {
    throw DimensionError("maxpool2_forward: need [b,c,h,w] with h,w >= 2, got " +
                         shape_string(x));
  }
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult r;
  r.output = Tensor({b, c, oh, ow});
  r.argmax.input_shape = x.shape();
  r.argmax.flat.resize(r.output.size());
  std::size_t oi = 0;
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (s * c + ch) * h * w;
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t xx = 0; xx < ow; ++xx) {
          // Ties resolve to the first element in row-major window order.
          std::size_t best = base + (2 * y) * w + 2 * xx;
          double bv = x[best];
          const std::size_t cands[3] = {best + 1, best + w, best + w + 1};
          for (std::size_t k = 0; k < 3; ++k) {
            if (x[cands[k]] > bv) {
              bv = x[cands[k]];
              best = cands[k];
            }
          }
          r.output[oi] = bv;
          r.argmax.flat[oi] = best;
          ++oi;
        }
      }
    }
  }
  return r;
}

inline Tensor maxpool2_backward(const PoolArgmax& argmax,
                                const Tensor& grad_out) {
  if (grad_out.size() != argmax.flat.size()) {
    throw DimensionError("maxpool2_backward: upstream " +
                         shape_string(grad_out) + " does not match " +
                         std::to_string(argmax.flat.size()) +
                         " recorded window maxima");
  }
  Tensor gx(argmax.input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i)
    gx[argmax.flat[i]] += grad_out[i];
  return gx;
}

// ---------------------------------------------------------------------------
// ReLU; subgradient at exactly 0 is 0.

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] < 0.0) y[i] = 0.0;
  return y;
}

inline Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  if (x.shape() != grad_out.shape()) {
    throw DimensionError("relu_backward: shapes " + shape_string(x) + " vs " +
                         shape_string(grad_out));
  }
  Tensor gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    gx[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
  return gx;
}

// ---------------------------------------------------------------------------
// Fused softmax + cross-entropy, row max subtracted before exponentiation.

struct XentResult {
  double loss = 0.0;
  Tensor grad_logits;  // (probs - onehot) / batch
  Tensor probs;
};

inline XentResult softmax_xent(const Tensor& logits,
                               std::span<const std::uint8_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("softmax_xent: logits " + shape_string(logits) +
                         " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  XentResult r;
  r.probs = Tensor({b, k});
  r.grad_logits = Tensor({b, k});
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= k) {
      throw DataError("softmax_xent: label " + std::to_string(labels[i]) +
                      " outside [0, " + std::to_string(k - 1) + "]");
    }
    const double* row = logits.data() + i * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(row[j] - mx) / z;
      r.probs[i * k + j] = p;
      r.grad_logits[i * k + j] = p / static_cast<double>(b);
    }
    r.grad_logits[i * k + labels[i]] -= 1.0 / static_cast<double>(b);
    loss_sum += mx + logz - row[labels[i]];
  }
  r.loss = loss_sum / static_cast<double>(b);
  return r;
}

}  // namespace advgray
