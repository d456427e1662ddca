#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "pelican/tensor.hpp"

namespace pelican {

namespace detail {

// Row-major GEMM kernels. All operands are contiguous; C is accumulated into.
// The summation order for each output element is fixed by the loop nest, so
// results are reproducible run to run.

// C[m,n] += A[m,k] * B[k,n]
inline void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* __restrict a,
                    const double* __restrict b, double* __restrict c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* __restrict c0 = c + i * n;
    double* __restrict c1 = c0 + n;
    double* __restrict c2 = c1 + n;
    double* __restrict c3 = c2 + n;
    const double* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* __restrict brow = b + p * n;
      const double x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p], x3 = a0[3 * k + p];
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = brow[j];
        c0[j] += x0 * bj;
        c1[j] += x1 * bj;
        c2[j] += x2 * bj;
        c3[j] += x3 * bj;
      }
    }
  }
  for (; i < m; ++i) {
    double* __restrict ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* __restrict brow = b + p * n;
      const double x = ai[p];
      for (std::size_t j = 0; j < n; ++j) ci[j] += x * brow[j];
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
inline void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* __restrict a,
                    const double* __restrict b, double* __restrict c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* b0 = b + i * n;
    const double* b1 = b0 + n;
    const double* b2 = b1 + n;
    const double* b3 = b2 + n;
    const double* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      double* __restrict cp = c + p * n;
      const double x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p], x3 = a0[3 * k + p];
      for (std::size_t j = 0; j < n; ++j) cp[j] += x0 * b0[j] + x1 * b1[j] + x2 * b2[j] + x3 * b3[j];
    }
  }
  for (; i < m; ++i) {
    const double* bi = b + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      double* __restrict cp = c + p * n;
      const double x = ai[p];
      for (std::size_t j = 0; j < n; ++j) cp[j] += x * bi[j];
    }
  }
}

inline std::vector<double> transpose(std::size_t rows, std::size_t cols, const double* src) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

// C[m,k] += A[m,n] * B[k,n]^T
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c) {
  const auto bt = transpose(k, n, b);
  gemm_nn(m, n, k, a, bt.data(), c);
}

}  // namespace detail

/// Matrix product of a[m,k] and b[k,n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  detail::gemm_nn(a.dim(0), a.dim(1), b.dim(1), a.raw(), b.raw(), c.raw());
  return c;
}

// ---------------------------------------------------------------------------
// 1-D convolution with "same" padding.

/// Zero padding placed before the sequence; the remainder (one more for even
/// kernels) goes after it.
inline std::size_t same_pad_before(std::size_t kernel) { return (kernel - 1) / 2; }

namespace detail {

struct ConvGeometry {
  std::size_t batch, length, in_channels, kernel, out_channels;
};

inline ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels) {
  if (kernels.rank() != 3) {
    throw ShapeError("conv1d: kernels must be (K,Cin,Cout), got " + to_string(kernels.shape()));
  }
  ConvGeometry g{};
  if (input.rank() == 2) {
    g.batch = 1;
    g.length = input.dim(0);
    g.in_channels = input.dim(1);
  } else if (input.rank() == 3) {
    g.batch = input.dim(0);
    g.length = input.dim(1);
    g.in_channels = input.dim(2);
  } else {
    throw ShapeError("conv1d: input must be (T,C) or (B,T,C), got " + to_string(input.shape()));
  }
  if (kernels.dim(1) != g.in_channels) {
    throw ShapeError("conv1d: input has " + std::to_string(g.in_channels) +
                     " channels but kernels expect " + std::to_string(kernels.dim(1)));
  }
  g.kernel = kernels.dim(0);
  g.out_channels = kernels.dim(2);
  return g;
}

// Calls fn(tap, out_row_begin, in_row_begin, rows) for every contiguous run of
// output rows that a kernel tap reaches without touching padding.
template <typename Fn>
void for_each_tap_run(const ConvGeometry& g, Fn&& fn) {
  const auto before = static_cast<std::ptrdiff_t>(same_pad_before(g.kernel));
  const auto length = static_cast<std::ptrdiff_t>(g.length);
  for (std::size_t tap = 0; tap < g.kernel; ++tap) {
    const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(tap) - before;
    const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -offset);
    const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(length, length - offset);
    if (t0 >= t1) continue;
    if (offset == 0) {
      // Whole batch is one contiguous block.
      fn(tap, std::size_t{0}, std::size_t{0}, g.batch * g.length);
      continue;
    }
    for (std::size_t b = 0; b < g.batch; ++b) {
      const std::size_t base = b * g.length;
      fn(tap, base + static_cast<std::size_t>(t0), base + static_cast<std::size_t>(t0 + offset),
         static_cast<std::size_t>(t1 - t0));
    }
  }
}

}  // namespace detail

/// Cross-correlation of input (T,Cin) or (B,T,Cin) with kernels (K,Cin,Cout),
/// zero-padded so the output keeps length T.
inline Tensor conv1d_same(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const auto g = detail::conv_geometry(input, kernels);
  if (bias.size() != g.out_channels) {
    throw ShapeError("conv1d: bias has " + std::to_string(bias.size()) + " entries, expected " +
                     std::to_string(g.out_channels));
  }
  Shape out_shape = input.shape();
  out_shape.back() = g.out_channels;
  Tensor out(out_shape);
  const std::size_t rows = g.batch * g.length;
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(bias.data().begin(), bias.data().end(), out.raw() + r * g.out_channels);

  const std::size_t tap_stride = g.in_channels * g.out_channels;
  detail::for_each_tap_run(g, [&](std::size_t tap, std::size_t out_row, std::size_t in_row, std::size_t n) {
    detail::gemm_nn(n, g.in_channels, g.out_channels, input.raw() + in_row * g.in_channels,
                    kernels.raw() + tap * tap_stride, out.raw() + out_row * g.out_channels);
  });
  return out;
}

struct Conv1dGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};

inline Conv1dGrads conv1d_same_backward(const Tensor& input, const Tensor& kernels,
                                        const Tensor& grad_out) {
  const auto g = detail::conv_geometry(input, kernels);
  Shape out_shape = input.shape();
  out_shape.back() = g.out_channels;
  if (grad_out.shape() != out_shape) {
    throw ShapeError("conv1d backward: gradient shape " + to_string(grad_out.shape()) +
                     " does not match output shape " + to_string(out_shape));
  }
  Conv1dGrads grads{Tensor::zeros_like(input), Tensor::zeros_like(kernels),
                    Tensor::zeros({g.out_channels})};
  const std::size_t rows = g.batch * g.length;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* go = grad_out.raw() + r * g.out_channels;
    for (std::size_t c = 0; c < g.out_channels; ++c) grads.bias[c] += go[c];
  }

  const std::size_t tap_stride = g.in_channels * g.out_channels;
  std::vector<std::vector<double>> transposed(g.kernel);
  detail::for_each_tap_run(g, [&](std::size_t tap, std::size_t out_row, std::size_t in_row, std::size_t n) {
    detail::gemm_tn(n, g.in_channels, g.out_channels, input.raw() + in_row * g.in_channels,
                    grad_out.raw() + out_row * g.out_channels, grads.kernels.raw() + tap * tap_stride);
    auto& wt = transposed[tap];
    if (wt.empty()) wt = detail::transpose(g.in_channels, g.out_channels, kernels.raw() + tap * tap_stride);
    detail::gemm_nn(n, g.out_channels, g.in_channels, grad_out.raw() + out_row * g.out_channels,
                    wt.data(), grads.input.raw() + in_row * g.in_channels);
  });
  return grads;
}

// ---------------------------------------------------------------------------
// Elementwise activations. Derivatives are zero exactly at kink points.

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double relu_derivative(double x) { return x > 0.0 ? 1.0 : 0.0; }

inline double hard_sigmoid(double x) { return std::clamp(0.2 * x + 0.5, 0.0, 1.0); }
inline double hard_sigmoid_derivative(double x) { return (x > -2.5 && x < 2.5) ? 0.2 : 0.0; }

inline double tanh_derivative(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

template <typename Fn>
Tensor map(const Tensor& x, Fn&& fn) {
  Tensor out = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
  return out;
}

inline Tensor relu(const Tensor& x) { return map(x, [](double v) { return relu(v); }); }
inline Tensor relu_derivative(const Tensor& x) { return map(x, [](double v) { return relu_derivative(v); }); }
inline Tensor hard_sigmoid(const Tensor& x) { return map(x, [](double v) { return hard_sigmoid(v); }); }
inline Tensor hard_sigmoid_derivative(const Tensor& x) {
  return map(x, [](double v) { return hard_sigmoid_derivative(v); });
}
inline Tensor tanh(const Tensor& x) { return map(x, [](double v) { return std::tanh(v); }); }
inline Tensor tanh_derivative(const Tensor& x) { return map(x, [](double v) { return tanh_derivative(v); }); }

// ---------------------------------------------------------------------------
// Softmax head.

/// Row-wise softmax of (B,C) logits with max subtraction.
inline Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  Tensor out = Tensor::zeros_like(logits);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = logits.raw() + r * cols;
    double* o = out.raw() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= sum;
  }
  return out;
}

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Mean categorical cross-entropy of softmax(logits) against one-hot rows,
/// with the gradient (softmax - onehot) / B.
inline LossAndGrad softmax_cross_entropy(const Tensor& logits, const Tensor& onehot) {
  require_rank(logits, 2, "softmax_cross_entropy");
  if (onehot.shape() != logits.shape()) {
    throw ShapeError("softmax_cross_entropy: logits " + to_string(logits.shape()) + " vs labels " +
                     to_string(onehot.shape()));
  }
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  LossAndGrad out{0.0, Tensor::zeros_like(logits)};
  const double inv_batch = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = logits.raw() + r * cols;
    const double* y = onehot.raw() + r * cols;
    double* gr = out.grad.raw() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(in[c] - mx);
    const double log_sum = std::log(sum);
    std::size_t hot = cols;
    for (std::size_t c = 0; c < cols; ++c) {
      if (y[c] == 1.0) {
        if (hot != cols) throw DataError("softmax_cross_entropy: label row " + std::to_string(r) + " is not one-hot");
        hot = c;
      } else if (y[c] != 0.0) {
        throw DataError("softmax_cross_entropy: label row " + std::to_string(r) + " is not one-hot");
      }
    }
    if (hot == cols) throw DataError("softmax_cross_entropy: label row " + std::to_string(r) + " is not one-hot");
    out.loss += -(in[hot] - mx - log_sum);
    for (std::size_t c = 0; c < cols; ++c) gr[c] = (std::exp(in[c] - mx - log_sum) - y[c]) * inv_batch;
  }
  out.loss *= inv_batch;
  return out;
}

/// Index of the largest entry in each row (first on ties).
inline std::vector<std::size_t> argmax_rows(const Tensor& t) {
  require_rank(t, 2, "argmax_rows");
  const std::size_t rows = t.dim(0), cols = t.dim(1);
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = t.raw() + r * cols;
    out[r] = static_cast<std::size_t>(std::max_element(p, p + cols) - p);
  }
  return out;
}

}  // namespace pelican
