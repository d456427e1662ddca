#pragma once

#include <string>
#include <utility>

#include "pelican/nn/common.hpp"

namespace pelican::nn {

/// Reshapes each sample to `sample_shape`, keeping the batch axis.
class Reshape {
 public:
  explicit Reshape(Shape sample_shape) : sample_shape_(std::move(sample_shape)) {}

  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Training) {
      input_shape_ = x.shape();
      cached_ = true;
    }
    return infer(x);
  }

  Tensor infer(const Tensor& x) const {
    Shape target{x.dim(0)};
    target.insert(target.end(), sample_shape_.begin(), sample_shape_.end());
    return x.reshape(std::move(target));
  }

  Tensor backward(const Tensor& grad) {
    require_cache(cached_, "reshape");
    cached_ = false;
    return grad.reshape(input_shape_);
  }

 private:
  Shape sample_shape_;
  Shape input_shape_;
  bool cached_ = false;
};

/// Mean over the time axis: (B,T,C) -> (B,C).
class GlobalAvgPool {
 public:
  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Training) {
      input_shape_ = x.shape();
      cached_ = true;
    }
    return infer(x);
  }

  Tensor infer(const Tensor& x) const {
    require_rank(x, 3, "global_avg_pool");
    const std::size_t batch = x.dim(0), length = x.dim(1), channels = x.dim(2);
    Tensor y({batch, channels});
    const double inv = 1.0 / static_cast<double>(length);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < length; ++t)
        for (std::size_t c = 0; c < channels; ++c) y.at(b, c) += x.at(b, t, c);
      for (std::size_t c = 0; c < channels; ++c) y.at(b, c) *= inv;
    }
    return y;
  }

  Tensor backward(const Tensor& grad) {
    require_cache(cached_, "global_avg_pool");
    const std::size_t batch = input_shape_[0], length = input_shape_[1], channels = input_shape_[2];
    if (grad.shape() != Shape{batch, channels}) throw ShapeError("global_avg_pool backward: gradient shape mismatch");
    Tensor dx(input_shape_);
    const double inv = 1.0 / static_cast<double>(length);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < length; ++t)
        for (std::size_t c = 0; c < channels; ++c) dx.at(b, t, c) = grad.at(b, c) * inv;
    cached_ = false;
    return dx;
  }

 private:
  Shape input_shape_;
  bool cached_ = false;
};

/// Elementwise sum of the main path and the shortcut. Its shape check is where
/// a filters/recurrent-units vs input-width mismatch surfaces.
inline Tensor residual_add(const Tensor& main, const Tensor& shortcut) {
  if (main.shape() != shortcut.shape()) {
    throw ShapeError("residual add: main path " + to_string(main.shape()) + " vs shortcut " +
                     to_string(shortcut.shape()) + " (filters and recurrent units must equal the input width)");
  }
  Tensor y = main;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += shortcut[i];
  return y;
}

/// Backward of residual_add: the upstream gradient goes unchanged to both branches.
inline std::pair<Tensor, Tensor> residual_add_backward(const Tensor& grad) { return {grad, grad}; }

}  // namespace pelican::nn
