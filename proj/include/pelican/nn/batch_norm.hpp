#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pelican/nn/common.hpp"

namespace pelican::nn {

struct BatchNormOptions {
  double momentum = 0.99;
  double epsilon = 1e-5;
};

/// Per-channel batch normalization over every leading axis of a (..., C)
/// tensor. For (B,T,C) input the statistics span the B*T rows.
///
/// Running statistics follow running = momentum * running + (1 - momentum) * batch,
/// using the biased batch variance, and start at mean 0 / variance 1.
class BatchNorm {
 public:
  BatchNorm(std::string name, std::size_t channels, BatchNormOptions opts = {})
      : name_(std::move(name)),
        opts_(opts),
        gamma_(name_ + ".gamma", Tensor({channels}, 1.0)),
        beta_(name_ + ".beta", Tensor({channels}, 0.0)),
        running_mean_({channels}, 0.0),
        running_var_({channels}, 1.0) {}

  std::size_t channels() const { return gamma_.value.size(); }

  Tensor forward(const Tensor& x, Mode mode) { return mode == Mode::Training ? train_forward(x) : infer(x); }

  Tensor infer(const Tensor& x) const {
    check_input(x);
    const std::size_t c = channels(), rows = rows_of(x);
    std::vector<double> scale(c), shift(c);
    for (std::size_t j = 0; j < c; ++j) {
      scale[j] = gamma_.value[j] / std::sqrt(running_var_[j] + opts_.epsilon);
      shift[j] = beta_.value[j] - running_mean_[j] * scale[j];
    }
    Tensor y = Tensor::zeros_like(x);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* in = x.raw() + r * c;
      double* out = y.raw() + r * c;
      for (std::size_t j = 0; j < c; ++j) out[j] = in[j] * scale[j] + shift[j];
    }
    return y;
  }

  Tensor train_forward(const Tensor& x) {
    check_input(x);
    const std::size_t c = channels(), rows = rows_of(x);
    if (rows < 2) {
      throw ShapeError(name_ + ": training-mode batch normalization needs at least 2 rows per channel, got " +
                       std::to_string(rows));
    }
    const double n = static_cast<double>(rows);
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* in = x.raw() + r * c;
      for (std::size_t j = 0; j < c; ++j) mean[j] += in[j];
    }
    for (auto& m : mean) m /= n;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* in = x.raw() + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double d = in[j] - mean[j];
        var[j] += d * d;
      }
    }
    for (auto& v : var) v /= n;

    inv_std_.assign(c, 0.0);
    for (std::size_t j = 0; j < c; ++j) inv_std_[j] = 1.0 / std::sqrt(var[j] + opts_.epsilon);

    normalized_ = Tensor::zeros_like(x);
    Tensor y = Tensor::zeros_like(x);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* in = x.raw() + r * c;
      double* xh = normalized_.raw() + r * c;
      double* out = y.raw() + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        xh[j] = (in[j] - mean[j]) * inv_std_[j];
        out[j] = xh[j] * gamma_.value[j] + beta_.value[j];
      }
    }
    for (std::size_t j = 0; j < c; ++j) {
      running_mean_[j] = opts_.momentum * running_mean_[j] + (1.0 - opts_.momentum) * mean[j];
      running_var_[j] = opts_.momentum * running_var_[j] + (1.0 - opts_.momentum) * var[j];
    }
    cached_ = true;
    return y;
  }

  Tensor backward(const Tensor& grad) {
    require_cache(cached_, name_);
    require_same_shape(grad, normalized_, name_.c_str());
    const std::size_t c = channels(), rows = rows_of(grad);
    const double n = static_cast<double>(rows);
    std::vector<double> sum_dxh(c, 0.0), sum_dxh_xh(c, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = grad.raw() + r * c;
      const double* xh = normalized_.raw() + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        gamma_.grad[j] += g[j] * xh[j];
        beta_.grad[j] += g[j];
        const double dxh = g[j] * gamma_.value[j];
        sum_dxh[j] += dxh;
        sum_dxh_xh[j] += dxh * xh[j];
      }
    }
    Tensor dx = Tensor::zeros_like(grad);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = grad.raw() + r * c;
      const double* xh = normalized_.raw() + r * c;
      double* out = dx.raw() + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double dxh = g[j] * gamma_.value[j];
        out[j] = inv_std_[j] / n * (n * dxh - sum_dxh[j] - xh[j] * sum_dxh_xh[j]);
      }
    }
    cached_ = false;
    normalized_ = Tensor();
    return dx;
  }

  std::vector<Parameter*> parameters() { return {&gamma_, &beta_}; }
  std::vector<const Parameter*> parameters() const { return {&gamma_, &beta_}; }

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }
  const std::string& name() const { return name_; }

 private:
  void check_input(const Tensor& x) const {
    if (x.shape().back() != channels()) {
      throw ShapeError(name_ + ": expected " + std::to_string(channels()) + " channels, got shape " +
                       to_string(x.shape()));
    }
  }

  std::string name_;
  BatchNormOptions opts_;
  Parameter gamma_;
  Parameter beta_;
  Tensor running_mean_;
  Tensor running_var_;

  bool cached_ = false;
  Tensor normalized_;
  std::vector<double> inv_std_;
};

}  // namespace pelican::nn
