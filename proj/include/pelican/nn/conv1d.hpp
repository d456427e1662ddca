#pragma once

#include <string>
#include <vector>

#include "pelican/kernels.hpp"
#include "pelican/nn/common.hpp"

namespace pelican::nn {

/// Conv1D over (B,T,Cin) with "same" padding, followed by nothing; the block
/// applies ReLU separately.
class Conv1d {
 public:
  Conv1d(std::string name, std::size_t in_channels, std::size_t filters, std::size_t kernel, Rng& rng)
      : name_(std::move(name)),
        kernels_(name_ + ".kernel",
                 glorot_uniform({kernel, in_channels, filters}, kernel * in_channels, kernel * filters, rng)),
        bias_(name_ + ".bias", Tensor({filters}, 0.0)) {
    if (kernel == 0) throw ConfigError(name_ + ": kernel size must be >= 1");
  }

  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Inference) return infer(x);
    input_ = x;
    cached_ = true;
    return conv1d_same(x, kernels_.value, bias_.value);
  }

  Tensor infer(const Tensor& x) const { return conv1d_same(x, kernels_.value, bias_.value); }

  Tensor backward(const Tensor& grad) {
    require_cache(cached_, name_);
    auto g = conv1d_same_backward(input_, kernels_.value, grad);
    for (std::size_t i = 0; i < g.kernels.size(); ++i) kernels_.grad[i] += g.kernels[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i) bias_.grad[i] += g.bias[i];
    cached_ = false;
    input_ = Tensor();
    return std::move(g.input);
  }

  std::vector<Parameter*> parameters() { return {&kernels_, &bias_}; }
  std::vector<const Parameter*> parameters() const { return {&kernels_, &bias_}; }
  Parameter& kernels() { return kernels_; }
  Parameter& bias() { return bias_; }

 private:
  std::string name_;
  Parameter kernels_;
  Parameter bias_;
  bool cached_ = false;
  Tensor input_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Training) {
      input_ = x;
      cached_ = true;
    }
    return relu(x);
  }

  Tensor infer(const Tensor& x) const { return relu(x); }

  Tensor backward(const Tensor& grad) {
    require_cache(cached_, "relu");
    require_same_shape(grad, input_, "relu backward");
    Tensor dx = Tensor::zeros_like(grad);
    for (std::size_t i = 0; i < grad.size(); ++i) dx[i] = grad[i] * relu_derivative(input_[i]);
    cached_ = false;
    input_ = Tensor();
    return dx;
  }

 private:
  bool cached_ = false;
  Tensor input_;
};

}  // namespace pelican::nn
