#pragma once

#include <string>
#include <vector>

#include "pelican/nn/common.hpp"

namespace pelican::nn {

/// Inverted dropout: in training each element is zeroed with probability
/// `rate` and survivors are scaled by 1 / (1 - rate). Inference is identity.
class Dropout {
 public:
  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
    if (!(rate >= 0.0 && rate < 1.0)) {
      throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    }
  }

  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Inference) return x;
    mask_ = Tensor::zeros_like(x);
    const double keep_scale = 1.0 / (1.0 - rate_);
    Tensor y = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      // rate 0 keeps everything without consuming the stream's meaning.
      const bool keep = rate_ == 0.0 || rng_.uniform() >= rate_;
      mask_[i] = keep ? keep_scale : 0.0;
      y[i] = x[i] * mask_[i];
    }
    cached_ = true;
    return y;
  }

  Tensor infer(const Tensor& x) const { return x; }

  Tensor backward(const Tensor& grad) {
    require_cache(cached_, "dropout");
    require_same_shape(grad, mask_, "dropout backward");
    Tensor dx = Tensor::zeros_like(grad);
    for (std::size_t i = 0; i < grad.size(); ++i) dx[i] = grad[i] * mask_[i];
    cached_ = false;
    mask_ = Tensor();
    return dx;
  }

  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  double rate() const { return rate_; }
  const Tensor& mask() const { return mask_; }

 private:
  double rate_;
  Rng rng_;
  bool cached_ = false;
  Tensor mask_;
};

}  // namespace pelican::nn
