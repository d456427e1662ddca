#pragma once

#include <limits>
#include <string>
#include <vector>

#include "pelican/nn/common.hpp"

namespace pelican::nn {

struct MaxPoolOptions {
  std::size_t pool = 2;
  std::size_t stride = 1;
  bool same_pad = true;
};

/// Max pooling over the time axis of (B,T,C).
///
/// With same_pad the output length is ceil(T / stride) and the padding
/// (ignored by the max) is split with the extra position on the trailing side.
/// Backward routes each window's gradient to its first argmax.
class MaxPool1d {
 public:
  explicit MaxPool1d(MaxPoolOptions opts = {}) : opts_(opts) {
    if (opts_.pool == 0) throw ConfigError("maxpool: pool size must be >= 1");
    if (opts_.stride == 0) throw ConfigError("maxpool: stride must be >= 1");
  }

  std::size_t output_length(std::size_t length) const {
    if (opts_.same_pad) return (length + opts_.stride - 1) / opts_.stride;
    if (opts_.pool > length) {
      throw ShapeError("maxpool: pool " + std::to_string(opts_.pool) + " exceeds sequence length " +
                       std::to_string(length));
    }
    return (length - opts_.pool) / opts_.stride + 1;
  }

  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Inference) return infer(x);
    input_shape_ = x.shape();
    cached_ = true;
    return pool(x, &argmax_);
  }

  Tensor infer(const Tensor& x) const { return pool(x, nullptr); }

  Tensor backward(const Tensor& grad) {
    require_cache(cached_, "maxpool");
    if (grad.size() != argmax_.size()) throw ShapeError("maxpool backward: gradient size mismatch");
    Tensor dx(input_shape_);
    for (std::size_t i = 0; i < grad.size(); ++i) dx[argmax_[i]] += grad[i];
    cached_ = false;
    argmax_.clear();
    return dx;
  }

  const MaxPoolOptions& options() const { return opts_; }

 private:
  Tensor pool(const Tensor& x, std::vector<std::size_t>* argmax) const {
    require_rank(x, 3, "maxpool");
    const std::size_t batch = x.dim(0), length = x.dim(1), channels = x.dim(2);
    const std::size_t out_len = output_length(length);
    std::size_t pad_before = 0;
    if (opts_.same_pad) {
      const std::size_t needed = (out_len - 1) * opts_.stride + opts_.pool;
      const std::size_t total = needed > length ? needed - length : 0;
      pad_before = total / 2;
    }
    Tensor y({batch, out_len, channels});
    if (argmax) argmax->assign(y.size(), 0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < out_len; ++t) {
        const auto start = static_cast<std::ptrdiff_t>(t * opts_.stride) - static_cast<std::ptrdiff_t>(pad_before);
        const std::size_t lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(start, 0));
        const std::size_t hi = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(start + static_cast<std::ptrdiff_t>(opts_.pool), static_cast<std::ptrdiff_t>(length)));
        for (std::size_t c = 0; c < channels; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = (b * length + lo) * channels + c;
          for (std::size_t s = lo; s < hi; ++s) {
            const std::size_t idx = (b * length + s) * channels + c;
            if (x[idx] > best) {
              best = x[idx];
              best_idx = idx;
            }
          }
          const std::size_t o = (b * out_len + t) * channels + c;
          y[o] = x[best_idx];
          if (argmax) (*argmax)[o] = best_idx;
        }
      }
    }
    return y;
  }

  MaxPoolOptions opts_;
  bool cached_ = false;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

}  // namespace pelican::nn
