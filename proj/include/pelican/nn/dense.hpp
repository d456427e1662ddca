#pragma once

#include <string>
#include <vector>

#include "pelican/kernels.hpp"
#include "pelican/nn/common.hpp"

namespace pelican::nn {

/// Affine map (B,C) -> (B,K): y = x W + b.
class Dense {
 public:
  Dense(std::string name, std::size_t in_features, std::size_t units, Rng& rng)
      : name_(std::move(name)),
        weight_(name_ + ".kernel", glorot_uniform({in_features, units}, in_features, units, rng)),
        bias_(name_ + ".bias", Tensor({units}, 0.0)) {}

  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Inference) return infer(x);
    input_ = x;
    cached_ = true;
    return infer(x);
  }

  Tensor infer(const Tensor& x) const {
    require_rank(x, 2, "dense");
    if (x.dim(1) != weight_.value.dim(0)) {
      throw ShapeError(name_ + ": input " + to_string(x.shape()) + " does not match kernel " +
                       to_string(weight_.value.shape()));
    }
    const std::size_t rows = x.dim(0), units = weight_.value.dim(1);
    Tensor y({rows, units});
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(bias_.value.data().begin(), bias_.value.data().end(), y.raw() + r * units);
    detail::gemm_nn(rows, x.dim(1), units, x.raw(), weight_.value.raw(), y.raw());
    return y;
  }

  Tensor backward(const Tensor& grad) {
    require_cache(cached_, name_);
    const std::size_t rows = input_.dim(0), in = input_.dim(1), units = weight_.value.dim(1);
    if (grad.rank() != 2 || grad.dim(0) != rows || grad.dim(1) != units) {
      throw ShapeError(name_ + ": gradient shape " + to_string(grad.shape()) + " does not match output");
    }
    detail::gemm_tn(rows, in, units, input_.raw(), grad.raw(), weight_.grad.raw());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t u = 0; u < units; ++u) bias_.grad[u] += grad.at(r, u);
    Tensor dx({rows, in});
    detail::gemm_nt(rows, units, in, grad.raw(), weight_.value.raw(), dx.raw());
    cached_ = false;
    input_ = Tensor();
    return dx;
  }

  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }
  std::vector<const Parameter*> parameters() const { return {&weight_, &bias_}; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  std::string name_;
  Parameter weight_;
  Parameter bias_;
  bool cached_ = false;
  Tensor input_;
};

}  // namespace pelican::nn
