#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pelican/kernels.hpp"
#include "pelican/nn/common.hpp"

namespace pelican::nn {

/// Gated recurrent unit over (B,T,Cin) returning the full hidden sequence
/// (B,T,H). Gates use hard_sigmoid, the candidate uses tanh, and the reset
/// gate is applied before the recurrent matmul:
///
///   z  = hsig(x Wz + h Uz + bz)
///   r  = hsig(x Wr + h Ur + br)
///   h~ = tanh(x Wh + (r * h) Uh + bh)
///   h' = (1 - z) * h + z * h~
///
/// The initial state is zero. Backward is full BPTT over all T steps.
class Gru {
 public:
  enum Gate : std::size_t { kUpdate = 0, kReset = 1, kCandidate = 2 };

  Gru(std::string name, std::size_t in_features, std::size_t units, Rng& rng) : name_(std::move(name)) {
    static constexpr const char* tags[3] = {"z", "r", "h"};
    for (std::size_t g = 0; g < 3; ++g)
      w_[g] = Parameter(name_ + ".W" + tags[g], glorot_uniform({in_features, units}, in_features, units, rng));
    for (std::size_t g = 0; g < 3; ++g)
      u_[g] = Parameter(name_ + ".U" + tags[g], glorot_uniform({units, units}, units, units, rng));
    for (std::size_t g = 0; g < 3; ++g) b_[g] = Parameter(name_ + ".b" + tags[g], Tensor({units}, 0.0));
  }

  std::size_t in_features() const { return w_[0].value.dim(0); }
  std::size_t units() const { return w_[0].value.dim(1); }

  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Inference) return infer(x);
    Cache cache;
    Tensor y = run(x, &cache);
    cache_ = std::move(cache);
    cached_ = true;
    return y;
  }

  Tensor infer(const Tensor& x) const { return run(x, nullptr); }

  Tensor backward(const Tensor& grad) {
    require_cache(cached_, name_);
    const std::size_t batch = cache_.batch, length = cache_.length, h = units(), cin = in_features();
    if (grad.shape() != Shape{batch, length, h}) {
      throw ShapeError(name_ + ": gradient shape " + to_string(grad.shape()) + " does not match output");
    }
    const std::size_t step = batch * h;
    std::vector<double> d_pre[3];
    for (auto& d : d_pre) d.assign(length * step, 0.0);
    std::vector<double> u_t[3];
    for (std::size_t g = 0; g < 3; ++g) u_t[g] = detail::transpose(h, h, u_[g].value.raw());

    std::vector<double> dh_next(step, 0.0), dh(step), dhp(step), rh(step), drh(step);
    for (std::size_t ti = length; ti-- > 0;) {
      const std::size_t off = ti * step;
      const double* z = cache_.z.data() + off;
      const double* r = cache_.r.data() + off;
      const double* hh = cache_.cand.data() + off;
      const double* hp = cache_.h_prev.data() + off;
      const double* az = cache_.pre_z.data() + off;
      const double* ar = cache_.pre_r.data() + off;
      double* daz = d_pre[kUpdate].data() + off;
      double* dar = d_pre[kReset].data() + off;
      double* dah = d_pre[kCandidate].data() + off;

      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < h; ++j) dh[b * h + j] = grad.at(b, ti, j) + dh_next[b * h + j];

      for (std::size_t i = 0; i < step; ++i) {
        dhp[i] = dh[i] * (1.0 - z[i]);
        const double dz = dh[i] * (hh[i] - hp[i]);
        dah[i] = dh[i] * z[i] * (1.0 - hh[i] * hh[i]);
        daz[i] = dz * hard_sigmoid_derivative(az[i]);
      }
      if (ti > 0) {
        for (std::size_t i = 0; i < step; ++i) rh[i] = r[i] * hp[i];
        detail::gemm_tn(batch, h, h, rh.data(), dah, u_[kCandidate].grad.raw());
        std::fill(drh.begin(), drh.end(), 0.0);
        detail::gemm_nn(batch, h, h, dah, u_t[kCandidate].data(), drh.data());
        for (std::size_t i = 0; i < step; ++i) {
          dar[i] = drh[i] * hp[i] * hard_sigmoid_derivative(ar[i]);
          dhp[i] += drh[i] * r[i];
        }
        detail::gemm_tn(batch, h, h, hp, daz, u_[kUpdate].grad.raw());
        detail::gemm_tn(batch, h, h, hp, dar, u_[kReset].grad.raw());
        detail::gemm_nn(batch, h, h, daz, u_t[kUpdate].data(), dhp.data());
        detail::gemm_nn(batch, h, h, dar, u_t[kReset].data(), dhp.data());
      } else {
        // h0 is the zero state: no recurrent contributions and no gradient beyond it.
        std::fill(dar, dar + step, 0.0);
      }
      dh_next.swap(dhp);
    }

    const std::size_t rows = length * batch;
    Tensor dx_tm({rows, cin});
    for (std::size_t g = 0; g < 3; ++g) {
      detail::gemm_tn(rows, cin, h, cache_.x_tm.data(), d_pre[g].data(), w_[g].grad.raw());
      for (std::size_t row = 0; row < rows; ++row)
        for (std::size_t j = 0; j < h; ++j) b_[g].grad[j] += d_pre[g][row * h + j];
      detail::gemm_nt(rows, h, cin, d_pre[g].data(), w_[g].value.raw(), dx_tm.raw());
    }
    Tensor dx({batch, length, cin});
    for (std::size_t ti = 0; ti < length; ++ti)
      for (std::size_t b = 0; b < batch; ++b)
        std::copy_n(dx_tm.raw() + (ti * batch + b) * cin, cin, dx.raw() + (b * length + ti) * cin);

    cached_ = false;
    cache_ = Cache{};
    return dx;
  }

  std::vector<Parameter*> parameters() {
    return {&w_[0], &w_[1], &w_[2], &u_[0], &u_[1], &u_[2], &b_[0], &b_[1], &b_[2]};
  }
  std::vector<const Parameter*> parameters() const {
    return {&w_[0], &w_[1], &w_[2], &u_[0], &u_[1], &u_[2], &b_[0], &b_[1], &b_[2]};
  }

  Parameter& kernel(Gate g) { return w_[g]; }
  Parameter& recurrent(Gate g) { return u_[g]; }
  Parameter& bias(Gate g) { return b_[g]; }

 private:
  // Time-major intermediates, row index t * B + b.
  struct Cache {
    std::size_t batch = 0, length = 0;
    std::vector<double> x_tm, pre_z, pre_r, z, r, cand, h_prev;
  };

  Tensor run(const Tensor& x, Cache* cache) const {
    require_rank(x, 3, name_.c_str());
    const std::size_t batch = x.dim(0), length = x.dim(1), cin = x.dim(2), h = units();
    if (cin != in_features()) {
      throw ShapeError(name_ + ": input has " + std::to_string(cin) + " features, kernels expect " +
                       std::to_string(in_features()));
    }
    const std::size_t rows = length * batch, step = batch * h;
    std::vector<double> x_tm(rows * cin);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t ti = 0; ti < length; ++ti)
        std::copy_n(x.raw() + (b * length + ti) * cin, cin, x_tm.data() + (ti * batch + b) * cin);

    // Input projections for all steps at once, biases folded in.
    std::vector<double> proj[3];
    for (std::size_t g = 0; g < 3; ++g) {
      proj[g].resize(rows * h);
      for (std::size_t row = 0; row < rows; ++row)
        std::copy_n(b_[g].value.raw(), h, proj[g].data() + row * h);
      detail::gemm_nn(rows, cin, h, x_tm.data(), w_[g].value.raw(), proj[g].data());
    }

    if (cache) {
      cache->batch = batch;
      cache->length = length;
      cache->pre_z.resize(rows * h);
      cache->pre_r.resize(rows * h);
      cache->z.resize(rows * h);
      cache->r.resize(rows * h);
      cache->cand.resize(rows * h);
      cache->h_prev.resize(rows * h);
    }

    Tensor y({batch, length, h});
    std::vector<double> state(step, 0.0), rh(step);
    std::vector<double> az(step), ar(step), z(step), r(step), ah(step);
    for (std::size_t ti = 0; ti < length; ++ti) {
      const std::size_t off = ti * step;
      std::copy_n(proj[kUpdate].data() + off, step, az.data());
      std::copy_n(proj[kReset].data() + off, step, ar.data());
      std::copy_n(proj[kCandidate].data() + off, step, ah.data());
      if (ti > 0) {
        detail::gemm_nn(batch, h, h, state.data(), u_[kUpdate].value.raw(), az.data());
        detail::gemm_nn(batch, h, h, state.data(), u_[kReset].value.raw(), ar.data());
      }
      for (std::size_t i = 0; i < step; ++i) {
        z[i] = hard_sigmoid(az[i]);
        r[i] = hard_sigmoid(ar[i]);
        rh[i] = r[i] * state[i];
      }
      if (ti > 0) detail::gemm_nn(batch, h, h, rh.data(), u_[kCandidate].value.raw(), ah.data());
      if (cache) {
        std::copy(az.begin(), az.end(), cache->pre_z.begin() + static_cast<std::ptrdiff_t>(off));
        std::copy(ar.begin(), ar.end(), cache->pre_r.begin() + static_cast<std::ptrdiff_t>(off));
        std::copy(z.begin(), z.end(), cache->z.begin() + static_cast<std::ptrdiff_t>(off));
        std::copy(r.begin(), r.end(), cache->r.begin() + static_cast<std::ptrdiff_t>(off));
        std::copy(state.begin(), state.end(), cache->h_prev.begin() + static_cast<std::ptrdiff_t>(off));
      }
      for (std::size_t i = 0; i < step; ++i) {
        const double cand = std::tanh(ah[i]);
        if (cache) cache->cand[off + i] = cand;
        state[i] = (1.0 - z[i]) * state[i] + z[i] * cand;
      }
      for (std::size_t b = 0; b < batch; ++b)
        std::copy_n(state.data() + b * h, h, y.raw() + (b * length + ti) * h);
    }
    if (cache) cache->x_tm = std::move(x_tm);
    return y;
  }

  std::string name_;
  Parameter w_[3];
  Parameter u_[3];
  Parameter b_[3];
  bool cached_ = false;
  Cache cache_;
};

}  // namespace pelican::nn
