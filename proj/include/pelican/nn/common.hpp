#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pelican/rng.hpp"
#include "pelican/tensor.hpp"

namespace pelican::nn {

/// Training caches intermediates and updates buffers; Inference is pure.
enum class Mode { Training, Inference };

/// Glorot/Xavier uniform fill: U(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

inline void require_cache(bool live, const std::string& layer) {
  if (!live) throw Error(layer + ": backward called without a preceding training-mode forward");
}

/// Splits a (..., C) tensor into rows of C channels.
inline std::size_t rows_of(const Tensor& x) { return x.size() / x.shape().back(); }

}  // namespace pelican::nn
