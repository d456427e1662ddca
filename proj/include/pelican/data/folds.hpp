#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pelican/data/encoder.hpp"
#include "pelican/rng.hpp"

namespace pelican::data {

struct FoldPlan {
  std::size_t k = 10;
  bool stratified = true;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // each sorted ascending

  std::vector<std::size_t> test_indices(std::size_t fold) const { return folds.at(fold); }

  /// Union of every other fold, sorted.
  std::vector<std::size_t> train_indices(std::size_t fold) const {
    if (fold >= folds.size()) throw ConfigError("fold " + std::to_string(fold) + " out of range (k=" + std::to_string(k) + ")");
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < folds.size(); ++f)
      if (f != fold) out.insert(out.end(), folds[f].begin(), folds[f].end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Splits 0..N-1 into k folds. Stratified plans shuffle each class and deal it
/// round-robin, continuing where the previous class stopped, so per-class fold
/// sizes differ by at most one and classes smaller than k land in distinct folds.
inline FoldPlan make_folds(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed,
                           bool stratified = true) {
  if (k < 2) throw ConfigError("make_folds: k must be >= 2, got " + std::to_string(k));
  if (k > labels.size()) {
    throw ConfigError("make_folds: k=" + std::to_string(k) + " exceeds the " + std::to_string(labels.size()) +
                      " available records");
  }
  FoldPlan plan;
  plan.k = k;
  plan.stratified = stratified;
  plan.seed = seed;
  plan.folds.assign(k, {});
  Rng rng(seed);

  std::vector<std::vector<std::size_t>> groups;
  if (stratified) {
    const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
    groups.assign(classes, {});
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  } else {
    groups.emplace_back(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) groups[0][i] = i;
  }
  std::size_t next = 0;
  for (auto& g : groups) {
    rng.shuffle(std::span<std::size_t>(g));
    for (auto idx : g) {
      plan.folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

/// Stratified sample of n indices (largest-remainder class quotas), sorted.
inline std::vector<std::size_t> stratified_subsample(std::span<const std::size_t> labels, std::size_t n,
                                                     std::uint64_t seed) {
  std::vector<std::size_t> out;
  if (n >= labels.size()) {
    out.resize(labels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }
  const std::size_t classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> groups(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);

  const double total = static_cast<double>(labels.size());
  std::vector<std::size_t> quota(classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double exact = static_cast<double>(n) * static_cast<double>(groups[c].size()) / total;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n && i < remainders.size(); ++i) {
    const auto c = remainders[i].second;
    if (quota[c] < groups[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }
  Rng rng(seed);
  for (std::size_t c = 0; c < classes; ++c) {
    rng.shuffle(std::span<std::size_t>(groups[c]));
    out.insert(out.end(), groups[c].begin(), groups[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Shuffled batches over `indices`; the final batch may be short.
inline std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> indices,
                                                          std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

inline std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> indices,
                                                          std::size_t batch_size, std::uint64_t seed) {
  Rng rng(seed);
  return make_batches(indices, batch_size, rng);
}

struct Batch {
  Tensor features;  // (B, T, C)
  Tensor onehot;    // (B, classes)
  std::vector<std::size_t> labels;
};

/// Gathers rows into a batch whose samples have shape `sample_shape` (T, C).
inline Batch gather_batch(const EncodedDataset& data, std::span<const std::size_t> rows, const Shape& sample_shape) {
  const std::size_t width = data.width(), classes = data.classes();
  if (shape_size(sample_shape) != width) {
    throw ShapeError("batch sample shape " + pelican::to_string(sample_shape) + " does not hold " + std::to_string(width) +
                     " features");
  }
  Shape shape{rows.size()};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Batch b{Tensor(shape), Tensor({rows.size(), classes}), std::vector<std::size_t>(rows.size())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(data.features.raw() + rows[i] * width, width, b.features.raw() + i * width);
    std::copy_n(data.onehot.raw() + rows[i] * classes, classes, b.onehot.raw() + i * classes);
    b.labels[i] = data.labels[rows[i]];
  }
  return b;
}

inline nlohmann::json to_json(const FoldPlan& p) {
  return {{"k", p.k}, {"stratified", p.stratified}, {"seed", p.seed}, {"folds", p.folds}};
}

inline FoldPlan fold_plan_from_json(const nlohmann::json& j) {
  FoldPlan p;
  p.k = j.at("k").get<std::size_t>();
  p.stratified = j.at("stratified").get<bool>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.folds = j.at("folds").get<std::vector<std::vector<std::size_t>>>();
  if (p.folds.size() != p.k) throw DataError("fold plan lists " + std::to_string(p.folds.size()) + " folds, k=" + std::to_string(p.k));
  return p;
}

}  // namespace pelican::data
