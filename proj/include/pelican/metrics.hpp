#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pelican/error.hpp"

namespace pelican {

/// Binary confusion counts after collapsing every non-normal class to "attack".
struct ConfusionCounts {
  std::uint64_t tp = 0;  // attack predicted as any attack class
  std::uint64_t tn = 0;  // normal predicted as normal
  std::uint64_t fp = 0;  // normal predicted as an attack
  std::uint64_t fn = 0;  // attack predicted as normal

  std::uint64_t total() const { return tp + tn + fp + fn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                 std::size_t normal_class) {
  if (predicted.size() != truth.size()) {
    throw ShapeError("confusion: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool actual_attack = truth[i] != normal_class;
    const bool flagged = predicted[i] != normal_class;
    if (actual_attack) {
      flagged ? ++c.tp : ++c.fn;
    } else {
      flagged ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

/// ACC, DR and FAR of a confusion table. A metric whose denominator is zero
/// is absent rather than 0.
struct MetricsReport {
  std::optional<double> acc;
  std::optional<double> dr;
  std::optional<double> far;
  ConfusionCounts counts;
  std::vector<std::uint64_t> predicted_histogram;  // per predicted class
};

inline MetricsReport compute_metrics(const ConfusionCounts& c, std::vector<std::uint64_t> histogram = {}) {
  if (c.total() == 0) throw DataError("compute_metrics: all confusion counts are zero");
  MetricsReport m;
  m.counts = c;
  m.predicted_histogram = std::move(histogram);
  m.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fn > 0) m.dr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.fp + c.tn > 0) m.far = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
  return m;
}

inline std::vector<std::uint64_t> prediction_histogram(std::span<const std::size_t> predicted, std::size_t classes) {
  std::vector<std::uint64_t> h(classes, 0);
  for (auto p : predicted) {
    if (p >= classes) throw ShapeError("prediction_histogram: class index out of range");
    ++h[p];
  }
  return h;
}

/// Confusion + metrics + histogram in one call.
inline MetricsReport evaluate_predictions(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                          std::size_t normal_class, std::size_t classes) {
  return compute_metrics(confusion(predicted, truth, normal_class), prediction_histogram(predicted, classes));
}

/// Unweighted mean of each metric over folds where it is defined.
struct FoldAveragedMetrics {
  std::optional<double> acc, dr, far;
};

inline FoldAveragedMetrics fold_average(std::span<const MetricsReport> folds) {
  auto avg = [&](auto member) -> std::optional<double> {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& f : folds) {
      if (const auto& v = f.*member) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  return {avg(&MetricsReport::acc), avg(&MetricsReport::dr), avg(&MetricsReport::far)};
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"acc", optional_json(m.acc)},
          {"dr", optional_json(m.dr)},
          {"far", optional_json(m.far)},
          {"tp", m.counts.tp},
          {"tn", m.counts.tn},
          {"fp", m.counts.fp},
          {"fn", m.counts.fn},
          {"predicted_histogram", m.predicted_histogram}};
}

}  // namespace pelican
