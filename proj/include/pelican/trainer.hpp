#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pelican/data/folds.hpp"
#include "pelican/data/schema.hpp"
#include "pelican/model.hpp"

namespace pelican {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 50;
  std::size_t batch_size = 4000;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-7;
  std::uint64_t seed = 0;
  std::optional<double> gradient_clip;  // max global L2 norm of all gradients
  bool grad_probe = false;
};

/// Table I defaults: 50 epochs for NSL-KDD, 100 for UNSW-NB15.
inline TrainConfig default_train_config(data::DatasetId id) {
  TrainConfig c;
  c.epochs = id == data::DatasetId::NslKdd ? 50 : 100;
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"rms_decay", c.rms_decay},
          {"rms_epsilon", c.rms_epsilon},
          {"seed", c.seed},
          {"gradient_clip", c.gradient_clip ? nlohmann::json(*c.gradient_clip) : nlohmann::json(nullptr)},
          {"grad_probe", c.grad_probe}};
}

/// RMSprop update of one parameter:
///   acc   <- decay * acc + (1 - decay) * g^2
///   value <- value - lr * g / (sqrt(acc) + eps)
/// then the gradient is zeroed. A non-finite gradient aborts before any write.
inline void rmsprop_step(Parameter& p, const TrainConfig& cfg) {
  for (double g : p.grad.data()) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p.name);
  }
  const double decay = cfg.rms_decay, lr = cfg.learning_rate, eps = cfg.rms_epsilon;
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.grad[i];
    p.rms_acc[i] = decay * p.rms_acc[i] + (1.0 - decay) * g * g;
    p.value[i] -= lr * g / (std::sqrt(p.rms_acc[i]) + eps);
  }
  p.zero_grad();
}

/// Applies rmsprop_step to every parameter and counts the updates.
class RmsProp {
 public:
  explicit RmsProp(TrainConfig cfg) : cfg_(std::move(cfg)) {}

  void step(std::span<Parameter* const> params) {
    // Validate everything first so a NaN never leaves a half-updated network.
    for (const auto* p : params)
      for (double g : p->grad.data())
        if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p->name);
    for (auto* p : params) {
      rmsprop_step(*p, cfg_);
      ++updates_;
    }
  }

  std::size_t updates() const { return updates_; }

 private:
  TrainConfig cfg_;
  std::size_t updates_ = 0;
};

struct LayerGradNorm {
  std::string layer;
  double l2 = 0.0;
};

/// L2 norm of each parameter layer's gradient, input to output. Reads the
/// gradients left by the most recent backward pass.
inline std::vector<LayerGradNorm> gradient_norm_probe(Network& net) {
  std::vector<LayerGradNorm> out;
  for (auto& [name, params] : net.parameter_layers()) {
    double sq = 0.0;
    for (const auto* p : params)
      for (double g : p->grad.data()) sq += g * g;
    out.push_back({name, std::sqrt(sq)});
  }
  return out;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  std::uint64_t parameter_hash = 0;
};

struct GradNormRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::string layer;
  double grad_l2 = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<GradNormRecord> grad_norms;
  std::size_t parameter_updates = 0;
  std::size_t batches = 0;
};

/// Inference-mode pass over a set of rows.
struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;  // categorical
  std::vector<std::size_t> predicted;
  std::vector<std::size_t> truth;
  std::vector<std::size_t> rows;
};

inline EvalResult evaluate(const Network& net, const data::EncodedDataset& data, std::span<const std::size_t> rows,
                           std::size_t batch_size = 4000) {
  if (rows.empty()) throw DataError("evaluate: empty row set");
  EvalResult r;
  r.rows.assign(rows.begin(), rows.end());
  const Shape sample = net.config().input_shape();
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); i += batch_size) {
    const auto chunk = rows.subspan(i, std::min(batch_size, rows.size() - i));
    const auto batch = data::gather_batch(data, chunk, sample);
    const Tensor logits = net.infer_logits(batch.features);
    const std::size_t classes = logits.dim(1);
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      const double* z = logits.raw() + j * classes;
      const double m = *std::max_element(z, z + classes);
      double s = 0.0;
      for (std::size_t c = 0; c < classes; ++c) s += std::exp(z[c] - m);
      loss_sum += -(z[batch.labels[j]] - m - std::log(s));
    }
    const auto pred = argmax_rows(logits);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      correct += pred[j] == batch.labels[j];
      r.predicted.push_back(pred[j]);
      r.truth.push_back(batch.labels[j]);
    }
  }
  r.loss = loss_sum / static_cast<double>(rows.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  if (!std::isfinite(r.loss)) throw NumericError("evaluation loss is not finite");
  return r;
}

struct TrainResult {
  TrainHistory history;
  EvalResult final_test;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

namespace detail {

inline void clip_gradients(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params)
    for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (auto* p : params)
    for (auto& g : p->grad.data()) g *= scale;
}

}  // namespace detail

/// Trains on `train_rows` for cfg.epochs epochs and evaluates `test_rows` in
/// inference mode after each one. Single-threaded and deterministic in
/// (network seed, cfg.seed).
inline TrainResult train(Network& net, const data::EncodedDataset& data, std::span<const std::size_t> train_rows,
                         std::span<const std::size_t> test_rows, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  if (train_rows.empty()) throw DataError("train: empty training fold");
  if (test_rows.empty()) throw DataError("train: empty test fold");
  if (data.width() != net.config().features) {
    throw ConfigError("train: dataset has " + std::to_string(data.width()) + " features, network expects " +
                      std::to_string(net.config().features));
  }
  if (data.classes() != net.config().classes) {
    throw ConfigError("train: dataset has " + std::to_string(data.classes()) + " classes, network expects " +
                      std::to_string(net.config().classes));
  }
  if (cfg.batch_size == 0) throw ConfigError("train: batch size must be positive");

  TrainResult result;
  auto& hist = result.history;
  RmsProp opt(cfg);
  Rng shuffle(derive_seed(cfg.seed, 7));
  net.reseed_dropout(derive_seed(cfg.seed, 11));
  const Shape sample = net.config().input_shape();
  const auto params = net.parameters();
  net.zero_grad();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = data::make_batches(train_rows, cfg.batch_size, shuffle);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const auto batch = data::gather_batch(data, batches[step], sample);
      const Tensor logits = net.forward_logits(batch.features, Mode::Training);
      const auto ce = softmax_cross_entropy(logits, batch.onehot);
      if (!std::isfinite(ce.loss)) {
        throw NumericError("training loss is not finite at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      }
      const auto pred = argmax_rows(logits);
      for (std::size_t j = 0; j < pred.size(); ++j) correct += pred[j] == batch.labels[j];
      loss_sum += ce.loss * static_cast<double>(batch.labels.size());

      net.backward(ce.grad);
      if (cfg.grad_probe) {
        for (auto& n : gradient_norm_probe(net)) hist.grad_norms.push_back({epoch, step, n.layer, n.l2});
      }
      if (cfg.gradient_clip) detail::clip_gradients(params, *cfg.gradient_clip);
      opt.step(params);
      ++hist.batches;
    }
    result.final_test = evaluate(net, data, test_rows, cfg.batch_size);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_rows.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_rows.size());
    rec.test_loss = result.final_test.loss;
    rec.test_acc = result.final_test.accuracy;
    rec.parameter_hash = net.parameter_hash();
    hist.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (cfg.epochs == 0) result.final_test = evaluate(net, data, test_rows, cfg.batch_size);
  hist.parameter_updates = opt.updates();
  return result;
}

// ---------------------------------------------------------------------------
// CSV export. Doubles use 17 significant digits so files round-trip exactly.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_history_csv(std::ostream& os, const TrainHistory& h) {
  os << "epoch,train_loss,train_acc,test_loss,test_acc\n";
  for (const auto& e : h.epochs) {
    os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_acc) << ','
       << format_double(e.test_loss) << ',' << format_double(e.test_acc) << '\n';
  }
}

inline void write_grad_norm_csv(std::ostream& os, const TrainHistory& h) {
  os << "epoch,step,layer,grad_l2\n";
  for (const auto& g : h.grad_norms)
    os << g.epoch << ',' << g.step << ',' << g.layer << ',' << format_double(g.grad_l2) << '\n';
}

}  // namespace pelican
