#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pelican/kernels.hpp"
#include "pelican/nn/batch_norm.hpp"
#include "pelican/nn/conv1d.hpp"
#include "pelican/nn/dense.hpp"
#include "pelican/nn/dropout.hpp"
#include "pelican/nn/gru.hpp"
#include "pelican/nn/max_pool.hpp"
#include "pelican/nn/shape_ops.hpp"

namespace pelican {

using nn::Mode;

enum class BlockKind { Plain, Residual };

/// Where the residual shortcut taps the main path.
enum class ShortcutSource { FirstBatchNorm, SecondBatchNorm };

/// How the F encoded features are presented to the first block.
enum class InputLayout {
  Flat,      // (T, C) = (1, F)
  Sequence,  // (T, C) = (F, 1); plain networks only
};

inline std::string to_string(BlockKind k) { return k == BlockKind::Plain ? "plain" : "residual"; }
inline std::string to_string(ShortcutSource s) {
  return s == ShortcutSource::FirstBatchNorm ? "first_bn" : "second_bn";
}
inline std::string to_string(InputLayout l) { return l == InputLayout::Flat ? "flat" : "sequence"; }

struct BlockSpec {
  BlockKind kind = BlockKind::Residual;
  std::size_t length = 1;       // T entering the block
  std::size_t in_channels = 0;  // C entering the block
  std::size_t filters = 0;
  std::size_t kernel = 10;
  std::size_t recurrent_units = 0;
  double dropout_rate = 0.6;
  nn::MaxPoolOptions pool{};
  nn::BatchNormOptions batch_norm{};
  bool add_before_dropout = true;
  ShortcutSource shortcut = ShortcutSource::FirstBatchNorm;
};

/// One CNN+GRU block:
///   BN1 -> Conv1D -> ReLU -> MaxPool -> BN2 -> Reshape -> GRU -> [+ shortcut] -> Dropout
/// The shortcut (residual blocks only) is the BN1 output by default.
class Block {
 public:
  Block(std::string name, const BlockSpec& spec, Rng& init_rng, std::uint64_t dropout_seed)
      : name_(std::move(name)),
        spec_(validated(spec, name_)),
        bn1_(name_ + ".bn1", spec_.in_channels, spec_.batch_norm),
        conv_(name_ + ".conv", spec_.in_channels, spec_.filters, spec_.kernel, init_rng),
        pool_(spec_.pool),
        bn2_(name_ + ".bn2", spec_.filters, spec_.batch_norm),
        reshape_(Shape{pool_.output_length(spec_.length), spec_.filters}),
        gru_(name_ + ".gru", spec_.filters, spec_.recurrent_units, init_rng),
        dropout_(spec_.dropout_rate, dropout_seed) {}

  const BlockSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }
  std::size_t output_length() const { return pool_.output_length(spec_.length); }

  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Inference) return infer(x);
    Tensor a = bn1_.forward(x, mode);
    Tensor n = bn2_.forward(pool_.forward(relu_.forward(conv_.forward(a, mode), mode), mode), mode);
    Tensor g = gru_.forward(reshape_.forward(n, mode), mode);
    return finish(std::move(g), a, n, [&](const Tensor& t) { return dropout_.forward(t, mode); });
  }

  Tensor infer(const Tensor& x) const {
    Tensor a = bn1_.infer(x);
    Tensor n = bn2_.infer(pool_.infer(relu_.infer(conv_.infer(a))));
    Tensor g = gru_.infer(reshape_.infer(n));
    return finish(std::move(g), a, n, [&](const Tensor& t) { return dropout_.infer(t); });
  }

  Tensor backward(const Tensor& grad) {
    const bool residual = spec_.kind == BlockKind::Residual;
    Tensor d_shortcut, d_gru;
    if (residual && !spec_.add_before_dropout) {
      d_shortcut = grad;
      d_gru = dropout_.backward(grad);
    } else {
      d_gru = dropout_.backward(grad);
      if (residual) d_shortcut = d_gru;
    }
    Tensor dn = reshape_.backward(gru_.backward(d_gru));
    if (residual && spec_.shortcut == ShortcutSource::SecondBatchNorm) add_into(dn, d_shortcut);
    Tensor da = conv_.backward(relu_.backward(pool_.backward(bn2_.backward(dn))));
    if (residual && spec_.shortcut == ShortcutSource::FirstBatchNorm) add_into(da, d_shortcut);
    return bn1_.backward(da);
  }

  /// The four parameter layers of the block, input to output.
  std::vector<std::pair<std::string, std::vector<Parameter*>>> parameter_layers() {
    return {{name_ + ".bn1", bn1_.parameters()},
            {name_ + ".conv", conv_.parameters()},
            {name_ + ".bn2", bn2_.parameters()},
            {name_ + ".gru", gru_.parameters()}};
  }

  std::vector<std::pair<std::string, Tensor*>> buffers() {
    return {{name_ + ".bn1.running_mean", &bn1_.running_mean()},
            {name_ + ".bn1.running_var", &bn1_.running_var()},
            {name_ + ".bn2.running_mean", &bn2_.running_mean()},
            {name_ + ".bn2.running_var", &bn2_.running_var()}};
  }

  void reseed_dropout(std::uint64_t seed) { dropout_.reseed(seed); }

  nn::BatchNorm& bn1() { return bn1_; }
  nn::Conv1d& conv() { return conv_; }
  nn::BatchNorm& bn2() { return bn2_; }
  nn::Gru& gru() { return gru_; }
  nn::Dropout& dropout() { return dropout_; }

 private:
  static BlockSpec validated(const BlockSpec& spec, const std::string& name) {
    if (spec.filters != spec.recurrent_units) {
      throw ConfigError(name + ": filters (" + std::to_string(spec.filters) + ") must equal recurrent units (" +
                        std::to_string(spec.recurrent_units) + ")");
    }
    if (spec.filters == 0 || spec.in_channels == 0 || spec.length == 0) {
      throw ConfigError(name + ": filters, input channels and length must be positive");
    }
    if (spec.kernel == 0) throw ConfigError(name + ": kernel size must be >= 1");
    if (spec.kind == BlockKind::Residual) {
      const nn::MaxPool1d probe(spec.pool);
      const Shape shortcut = spec.shortcut == ShortcutSource::FirstBatchNorm
                                 ? Shape{spec.length, spec.in_channels}
                                 : Shape{probe.output_length(spec.length), spec.filters};
      const Shape gru_out{probe.output_length(spec.length), spec.recurrent_units};
      if (gru_out != shortcut) {
        throw ShapeError(name + ": residual shortcut " + to_string(shortcut) + " cannot be added to GRU output " +
                         to_string(gru_out) + "; filters and recurrent units must equal the input width");
      }
    }
    return spec;
  }

  template <typename DropFn>
  Tensor finish(Tensor g, const Tensor& a, const Tensor& n, DropFn&& drop) const {
    if (spec_.kind == BlockKind::Plain) return drop(g);
    const Tensor& shortcut = spec_.shortcut == ShortcutSource::FirstBatchNorm ? a : n;
    if (spec_.add_before_dropout) return drop(nn::residual_add(g, shortcut));
    return nn::residual_add(drop(g), shortcut);
  }

  static void add_into(Tensor& dst, const Tensor& src) {
    require_same_shape(dst, src, "shortcut gradient");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  std::string name_;
  BlockSpec spec_;
  nn::BatchNorm bn1_;
  nn::Conv1d conv_;
  nn::Relu relu_;
  nn::MaxPool1d pool_;
  nn::BatchNorm bn2_;
  nn::Reshape reshape_;
  nn::Gru gru_;
  nn::Dropout dropout_;
};

struct NetworkConfig {
  std::size_t blocks = 10;
  BlockKind kind = BlockKind::Residual;
  std::size_t features = 0;  // encoded width F; also filters and recurrent units
  InputLayout layout = InputLayout::Flat;
  std::size_t classes = 2;
  std::uint64_t seed = 0;
  std::size_t kernel = 10;
  double dropout_rate = 0.6;
  nn::MaxPoolOptions pool{};
  nn::BatchNormOptions batch_norm{};
  bool add_before_dropout = true;
  ShortcutSource shortcut = ShortcutSource::FirstBatchNorm;

  /// Per-sample input shape (T, C).
  Shape input_shape() const {
    return layout == InputLayout::Flat ? Shape{1, features} : Shape{features, 1};
  }

  /// Plain-21, Residual-41 and so on.
  std::string display_name() const {
    return std::string(kind == BlockKind::Plain ? "Plain-" : "Residual-") + std::to_string(4 * blocks + 1);
  }
};

/// Stack of blocks followed by global average pooling and a dense softmax head.
class Network {
 public:
  explicit Network(NetworkConfig cfg) : cfg_(std::move(cfg)), dense_(make_head()) {}

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const NetworkConfig& config() const { return cfg_; }
  std::size_t block_count() const { return blocks_.size(); }
  Block& block(std::size_t i) { return *blocks_.at(i); }
  nn::Dense& head() { return dense_; }

  /// Logits for a (B,T,C) batch.
  Tensor forward_logits(const Tensor& x, Mode mode) {
    if (mode == Mode::Inference) return infer_logits(x);
    check_input(x);
    Tensor h = x;
    for (auto& b : blocks_) h = b->forward(h, mode);
    Tensor out = dense_.forward(gap_.forward(h, mode), mode);
    trained_forward_ = true;
    return out;
  }

  /// Class probabilities (rows sum to 1).
  Tensor forward(const Tensor& x, Mode mode) { return softmax(forward_logits(x, mode)); }

  Tensor infer_logits(const Tensor& x) const {
    check_input(x);
    Tensor h = x;
    for (const auto& b : blocks_) h = b->infer(h);
    return dense_.infer(gap_.infer(h));
  }

  Tensor predict_proba(const Tensor& x) const { return softmax(infer_logits(x)); }

  /// Backpropagates d(loss)/d(logits), accumulating into every Parameter.grad.
  /// Returns the gradient with respect to the input batch.
  Tensor backward(const Tensor& grad_logits) {
    if (!trained_forward_) throw Error("network backward called without a preceding training-mode forward");
    trained_forward_ = false;
    Tensor g = gap_.backward(dense_.backward(grad_logits));
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  /// Parameter layers input to output: 4 per block plus the dense head.
  std::vector<std::pair<std::string, std::vector<Parameter*>>> parameter_layers() {
    std::vector<std::pair<std::string, std::vector<Parameter*>>> out;
    for (auto& b : blocks_) {
      auto layers = b->parameter_layers();
      out.insert(out.end(), std::make_move_iterator(layers.begin()), std::make_move_iterator(layers.end()));
    }
    out.emplace_back("dense", dense_.parameters());
    return out;
  }

  std::size_t parameter_layer_count() { return parameter_layers().size(); }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& [name, params] : parameter_layers()) out.insert(out.end(), params.begin(), params.end());
    return out;
  }

  std::size_t scalar_parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }

  std::vector<std::pair<std::string, Tensor*>> buffers() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& b : blocks_) {
      auto bufs = b->buffers();
      out.insert(out.end(), bufs.begin(), bufs.end());
    }
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  /// Restarts every dropout stream from a seed derived from `seed`.
  void reseed_dropout(std::uint64_t seed) {
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i]->reseed_dropout(derive_seed(seed, 1000 + i));
  }

  /// FNV-1a over every parameter value, in parameter order.
  std::uint64_t parameter_hash() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto* p : parameters()) h = hash_tensor(p->value, h);
    return h;
  }

 private:
  nn::Dense make_head() {
    if (cfg_.blocks == 0) throw ConfigError("network needs at least one block");
    if (cfg_.features == 0) throw ConfigError("network feature count must be positive");
    if (cfg_.classes < 2) throw ConfigError("network needs at least two classes");
    Rng init(cfg_.seed);
    const Shape in = cfg_.input_shape();
    std::size_t length = in[0];
    for (std::size_t i = 0; i < cfg_.blocks; ++i) {
      BlockSpec spec;
      spec.kind = cfg_.kind;
      spec.length = length;
      spec.in_channels = i == 0 ? in[1] : cfg_.features;
      spec.filters = cfg_.features;
      spec.recurrent_units = cfg_.features;
      spec.kernel = cfg_.kernel;
      spec.dropout_rate = cfg_.dropout_rate;
      spec.pool = cfg_.pool;
      spec.batch_norm = cfg_.batch_norm;
      spec.add_before_dropout = cfg_.add_before_dropout;
      spec.shortcut = cfg_.shortcut;
      blocks_.push_back(std::make_unique<Block>("block" + std::to_string(i), spec, init,
                                                derive_seed(cfg_.seed, 1000 + i)));
      length = blocks_.back()->output_length();
    }
    return nn::Dense("dense", cfg_.features, cfg_.classes, init);
  }

  void check_input(const Tensor& x) const {
    const Shape in = cfg_.input_shape();
    if (x.rank() != 3 || x.dim(1) != in[0] || x.dim(2) != in[1]) {
      throw ShapeError("network expects batches of shape (B," + std::to_string(in[0]) + "," + std::to_string(in[1]) +
                       "), got " + to_string(x.shape()));
    }
  }

  NetworkConfig cfg_;
  std::vector<std::unique_ptr<Block>> blocks_;
  nn::GlobalAvgPool gap_;
  nn::Dense dense_;
  bool trained_forward_ = false;
};

/// Builds one of the named networks from a block count and kind.
inline Network build_network(NetworkConfig cfg) { return Network(std::move(cfg)); }

}  // namespace pelican
