#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pelican/model.hpp"

namespace pelican {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

inline nlohmann::json to_json(const NetworkConfig& c) {
  return {{"blocks", c.blocks},
          {"kind", to_string(c.kind)},
          {"features", c.features},
          {"layout", to_string(c.layout)},
          {"classes", c.classes},
          {"seed", c.seed},
          {"kernel", c.kernel},
          {"dropout_rate", c.dropout_rate},
          {"pool", c.pool.pool},
          {"pool_stride", c.pool.stride},
          {"pool_same_pad", c.pool.same_pad},
          {"bn_momentum", c.batch_norm.momentum},
          {"bn_epsilon", c.batch_norm.epsilon},
          {"add_before_dropout", c.add_before_dropout},
          {"shortcut", to_string(c.shortcut)},
          {"parameter_layers", 4 * c.blocks + 1}};
}

inline NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.blocks = j.at("blocks").get<std::size_t>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "plain" && kind != "residual") throw ConfigError("unknown block kind '" + kind + "'");
  c.kind = kind == "plain" ? BlockKind::Plain : BlockKind::Residual;
  c.features = j.at("features").get<std::size_t>();
  c.layout = j.at("layout").get<std::string>() == "sequence" ? InputLayout::Sequence : InputLayout::Flat;
  c.classes = j.at("classes").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.pool.pool = j.at("pool").get<std::size_t>();
  c.pool.stride = j.at("pool_stride").get<std::size_t>();
  c.pool.same_pad = j.at("pool_same_pad").get<bool>();
  c.batch_norm.momentum = j.at("bn_momentum").get<double>();
  c.batch_norm.epsilon = j.at("bn_epsilon").get<double>();
  c.add_before_dropout = j.at("add_before_dropout").get<bool>();
  c.shortcut = j.at("shortcut").get<std::string>() == "second_bn" ? ShortcutSource::SecondBatchNorm
                                                                   : ShortcutSource::FirstBatchNorm;
  return c;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
inline void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }
inline void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(std::span<double> out) {
    need(out.size() * 8);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * 8);
    pos_ += out.size() * 8;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint is truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

inline void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
  put_str(out, name);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u64(out, d);
  out.append(reinterpret_cast<const char*>(t.raw()), t.size() * sizeof(double));
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'P', 'E', 'L', 'I', 'C', 'A', 'N', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serializes the network to the checkpoint container:
///   magic(8) | version u32 | header JSON (config echo + extra) | tensor count u64 |
///   { name | rank u32 | dims u64... | raw little-endian f64 data } ...
/// Parameters come first in network order, then BN running buffers.
inline std::string checkpoint_bytes(Network& net, const nlohmann::json& extra = nlohmann::json::object()) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  nlohmann::json header{{"config", to_json(net.config())}, {"seed", net.config().seed}, {"extra", extra}};
  detail::put_str(out, header.dump());
  auto params = net.parameters();
  auto buffers = net.buffers();
  detail::put_u64(out, params.size() + buffers.size());
  for (auto* p : params) detail::put_tensor(out, p->name, p->value);
  for (auto& [name, t] : buffers) detail::put_tensor(out, name, *t);
  return out;
}

inline void save_checkpoint(Network& net, const std::filesystem::path& path,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  const std::string bytes = checkpoint_bytes(net, extra);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

struct LoadedCheckpoint {
  Network network;
  nlohmann::json extra;
};

inline LoadedCheckpoint checkpoint_from_bytes(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  detail::Reader in(bytes);
  in.get<std::uint64_t>();  // magic
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto header = nlohmann::json::parse(in.str());
  Network net(network_config_from_json(header.at("config")));

  std::map<std::string, Tensor*> slots;
  for (auto* p : net.parameters()) slots[p->name] = &p->value;
  for (auto& [name, t] : net.buffers()) slots[name] = t;

  const auto count = in.get<std::uint64_t>();
  if (count != slots.size()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, network expects " +
                    std::to_string(slots.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = in.str();
    const auto rank = in.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = in.get<std::uint64_t>();
    auto it = slots.find(name);
    if (it == slots.end()) throw DataError("checkpoint tensor '" + name + "' does not belong to the network");
    if (it->second->shape() != shape) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + to_string(shape) + ", network expects " +
                      to_string(it->second->shape()));
    }
    in.doubles(it->second->data());
  }
  if (!in.done()) throw DataError("checkpoint has trailing bytes");
  return {std::move(net), header.value("extra", nlohmann::json::object())};
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(bytes);
}

}  // namespace pelican
