#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <nlohmann/json.hpp>

#include "pelican/data/encoder.hpp"
#include "pelican/data/folds.hpp"

namespace pelican::data {

namespace fs = std::filesystem;

inline constexpr char kTensorMagic[8] = {'P', 'L', 'C', 'N', 'T', 'S', 'R', '1'};

/// Raw tensor file: magic(8) | rank u32 | dims u64... | little-endian f64 data.
inline void write_tensor(const fs::path& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(kTensorMagic, sizeof kTensorMagic);
  const auto rank = static_cast<std::uint32_t>(t.rank());
  f.write(reinterpret_cast<const char*>(&rank), sizeof rank);
  for (std::uint64_t d : t.shape()) f.write(reinterpret_cast<const char*>(&d), sizeof d);
  f.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

inline Tensor read_tensor(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  char magic[8];
  f.read(magic, sizeof magic);
  if (!f || std::memcmp(magic, kTensorMagic, sizeof magic) != 0) throw DataError(path.string() + " is not a tensor file");
  std::uint32_t rank = 0;
  f.read(reinterpret_cast<char*>(&rank), sizeof rank);
  Shape shape(rank);
  for (auto& d : shape) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    d = v;
  }
  Tensor t(shape);
  f.read(reinterpret_cast<char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!f) throw DataError(path.string() + " is truncated");
  return t;
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path.string());
  return nlohmann::json::parse(f);
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

inline std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::uint64_t file_hash(const fs::path& path) {
  const std::string bytes = read_file(path);
  return fnv1a(std::as_bytes(std::span<const char>(bytes)));
}

/// Output of preprocessing: encoded tensors, encoder and fold plan.
struct PreparedDataset {
  DatasetId id = DatasetId::NslKdd;
  EncodedDataset data;
  EncoderModel encoder;
  FoldPlan folds;
};

/// Directory layout: features.bin, labels.bin, dataset.json, encoder.json, folds.json.
inline void save_prepared(const fs::path& dir, const PreparedDataset& p) {
  fs::create_directories(dir);
  write_tensor(dir / "features.bin", p.data.features);
  Tensor labels({p.data.rows()});
  for (std::size_t i = 0; i < p.data.rows(); ++i) labels[i] = static_cast<double>(p.data.labels[i]);
  write_tensor(dir / "labels.bin", labels);
  write_json(dir / "dataset.json", {{"dataset", to_string(p.id)},
                                    {"rows", p.data.rows()},
                                    {"width", p.data.width()},
                                    {"class_names", p.data.class_names},
                                    {"normal_class", p.data.normal_class},
                                    {"unseen_values", p.data.unseen_values}});
  write_json(dir / "encoder.json", to_json(p.encoder));
  write_json(dir / "folds.json", to_json(p.folds));
}

inline PreparedDataset load_prepared(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("preprocessed dataset directory " + dir.string() + " does not exist");
  PreparedDataset p;
  const auto meta = read_json(dir / "dataset.json");
  p.id = parse_dataset_id(meta.at("dataset").get<std::string>());
  p.data.features = read_tensor(dir / "features.bin");
  const Tensor labels = read_tensor(dir / "labels.bin");
  p.data.class_names = meta.at("class_names").get<std::vector<std::string>>();
  p.data.normal_class = meta.at("normal_class").get<std::size_t>();
  p.data.unseen_values = meta.value("unseen_values", std::size_t{0});
  const std::size_t rows = labels.size(), classes = p.data.class_names.size();
  if (p.data.features.rank() != 2 || p.data.features.dim(0) != rows) {
    throw DataError("features.bin and labels.bin disagree on the record count");
  }
  p.data.labels.resize(rows);
  p.data.onehot = Tensor({rows, classes});
  for (std::size_t i = 0; i < rows; ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    if (c >= classes) throw DataError("label out of range in labels.bin");
    p.data.labels[i] = c;
    p.data.onehot.at(i, c) = 1.0;
  }
  p.data.attack_class.assign(classes, true);
  p.data.attack_class[p.data.normal_class] = false;
  p.encoder = encoder_from_json(read_json(dir / "encoder.json"));
  p.folds = fold_plan_from_json(read_json(dir / "folds.json"));
  if (p.encoder.width != p.data.width()) {
    throw DataError("encoder width " + std::to_string(p.encoder.width) + " does not match feature width " +
                    std::to_string(p.data.width()));
  }
  return p;
}

/// Restricts a prepared dataset to `rows` (e.g. a stratified subsample); the
/// fold plan is rebuilt over the subset.
inline PreparedDataset subset(const PreparedDataset& p, std::span<const std::size_t> rows, std::size_t k,
                              std::uint64_t seed) {
  PreparedDataset out;
  out.id = p.id;
  out.encoder = p.encoder;
  const std::size_t width = p.data.width(), classes = p.data.classes();
  out.data.class_names = p.data.class_names;
  out.data.normal_class = p.data.normal_class;
  out.data.attack_class = p.data.attack_class;
  out.data.features = Tensor({rows.size(), width});
  out.data.onehot = Tensor({rows.size(), classes});
  out.data.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(p.data.features.raw() + rows[i] * width, width, out.data.features.raw() + i * width);
    std::copy_n(p.data.onehot.raw() + rows[i] * classes, classes, out.data.onehot.raw() + i * classes);
    out.data.labels[i] = p.data.labels[rows[i]];
  }
  out.folds = make_folds(out.data.labels, k, seed);
  return out;
}

}  // namespace pelican::data
