#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pelican/data/csv.hpp"
#include "pelican/tensor.hpp"

namespace pelican::data {

/// How one schema feature column maps to encoded columns.
struct ColumnEncoding {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;  // Numeric or Categorical
  std::size_t source = 0;                 // index into RawRow::numeric / ::categorical
  std::size_t offset = 0;                 // first encoded column
  std::vector<std::string> vocabulary;    // categorical only, sorted
  std::vector<double> mean;               // one per encoded column
  std::vector<double> stddev;             // population std; 0 for constant columns

  std::size_t width() const { return kind == ColumnKind::Numeric ? 1 : vocabulary.size(); }
};

/// Fitted one-hot vocabularies and standardization constants.
struct EncoderModel {
  DatasetId dataset = DatasetId::NslKdd;
  std::vector<ColumnEncoding> columns;
  std::size_t width = 0;
  std::size_t fitted_rows = 0;

  std::size_t numeric_count() const {
    return static_cast<std::size_t>(std::count_if(columns.begin(), columns.end(),
                                                  [](const auto& c) { return c.kind == ColumnKind::Numeric; }));
  }
};

/// Standardized features plus one-hot labels.
struct EncodedDataset {
  Tensor features;  // (N, F)
  Tensor onehot;    // (N, classes)
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;
  std::vector<bool> attack_class;  // per class: true for every non-normal class
  std::size_t normal_class = kNormalClass;
  std::size_t unseen_values = 0;  // categorical values absent from the fitted vocabulary

  std::size_t rows() const { return labels.size(); }
  std::size_t width() const { return features.dim(1); }
  std::size_t classes() const { return class_names.size(); }
};

namespace detail {

inline std::vector<std::size_t> all_rows(const RawDataset& raw) {
  std::vector<std::size_t> idx(raw.rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

// Unscaled encoded value of one row for a column, written to out[0..width).
inline std::size_t expand(const ColumnEncoding& col, const RawRow& row, double* out) {
  if (col.kind == ColumnKind::Numeric) {
    out[0] = row.numeric[col.source];
    return 0;
  }
  std::fill(out, out + col.vocabulary.size(), 0.0);
  const auto& v = row.categorical[col.source];
  const auto it = std::lower_bound(col.vocabulary.begin(), col.vocabulary.end(), v);
  if (it == col.vocabulary.end() || *it != v) return 1;
  out[it - col.vocabulary.begin()] = 1.0;
  return 0;
}

}  // namespace detail

/// Fits vocabularies (sorted lexicographically) and per-column mean/std on the
/// given rows (all rows when `rows` is empty). Column order follows the schema.
inline EncoderModel fit_encoder(const RawDataset& raw, std::span<const std::size_t> rows = {}) {
  std::vector<std::size_t> owned;
  if (rows.empty()) {
    owned = detail::all_rows(raw);
    rows = owned;
  }
  if (rows.empty()) throw DataError("fit_encoder: no rows to fit");

  EncoderModel model;
  model.dataset = raw.id;
  model.fitted_rows = rows.size();
  std::size_t num = 0, cat = 0, offset = 0;
  for (const auto& col : raw.schema.columns()) {
    if (col.kind != ColumnKind::Numeric && col.kind != ColumnKind::Categorical) continue;
    ColumnEncoding enc;
    enc.name = col.name;
    enc.kind = col.kind;
    enc.offset = offset;
    if (col.kind == ColumnKind::Numeric) {
      enc.source = num++;
    } else {
      enc.source = cat++;
      std::set<std::string> vocab;
      for (auto r : rows) vocab.insert(raw.rows[r].categorical[enc.source]);
      enc.vocabulary.assign(vocab.begin(), vocab.end());
    }
    offset += enc.width();
    model.columns.push_back(std::move(enc));
  }
  model.width = offset;

  // Two-pass mean / population variance per encoded column.
  const double n = static_cast<double>(rows.size());
  std::vector<double> buf;
  for (auto& enc : model.columns) {
    const std::size_t w = enc.width();
    buf.assign(w, 0.0);
    enc.mean.assign(w, 0.0);
    enc.stddev.assign(w, 0.0);
    for (auto r : rows) {
      detail::expand(enc, raw.rows[r], buf.data());
      for (std::size_t j = 0; j < w; ++j) enc.mean[j] += buf[j];
    }
    for (auto& m : enc.mean) m /= n;
    for (auto r : rows) {
      detail::expand(enc, raw.rows[r], buf.data());
      for (std::size_t j = 0; j < w; ++j) {
        const double d = buf[j] - enc.mean[j];
        enc.stddev[j] += d * d;
      }
    }
    for (auto& s : enc.stddev) s = std::sqrt(s / n);
  }
  return model;
}

/// Encodes rows (all when `rows` is empty) with a fitted model. Constant
/// columns (std 0) are only centred. Unseen categorical values encode as an
/// all-zero indicator group before scaling and are counted.
inline EncodedDataset apply_encoder(const EncoderModel& model, const RawDataset& raw,
                                    std::span<const std::size_t> rows = {}) {
  std::vector<std::size_t> owned;
  if (rows.empty()) {
    owned = detail::all_rows(raw);
    rows = owned;
  }
  if (rows.empty()) throw DataError("apply_encoder: no rows to encode");
  if (raw.id != model.dataset) throw ConfigError("apply_encoder: encoder was fitted on a different dataset");

  const auto& names = class_names(raw.id);
  EncodedDataset out;
  out.class_names = names;
  out.normal_class = kNormalClass;
  out.attack_class.assign(names.size(), true);
  out.attack_class[kNormalClass] = false;
  out.features = Tensor({rows.size(), model.width});
  out.onehot = Tensor({rows.size(), names.size()});
  out.labels.resize(rows.size());

  std::vector<double> buf;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RawRow& row = raw.rows[rows[i]];
    double* dst = out.features.raw() + i * model.width;
    for (const auto& enc : model.columns) {
      buf.resize(enc.width());
      out.unseen_values += detail::expand(enc, row, buf.data());
      for (std::size_t j = 0; j < enc.width(); ++j) {
        const double sd = enc.stddev[j] > 0.0 ? enc.stddev[j] : 1.0;
        dst[enc.offset + j] = (buf[j] - enc.mean[j]) / sd;
      }
    }
    out.labels[i] = row.label;
    out.onehot.at(i, row.label) = 1.0;
  }
  return out;
}

/// Undoes standardization of one encoded value: x = z * std + mean.
inline double unscale(const EncoderModel& model, std::size_t encoded_column, double z) {
  for (const auto& enc : model.columns) {
    if (encoded_column >= enc.offset && encoded_column < enc.offset + enc.width()) {
      const std::size_t j = encoded_column - enc.offset;
      const double sd = enc.stddev[j] > 0.0 ? enc.stddev[j] : 1.0;
      return z * sd + enc.mean[j];
    }
  }
  throw ShapeError("unscale: encoded column " + std::to_string(encoded_column) + " out of range");
}

inline nlohmann::json to_json(const EncoderModel& m) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : m.columns) {
    cols.push_back({{"name", c.name},
                    {"kind", to_string(c.kind)},
                    {"source", c.source},
                    {"offset", c.offset},
                    {"vocabulary", c.vocabulary},
                    {"mean", c.mean},
                    {"stddev", c.stddev}});
  }
  return {{"dataset", to_string(m.dataset)}, {"width", m.width}, {"fitted_rows", m.fitted_rows}, {"columns", cols}};
}

inline EncoderModel encoder_from_json(const nlohmann::json& j) {
  EncoderModel m;
  m.dataset = parse_dataset_id(j.at("dataset").get<std::string>());
  m.width = j.at("width").get<std::size_t>();
  m.fitted_rows = j.value("fitted_rows", std::size_t{0});
  for (const auto& c : j.at("columns")) {
    ColumnEncoding e;
    e.name = c.at("name").get<std::string>();
    e.kind = parse_column_kind(c.at("kind").get<std::string>());
    e.source = c.at("source").get<std::size_t>();
    e.offset = c.at("offset").get<std::size_t>();
    e.vocabulary = c.at("vocabulary").get<std::vector<std::string>>();
    e.mean = c.at("mean").get<std::vector<double>>();
    e.stddev = c.at("stddev").get<std::vector<double>>();
    m.columns.push_back(std::move(e));
  }
  return m;
}

}  // namespace pelican::data
