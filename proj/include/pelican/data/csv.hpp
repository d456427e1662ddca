#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "pelican/data/schema.hpp"

namespace pelican::data {

/// One parsed record: feature values split by kind, in schema order.
struct RawRow {
  std::vector<double> numeric;
  std::vector<std::string> categorical;
  std::size_t label = 0;
  std::size_t line = 0;
};

/// A row that failed to parse. It never reaches encoding or folds.
struct Reject {
  std::string source;
  std::size_t line = 0;
  std::string column;
  std::string value;
  std::string reason;
};

struct RawDataset {
  DatasetId id = DatasetId::NslKdd;
  Schema schema;
  std::vector<RawRow> rows;
  std::vector<Reject> rejects;
  std::size_t label_mismatches = 0;  // binary flag disagrees with the class label
  bool had_header = false;
};

/// Splits one CSV line. Double-quoted fields may contain commas; the datasets
/// themselves never quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  out.push_back(std::move(field));
  for (auto& f : out) f = trim(f);
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

namespace detail {

inline bool looks_like_header(const std::vector<std::string>& fields, const Schema& schema) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < fields.size() && i < schema.size(); ++i)
    if (lower(fields[i]) == lower(schema.columns()[i].name)) ++hits;
  return hits * 2 >= std::min(fields.size(), schema.size());
}

}  // namespace detail

/// Parses CSV text against a schema. A header row is detected by column names.
/// Column-count mismatches are fatal; bad field values send the row to rejects.
/// `source` names the input in error messages and the rejects report.
inline void parse_csv_into(std::istream& in, RawDataset& out, const std::string& source = "<input>") {
  const Schema& schema = out.schema;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      first = false;
      if (detail::looks_like_header(fields, schema)) {
        out.had_header = true;
        continue;
      }
    }
    if (fields.size() > schema.size() || fields.size() < schema.min_fields()) {
      throw DataError(source + ":" + std::to_string(lineno) + ": " + std::to_string(fields.size()) +
                      " columns, schema expects " + std::to_string(schema.size()));
    }
    RawRow row;
    row.line = lineno;
    bool ok = true;
    std::optional<int> binary_flag;
    for (std::size_t c = 0; c < fields.size() && ok; ++c) {
      const Column& col = schema.columns()[c];
      const std::string& v = fields[c];
      switch (col.kind) {
        case ColumnKind::Numeric: {
          if (auto num = parse_number(v)) {
            row.numeric.push_back(*num);
          } else {
            out.rejects.push_back({source, lineno, col.name, v, "not a number"});
            ok = false;
          }
          break;
        }
        case ColumnKind::Categorical:
          row.categorical.push_back(v);
          break;
        case ColumnKind::Label: {
          if (auto cls = map_label(out.id, v)) {
            row.label = *cls;
          } else {
            out.rejects.push_back({source, lineno, col.name, v, "unknown label"});
            ok = false;
          }
          break;
        }
        case ColumnKind::Binary: {
          auto num = parse_number(v);
          if (!num || (*num != 0.0 && *num != 1.0)) {
            out.rejects.push_back({source, lineno, col.name, v, "binary flag must be 0 or 1"});
            ok = false;
          } else {
            binary_flag = static_cast<int>(*num);
          }
          break;
        }
        case ColumnKind::Ignore:
          break;
      }
    }
    if (!ok) continue;
    if (binary_flag && (*binary_flag == 1) != (row.label != kNormalClass)) ++out.label_mismatches;
    out.rows.push_back(std::move(row));
  }
}

inline RawDataset parse_csv(std::istream& in, DatasetId id, std::optional<Schema> schema = std::nullopt) {
  RawDataset ds;
  ds.id = id;
  ds.schema = schema ? *schema : builtin_schema(id);
  parse_csv_into(in, ds);
  return ds;
}

inline RawDataset parse_csv_text(std::string_view text, DatasetId id, std::optional<Schema> schema = std::nullopt) {
  std::istringstream in{std::string(text)};
  return parse_csv(in, id, std::move(schema));
}

/// Parses and concatenates several files (e.g. a train and a test split).
inline RawDataset parse_csv_files(const std::vector<std::filesystem::path>& paths, DatasetId id,
                                  std::optional<Schema> schema = std::nullopt) {
  if (paths.empty()) throw ConfigError("no input files given");
  RawDataset ds;
  ds.id = id;
  ds.schema = schema ? *schema : builtin_schema(id);
  for (const auto& p : paths) {
    std::ifstream f(p);
    if (!f) throw DataError("cannot open " + p.string());
    parse_csv_into(f, ds, p.filename().string());
  }
  return ds;
}

}  // namespace pelican::data
