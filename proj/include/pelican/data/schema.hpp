#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pelican/error.hpp"

namespace pelican::data {

enum class DatasetId { NslKdd, UnswNb15 };

inline std::string to_string(DatasetId id) { return id == DatasetId::NslKdd ? "nslkdd" : "unswnb15"; }

inline DatasetId parse_dataset_id(std::string_view s) {
  if (s == "nslkdd") return DatasetId::NslKdd;
  if (s == "unswnb15") return DatasetId::UnswNb15;
  throw ConfigError("unknown dataset '" + std::string(s) + "' (expected nslkdd or unswnb15)");
}

/// numeric: z-scored feature; categorical: one-hot expanded then z-scored;
/// label: class column; binary: 0/1 attack flag used only as a cross-check;
/// ignore: skipped (row ids, difficulty scores).
enum class ColumnKind { Numeric, Categorical, Label, Binary, Ignore };

inline std::string to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Label: return "label";
    case ColumnKind::Binary: return "binary";
    case ColumnKind::Ignore: return "ignore";
  }
  return "?";
}

inline ColumnKind parse_column_kind(std::string_view s) {
  if (s == "numeric") return ColumnKind::Numeric;
  if (s == "categorical") return ColumnKind::Categorical;
  if (s == "label") return ColumnKind::Label;
  if (s == "binary") return ColumnKind::Binary;
  if (s == "ignore") return ColumnKind::Ignore;
  throw ConfigError("unknown column kind '" + std::string(s) + "'");
}

struct Column {
  std::string name;
  ColumnKind kind;
};

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Ordered column descriptors for one CSV layout.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Column> columns) : columns_(std::move(columns)) {
    std::size_t labels = 0;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].kind == ColumnKind::Label) {
        label_index_ = i;
        ++labels;
      }
    }
    if (labels != 1) throw ConfigError("schema must contain exactly one label column, found " + std::to_string(labels));
  }

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  std::size_t label_index() const { return label_index_; }

  std::size_t count(ColumnKind k) const {
    return static_cast<std::size_t>(
        std::count_if(columns_.begin(), columns_.end(), [k](const Column& c) { return c.kind == k; }));
  }

  /// Trailing ignore columns may be absent from a row.
  std::size_t min_fields() const {
    std::size_t n = columns_.size();
    while (n > 0 && columns_[n - 1].kind == ColumnKind::Ignore) --n;
    return n;
  }

 private:
  std::vector<Column> columns_;
  std::size_t label_index_ = 0;
};

/// Parses an override file: one `name:kind` per line; blank lines and lines
/// starting with '#' are skipped.
inline Schema parse_schema(std::string_view text) {
  std::vector<Column> cols;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto colon = t.rfind(':');
    if (colon == std::string::npos) {
      throw ConfigError("schema line " + std::to_string(lineno) + ": expected name:kind, got '" + t + "'");
    }
    cols.push_back({trim(t.substr(0, colon)), parse_column_kind(trim(t.substr(colon + 1)))});
  }
  return Schema(std::move(cols));
}

inline Schema builtin_schema(DatasetId id) {
  using K = ColumnKind;
  std::vector<Column> cols;
  auto numeric = [&](std::initializer_list<const char*> names) {
    for (const char* n : names) cols.push_back({n, K::Numeric});
  };
  if (id == DatasetId::NslKdd) {
    numeric({"duration"});
    cols.push_back({"protocol_type", K::Categorical});
    cols.push_back({"service", K::Categorical});
    cols.push_back({"flag", K::Categorical});
    numeric({"src_bytes", "dst_bytes", "land", "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
             "num_compromised", "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
             "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count", "srv_count",
             "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate", "same_srv_rate", "diff_srv_rate",
             "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate",
             "dst_host_diff_srv_rate", "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
             "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
             "dst_host_srv_rerror_rate"});
    cols.push_back({"label", K::Label});
    cols.push_back({"difficulty", K::Ignore});
  } else {
    cols.push_back({"id", K::Ignore});
    numeric({"dur"});
    cols.push_back({"proto", K::Categorical});
    cols.push_back({"service", K::Categorical});
    cols.push_back({"state", K::Categorical});
    numeric({"spkts", "dpkts", "sbytes", "dbytes", "rate", "sttl", "dttl", "sload", "dload", "sloss", "dloss",
             "sinpkt", "dinpkt", "sjit", "djit", "swin", "stcpb", "dtcpb", "dwin", "tcprtt", "synack", "ackdat",
             "smean", "dmean", "trans_depth", "response_body_len", "ct_srv_src", "ct_state_ttl", "ct_dst_ltm",
             "ct_src_dport_ltm", "ct_dst_sport_ltm", "ct_dst_src_ltm", "is_ftp_login", "ct_ftp_cmd",
             "ct_flw_http_mthd", "ct_src_ltm", "ct_srv_dst", "is_sm_ips_ports"});
    cols.push_back({"attack_cat", K::Label});
    cols.push_back({"label", K::Binary});
  }
  return Schema(std::move(cols));
}

/// Feature columns (numeric + categorical) the dataset is published with.
inline std::size_t original_feature_count(DatasetId id) { return id == DatasetId::NslKdd ? 41 : 42; }

// ---------------------------------------------------------------------------
// Class vocabularies. Index 0 is always the normal class.

inline const std::vector<std::string>& class_names(DatasetId id) {
  static const std::vector<std::string> nsl{"Normal", "DoS", "Probe", "R2L", "U2R"};
  static const std::vector<std::string> unsw{"Normal",    "DoS",       "Exploits", "Generic",  "Shellcode",
                                             "Reconnaissance", "Backdoor", "Worms", "Analysis", "Fuzzers"};
  return id == DatasetId::NslKdd ? nsl : unsw;
}

inline constexpr std::size_t kNormalClass = 0;

/// NSL-KDD attack names grouped into the four attack categories.
inline const std::vector<std::pair<std::string, std::size_t>>& nslkdd_attack_table() {
  static const std::vector<std::pair<std::string, std::size_t>> table = {
      {"normal", 0},
      // DoS
      {"back", 1}, {"land", 1}, {"neptune", 1}, {"pod", 1}, {"smurf", 1}, {"teardrop", 1}, {"apache2", 1},
      {"udpstorm", 1}, {"processtable", 1}, {"mailbomb", 1}, {"worm", 1},
      // Probe
      {"satan", 2}, {"ipsweep", 2}, {"nmap", 2}, {"portsweep", 2}, {"mscan", 2}, {"saint", 2},
      // R2L
      {"guess_passwd", 3}, {"ftp_write", 3}, {"imap", 3}, {"phf", 3}, {"multihop", 3}, {"warezmaster", 3},
      {"warezclient", 3}, {"spy", 3}, {"xlock", 3}, {"xsnoop", 3}, {"snmpguess", 3}, {"snmpgetattack", 3},
      {"httptunnel", 3}, {"sendmail", 3}, {"named", 3},
      // U2R
      {"buffer_overflow", 4}, {"loadmodule", 4}, {"rootkit", 4}, {"perl", 4}, {"sqlattack", 4}, {"xterm", 4},
      {"ps", 4}};
  return table;
}

/// Maps a raw label field to a class index; nullopt for unknown labels.
inline std::optional<std::size_t> map_label(DatasetId id, std::string_view raw) {
  std::string v = lower(trim(raw));
  if (id == DatasetId::NslKdd) {
    if (!v.empty() && v.back() == '.') v.pop_back();
    for (const auto& [name, cls] : nslkdd_attack_table())
      if (name == v) return cls;
    // Already-categorized files carry the category name itself.
    const auto& names = class_names(id);
    for (std::size_t i = 0; i < names.size(); ++i)
      if (lower(names[i]) == v) return i;
    return std::nullopt;
  }
  if (v.empty() || v == "-") return kNormalClass;
  if (v == "backdoors") v = "backdoor";
  const auto& names = class_names(id);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (lower(names[i]) == v) return i;
  return std::nullopt;
}

}  // namespace pelican::data
