#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "pelican/data/schema.hpp"
#include "pelican/rng.hpp"

namespace pelican::data {

// Schema-conformant synthetic records for tests and desk-scale experiments
// when the public CSVs are not available. Vocabularies match the public
// releases in size; feature distributions are class-conditional but invented.

inline const std::vector<std::string>& nslkdd_services() {
  static const std::vector<std::string> v{
      "aol",       "auth",      "bgp",        "courier",     "csnet_ns",    "ctf",      "daytime",  "discard",
      "domain",    "domain_u",  "echo",       "eco_i",       "ecr_i",       "efs",      "exec",     "finger",
      "ftp",       "ftp_data",  "gopher",     "harvest",     "hostnames",   "http",     "http_2784", "http_443",
      "http_8001", "imap4",     "IRC",        "iso_tsap",    "klogin",      "kshell",   "ldap",     "link",
      "login",     "mtp",       "name",       "netbios_dgm", "netbios_ns",  "netbios_ssn", "netstat", "nnsp",
      "nntp",      "ntp_u",     "other",      "pm_dump",     "pop_2",       "pop_3",    "printer",  "private",
      "red_i",     "remote_job", "rje",       "shell",       "smtp",        "sql_net",  "ssh",      "sunrpc",
      "supdup",    "systat",    "telnet",     "tftp_u",      "tim_i",       "time",     "urh_i",    "urp_i",
      "uucp",      "uucp_path", "vmnet",      "whois",       "X11",         "Z39_50"};
  return v;
}

inline const std::vector<std::string>& unswnb15_protocols() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> out{"tcp", "udp", "unas", "arp", "ospf", "sctp", "icmp", "igmp", "gre", "ipv6",
                                 "rtp", "ddp", "xtp", "pim", "sun-nd", "swipe", "mobile", "sep", "ib", "il"};
    for (int i = 0; out.size() < 133; ++i) {
      std::string n = std::to_string(i);
      out.push_back("proto-" + std::string(3 - std::min<std::size_t>(3, n.size()), '0') + n);
    }
    return out;
  }();
  return v;
}

/// Vocabulary the generator draws from for a categorical column.
inline std::vector<std::string> synthetic_vocabulary(DatasetId id, const std::string& column) {
  if (id == DatasetId::NslKdd) {
    if (column == "protocol_type") return {"tcp", "udp", "icmp"};
    if (column == "service") return nslkdd_services();
    if (column == "flag") return {"SF", "S0", "REJ", "RSTR", "RSTO", "SH", "S1", "S2", "RSTOS0", "S3", "OTH"};
  } else {
    if (column == "proto") return unswnb15_protocols();
    if (column == "service")
      return {"-", "ftp", "smtp", "snmp", "http", "ftp-data", "dns", "ssh", "radius", "pop3", "dhcp", "ssl", "irc"};
    if (column == "state") return {"FIN", "INT", "CON", "REQ", "ACC", "CLO", "RST", "ECO", "PAR", "URN", "no"};
  }
  return {"a", "b", "c"};
}

/// Approximate class shares of the public releases, in class_names() order.
inline std::vector<double> synthetic_class_priors(DatasetId id) {
  if (id == DatasetId::NslKdd) return {0.519, 0.359, 0.095, 0.026, 0.001};
  // Normal, DoS, Exploits, Generic, Shellcode, Reconnaissance, Backdoor, Worms, Analysis, Fuzzers
  return {0.361, 0.063, 0.173, 0.228, 0.006, 0.054, 0.009, 0.001, 0.010, 0.095};
}

namespace detail {

inline std::string format_number(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

enum class NumericShape { Count, Rate, Flag, Constant };

inline NumericShape numeric_shape(const std::string& name) {
  static const std::set<std::string> flags{"land",          "logged_in",      "root_shell",   "su_attempted",
                                           "is_host_login", "is_guest_login", "is_ftp_login", "is_sm_ips_ports"};
  if (name == "num_outbound_cmds") return NumericShape::Constant;
  if (flags.count(name)) return NumericShape::Flag;
  if (name.find("rate") != std::string::npos && name != "rate") return NumericShape::Rate;
  return NumericShape::Count;
}

struct ColumnProfile {
  NumericShape shape = NumericShape::Count;
  std::vector<double> location;          // per class
  double spread = 1.0;
  std::vector<std::vector<double>> cdf;  // categorical: per class cumulative weights
  std::vector<std::string> vocabulary;
};

}  // namespace detail

/// Generates `n` records as CSV fields in schema column order.
///
/// The class-conditional profile is fixed per dataset id; `seed` only selects
/// the sample. The first rows cycle through every vocabulary entry so all
/// categories appear once n reaches the largest vocabulary. About 5% of rows
/// draw their features from another class's profile.
class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(DatasetId id) : id_(id), schema_(builtin_schema(id)) {
    Rng prof(0x5eed0fda7aULL + static_cast<std::uint64_t>(id));
    const std::size_t classes = class_names(id).size();
    for (const auto& col : schema_.columns()) {
      detail::ColumnProfile p;
      if (col.kind == ColumnKind::Numeric) {
        p.shape = detail::numeric_shape(col.name);
        const double base = p.shape == detail::NumericShape::Count ? prof.uniform(0.5, 5.0) : prof.uniform(0.05, 0.6);
        p.spread = p.shape == detail::NumericShape::Count ? prof.uniform(0.4, 1.2) : 0.12;
        for (std::size_t c = 0; c < classes; ++c) {
          double loc = base;
          if (prof.uniform() < 0.45) {
            const double shift = p.shape == detail::NumericShape::Count ? prof.uniform(0.4, 2.0) : prof.uniform(0.1, 0.4);
            loc += prof.uniform() < 0.5 ? -shift : shift;
          }
          if (p.shape != detail::NumericShape::Count) loc = std::clamp(loc, 0.02, 0.98);
          p.location.push_back(loc);
        }
      } else if (col.kind == ColumnKind::Categorical) {
        p.vocabulary = synthetic_vocabulary(id, col.name);
        for (std::size_t c = 0; c < classes; ++c) {
          std::vector<double> cdf(p.vocabulary.size());
          double acc = 0.0;
          for (std::size_t v = 0; v < cdf.size(); ++v) {
            acc += std::exp(1.8 * prof.normal());
            cdf[v] = acc;
          }
          for (auto& x : cdf) x /= acc;
          p.cdf.push_back(std::move(cdf));
        }
      }
      profiles_.push_back(std::move(p));
    }
    const auto priors = synthetic_class_priors(id);
    double acc = 0.0;
    for (double p : priors) {
      acc += p;
      class_cdf_.push_back(acc);
    }
    for (auto& x : class_cdf_) x /= acc;
  }

  const Schema& schema() const { return schema_; }

  std::vector<std::vector<std::string>> rows(std::size_t n, std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<std::vector<std::string>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(row(i, rng));
    return out;
  }

  void write_csv(std::ostream& os, std::size_t n, std::uint64_t seed, bool header) const {
    if (header) {
      for (std::size_t c = 0; c < schema_.size(); ++c) os << (c ? "," : "") << schema_.columns()[c].name;
      os << '\n';
    }
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
      const auto fields = row(i, rng);
      for (std::size_t c = 0; c < fields.size(); ++c) os << (c ? "," : "") << fields[c];
      os << '\n';
    }
  }

 private:
  std::size_t draw(const std::vector<double>& cdf, Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  }

  std::vector<std::string> row(std::size_t index, Rng& rng) const {
    const std::size_t classes = class_cdf_.size();
    const std::size_t label = draw(class_cdf_, rng);
    std::size_t look = label;
    if (rng.uniform() < 0.05) look = static_cast<std::size_t>(rng.below(classes));

    std::vector<std::string> fields;
    fields.reserve(schema_.size());
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      const auto& col = schema_.columns()[c];
      const auto& p = profiles_[c];
      switch (col.kind) {
        case ColumnKind::Numeric: {
          double v = 0.0;
          switch (p.shape) {
            case detail::NumericShape::Count:
              v = std::max(0.0, std::floor(std::exp(p.location[look] + p.spread * rng.normal())) - 1.0);
              break;
            case detail::NumericShape::Rate:
              v = std::round(std::clamp(p.location[look] + p.spread * rng.normal(), 0.0, 1.0) * 100.0) / 100.0;
              break;
            case detail::NumericShape::Flag:
              v = rng.uniform() < p.location[look] ? 1.0 : 0.0;
              break;
            case detail::NumericShape::Constant:
              v = 0.0;
              break;
          }
          fields.push_back(detail::format_number(v));
          break;
        }
        case ColumnKind::Categorical: {
          const std::size_t v = index < p.vocabulary.size() ? index : draw(p.cdf[look], rng);
          fields.push_back(p.vocabulary[v]);
          break;
        }
        case ColumnKind::Label:
          fields.push_back(label_text(label, rng));
          break;
        case ColumnKind::Binary:
          fields.push_back(label == kNormalClass ? "0" : "1");
          break;
        case ColumnKind::Ignore:
          fields.push_back(col.name == "id" ? std::to_string(index + 1) : std::to_string(rng.below(22)));
          break;
      }
    }
    return fields;
  }

  std::string label_text(std::size_t label, Rng& rng) const {
    if (id_ == DatasetId::UnswNb15) return class_names(id_)[label];
    std::vector<const std::string*> names;
    for (const auto& [name, cls] : nslkdd_attack_table())
      if (cls == label) names.push_back(&name);
    return *names[static_cast<std::size_t>(rng.below(names.size()))];
  }

  DatasetId id_;
  Schema schema_;
  std::vector<detail::ColumnProfile> profiles_;
  std::vector<double> class_cdf_;
};

}  // namespace pelican::data
