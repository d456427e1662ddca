#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pelican/pelican.hpp"

namespace pelican::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kDataRootEnv = "PELICAN_DATA_ROOT";

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kNumeric = 4 };

// ---------------------------------------------------------------------------
// Output bookkeeping

/// Files written by a command, with their roles and content hashes.
class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {}

  void add(const fs::path& file, const std::string& role) { files_.emplace_back(file, role); }

  void write(const std::string& command) const {
    json files = json::array();
    for (const auto& [file, role] : files_) {
      files.push_back({{"path", fs::relative(file, dir_).generic_string()},
                       {"role", role},
                       {"bytes", fs::file_size(file)},
                       {"fnv1a64", hex64(data::file_hash(file))}});
    }
    data::write_json(dir_ / "manifest.json", {{"command", command}, {"version", kVersion}, {"files", files}});
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, std::string>> files_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Relative dataset paths that do not exist are retried under $PELICAN_DATA_ROOT.
inline fs::path resolve_data_path(const fs::path& p) {
  if (p.is_absolute() || fs::exists(p)) return p;
  if (const char* root = std::getenv(kDataRootEnv)) {
    const fs::path candidate = fs::path(root) / p;
    if (fs::exists(candidate)) return candidate;
  }
  return p;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

// ---------------------------------------------------------------------------
// Command options

struct PreprocessOptions {
  std::string dataset;
  std::vector<std::string> inputs;
  std::string out;
  std::string schema;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  bool strict = false;  // fit the encoder on the training folds of fold 0 only
};

struct NetworkOptions {
  std::string arch = "residual";
  std::size_t blocks = 10;
  std::string layout = "flat";
  std::size_t kernel = 10;
  double dropout = 0.6;
  std::string shortcut = "bn1";
  bool add_after_dropout = false;
};

struct TrainOptions {
  NetworkOptions net;
  std::string dataset;
  std::string out;
  std::optional<std::size_t> epochs;
  double lr = 0.01;
  std::size_t batch = 4000;
  std::uint64_t seed = 0;
  std::optional<double> clip;
  bool grad_probe = false;
  std::size_t fold = 0;
  bool all_folds = false;
  std::optional<std::size_t> subsample;
  bool dump_predictions = false;
  bool quiet = false;
};

struct EvalOptions {
  std::string checkpoint;
  std::string dataset;
  std::optional<std::size_t> fold;
  std::string out;
  bool dump_predictions = false;
};

struct CompareOptions {
  std::string dataset;
  std::string out;
  std::string archs = "plain21,res21,plain41,res41";
  std::optional<std::size_t> subsample;
  std::optional<std::size_t> epochs;
  std::size_t batch = 4000;
  double lr = 0.01;
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  bool quiet = false;
};

struct SynthOptions {
  std::string dataset;
  std::size_t rows = 1000;
  std::uint64_t seed = 0;
  std::string out;
  bool no_header = false;
};

// ---------------------------------------------------------------------------
// Shared helpers

struct Workspace {
  fs::path dir;
  data::PreparedDataset prepared;
  std::optional<std::size_t> subsample;
  std::uint64_t subsample_seed = 0;
};

/// Loads a preprocessed directory and optionally restricts it to a stratified
/// subsample whose folds are rebuilt with the same k.
inline Workspace open_dataset(const std::string& dir, std::optional<std::size_t> subsample, std::uint64_t seed) {
  Workspace ws;
  ws.dir = resolve_data_path(dir);
  ws.prepared = data::load_prepared(ws.dir);
  if (subsample) {
    if (*subsample < ws.prepared.folds.k) {
      throw ConfigError("--subsample " + std::to_string(*subsample) + " is smaller than the fold count " +
                        std::to_string(ws.prepared.folds.k));
    }
    const auto rows = data::stratified_subsample(ws.prepared.data.labels, *subsample, derive_seed(seed, 21));
    ws.prepared = data::subset(ws.prepared, rows, ws.prepared.folds.k, derive_seed(seed, 22));
    ws.subsample = subsample;
    ws.subsample_seed = seed;
  }
  return ws;
}

inline json dataset_echo(const Workspace& ws) {
  json hashes = json::object();
  for (const char* f : {"features.bin", "labels.bin", "encoder.json", "folds.json"})
    hashes[f] = hex64(data::file_hash(ws.dir / f));
  const auto meta = data::read_json(ws.dir / "dataset.json");
  return {{"dir", ws.dir.string()},
          {"dataset", to_string(ws.prepared.id)},
          {"rows", ws.prepared.data.rows()},
          {"width", ws.prepared.data.width()},
          {"classes", ws.prepared.data.class_names},
          {"subsample", ws.subsample ? json(*ws.subsample) : json(nullptr)},
          {"rejects", meta.value("rejects", 0)},
          {"unseen_values", ws.prepared.data.unseen_values},
          {"hashes", hashes}};
}

inline NetworkConfig network_config(const NetworkOptions& o, std::size_t features, std::size_t classes,
                                    std::uint64_t seed) {
  NetworkConfig c;
  if (o.arch == "plain") c.kind = BlockKind::Plain;
  else if (o.arch == "residual") c.kind = BlockKind::Residual;
  else throw ConfigError("unknown --arch '" + o.arch + "' (expected plain or residual)");
  if (o.layout == "flat") c.layout = InputLayout::Flat;
  else if (o.layout == "sequence") c.layout = InputLayout::Sequence;
  else throw ConfigError("unknown --layout '" + o.layout + "' (expected flat or sequence)");
  if (o.shortcut == "bn1") c.shortcut = ShortcutSource::FirstBatchNorm;
  else if (o.shortcut == "bn2") c.shortcut = ShortcutSource::SecondBatchNorm;
  else throw ConfigError("unknown --shortcut '" + o.shortcut + "' (expected bn1 or bn2)");
  c.blocks = o.blocks;
  c.features = features;
  c.classes = classes;
  c.seed = seed;
  c.kernel = o.kernel;
  c.dropout_rate = o.dropout;
  c.add_before_dropout = !o.add_after_dropout;
  return c;
}

/// Arch tokens: plainN / resN where N = 4 * blocks + 1 (plain21, res41, ...).
inline NetworkOptions parse_arch_token(const std::string& token) {
  NetworkOptions o;
  std::string digits;
  if (token.rfind("plain", 0) == 0) {
    o.arch = "plain";
    digits = token.substr(5);
  } else if (token.rfind("res", 0) == 0) {
    o.arch = "residual";
    digits = token.substr(3);
  } else {
    throw ConfigError("unknown arch token '" + token + "'");
  }
  std::size_t layers = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), layers);
  if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size() || layers < 5 || (layers - 1) % 4) {
    throw ConfigError("unknown arch token '" + token + "' (layer count must be 4 * blocks + 1)");
  }
  o.blocks = (layers - 1) / 4;
  return o;
}

inline void write_predictions(const fs::path& path, const std::vector<std::pair<std::size_t, EvalResult>>& folds) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << "fold,row,truth,predicted\n";
  for (const auto& [fold, r] : folds)
    for (std::size_t i = 0; i < r.rows.size(); ++i)
      f << fold << ',' << r.rows[i] << ',' << r.truth[i] << ',' << r.predicted[i] << '\n';
}

inline std::string format_metric(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

// ---------------------------------------------------------------------------
// preprocess

inline int cmd_preprocess(const PreprocessOptions& o, std::ostream& out) {
  Stopwatch clock;
  const auto id = data::parse_dataset_id(o.dataset);
  if (o.inputs.empty()) throw ConfigError("preprocess: no --input files");
  std::vector<fs::path> inputs;
  for (const auto& i : o.inputs) inputs.push_back(resolve_data_path(i));
  std::optional<data::Schema> schema;
  if (!o.schema.empty()) schema = data::parse_schema(data::read_file(o.schema));

  const auto raw = data::parse_csv_files(inputs, id, schema);
  if (raw.rows.empty()) throw DataError("preprocess: no valid records in the input");

  data::PreparedDataset p;
  p.id = id;
  std::vector<std::size_t> labels;
  for (const auto& r : raw.rows) labels.push_back(r.label);
  p.folds = data::make_folds(labels, o.folds, o.seed);
  if (o.strict) {
    const auto train_rows = p.folds.train_indices(0);
    p.encoder = data::fit_encoder(raw, train_rows);
  } else {
    p.encoder = data::fit_encoder(raw);
  }
  p.data = data::apply_encoder(p.encoder, raw);

  const fs::path dir = o.out;
  data::save_prepared(dir, p);

  std::vector<std::uint64_t> histogram(p.data.classes(), 0);
  for (auto l : p.data.labels) ++histogram[l];
  json class_hist = json::object();
  for (std::size_t c = 0; c < histogram.size(); ++c) class_hist[p.data.class_names[c]] = histogram[c];
  json rejects = json::array();
  for (std::size_t i = 0; i < raw.rejects.size() && i < 1000; ++i) {
    const auto& r = raw.rejects[i];
    rejects.push_back({{"source", r.source}, {"line", r.line}, {"column", r.column}, {"value", r.value},
                       {"reason", r.reason}});
  }
  json input_echo = json::array();
  for (const auto& i : inputs) input_echo.push_back({{"path", i.string()}, {"fnv1a64", hex64(data::file_hash(i))}});

  auto meta = data::read_json(dir / "dataset.json");
  meta["rejects"] = raw.rejects.size();
  data::write_json(dir / "dataset.json", meta);

  const json summary = {{"dataset", to_string(id)},
                        {"inputs", input_echo},
                        {"records", p.data.rows()},
                        {"had_header", raw.had_header},
                        {"encoded_width", p.encoder.width},
                        {"numeric_columns", p.encoder.numeric_count()},
                        {"categorical_vocabulary",
                         [&] {
                           json v = json::object();
                           for (const auto& c : p.encoder.columns)
                             if (c.kind == data::ColumnKind::Categorical) v[c.name] = c.vocabulary.size();
                           return v;
                         }()},
                        {"class_histogram", class_hist},
                        {"reject_count", raw.rejects.size()},
                        {"rejects", rejects},
                        {"label_mismatches", raw.label_mismatches},
                        {"unseen_values", p.data.unseen_values},
                        {"encoder_fit", o.strict ? "training folds of fold 0" : "all records"},
                        {"folds", o.folds},
                        {"seed", o.seed},
                        {"seconds", clock.seconds()},
                        {"version", kVersion}};
  data::write_json(dir / "summary.json", summary);

  Manifest manifest(dir);
  manifest.add(dir / "features.bin", "encoded features (N,F) f64");
  manifest.add(dir / "labels.bin", "class index per record");
  manifest.add(dir / "dataset.json", "dataset metadata");
  manifest.add(dir / "encoder.json", "fitted encoder");
  manifest.add(dir / "folds.json", "fold plan");
  manifest.add(dir / "summary.json", "preprocessing summary");
  manifest.write("preprocess");

  out << "dataset        " << to_string(id) << "\n"
      << "records        " << p.data.rows() << "\n"
      << "rejects        " << raw.rejects.size() << "\n"
      << "encoded width  " << p.encoder.width << "\n"
      << "folds          " << o.folds << "\n";
  for (std::size_t c = 0; c < histogram.size(); ++c)
    out << "  " << p.data.class_names[c] << ": " << histogram[c] << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct FoldRun {
  std::size_t fold = 0;
  TrainResult result;
  MetricsReport metrics;
  fs::path history, checkpoint;
  double seconds = 0.0;
  std::size_t train_rows = 0;
};

inline std::string suffix(bool all_folds, std::size_t fold) {
  return all_folds ? "_fold" + std::to_string(fold) : "";
}

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
  Stopwatch clock;
  const auto ws = open_dataset(o.dataset, o.subsample, o.seed);
  const auto& p = ws.prepared;
  const auto net_cfg = network_config(o.net, p.data.width(), p.data.classes(), o.seed);

  TrainConfig tc = default_train_config(p.id);
  if (o.epochs) tc.epochs = *o.epochs;
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch;
  tc.seed = o.seed;
  tc.gradient_clip = o.clip;
  tc.grad_probe = o.grad_probe;

  std::vector<std::size_t> folds;
  if (o.all_folds) {
    for (std::size_t f = 0; f < p.folds.k; ++f) folds.push_back(f);
  } else {
    if (o.fold >= p.folds.k) {
      throw ConfigError("--fold " + std::to_string(o.fold) + " out of range (k=" + std::to_string(p.folds.k) + ")");
    }
    folds.push_back(o.fold);
  }

  { Network probe(net_cfg); }

  const fs::path dir = o.out;
  fs::create_directories(dir);
  Manifest manifest(dir);
  std::vector<FoldRun> runs;
  ConfusionCounts pooled;
  std::vector<std::uint64_t> pooled_hist(p.data.classes(), 0);
  std::vector<std::pair<std::size_t, EvalResult>> dumps;

  for (auto f : folds) {
    Stopwatch fold_clock;
    FoldRun run;
    run.fold = f;
    Network net(net_cfg);
    const auto train_rows = p.folds.train_indices(f);
    const auto test_rows = p.folds.test_indices(f);
    run.train_rows = train_rows.size();
    if (!o.quiet) {
      out << net_cfg.display_name() << " fold " << f << ": " << train_rows.size() << " train / " << test_rows.size()
          << " test, " << tc.epochs << " epochs\n";
    }
    run.result = train(net, p.data, train_rows, test_rows, tc, [&](const EpochRecord& e) {
      if (o.quiet) return;
      char buf[160];
      std::snprintf(buf, sizeof buf, "  epoch %3zu  train_loss %.5f  train_acc %.4f  test_loss %.5f  test_acc %.4f\n",
                    e.epoch, e.train_loss, e.train_acc, e.test_loss, e.test_acc);
      out << buf << std::flush;
    });
    const auto& ev = run.result.final_test;
    run.metrics = evaluate_predictions(ev.predicted, ev.truth, p.data.normal_class, p.data.classes());
    pooled += run.metrics.counts;
    for (std::size_t c = 0; c < pooled_hist.size(); ++c) pooled_hist[c] += run.metrics.predicted_histogram[c];

    run.history = dir / ("history" + suffix(o.all_folds, f) + ".csv");
    {
      std::ofstream h(run.history, std::ios::trunc);
      write_history_csv(h, run.result.history);
    }
    manifest.add(run.history, "training history, fold " + std::to_string(f));
    if (o.grad_probe) {
      const auto g = dir / ("grad_norms" + suffix(o.all_folds, f) + ".csv");
      std::ofstream h(g, std::ios::trunc);
      write_grad_norm_csv(h, run.result.history);
      h.close();
      manifest.add(g, "per-layer gradient norms, fold " + std::to_string(f));
    }
    run.checkpoint = dir / ("checkpoint" + suffix(o.all_folds, f) + ".bin");
    const json extra = {{"fold", f},
                        {"subsample", ws.subsample ? json(*ws.subsample) : json(nullptr)},
                        {"subsample_seed", ws.subsample_seed},
                        {"dataset", to_string(p.id)},
                        {"train", to_json(tc)}};
    save_checkpoint(net, run.checkpoint, extra);
    manifest.add(run.checkpoint, "model checkpoint, fold " + std::to_string(f));
    if (o.dump_predictions) dumps.emplace_back(f, ev);
    run.seconds = fold_clock.seconds();
    if (!o.quiet) {
      out << "  fold " << f << ": ACC " << format_metric(run.metrics.acc) << "  DR " << format_metric(run.metrics.dr)
          << "  FAR " << format_metric(run.metrics.far) << "  TP " << run.metrics.counts.tp << "  FP "
          << run.metrics.counts.fp << "\n";
    }
    runs.push_back(std::move(run));
  }

  if (o.dump_predictions) {
    write_predictions(dir / "predictions.csv", dumps);
    manifest.add(dir / "predictions.csv", "held-out predictions");
  }

  std::vector<MetricsReport> per_fold;
  json fold_json = json::array();
  for (const auto& r : runs) {
    per_fold.push_back(r.metrics);
    const auto& last = r.result.history.epochs;
    fold_json.push_back({{"fold", r.fold},
                         {"train_rows", r.train_rows},
                         {"test_rows", r.result.final_test.rows.size()},
                         {"metrics", to_json(r.metrics)},
                         {"final_train_loss", last.empty() ? json(nullptr) : json(last.back().train_loss)},
                         {"final_test_loss", r.result.final_test.loss},
                         {"parameter_hashes",
                          [&] {
                            json h = json::array();
                            for (const auto& e : last) h.push_back(hex64(e.parameter_hash));
                            return h;
                          }()},
                         {"history", fs::relative(r.history, dir).generic_string()},
                         {"checkpoint", fs::relative(r.checkpoint, dir).generic_string()},
                         {"checkpoint_fnv1a64", hex64(data::file_hash(r.checkpoint))},
                         {"seconds", r.seconds}});
  }
  const auto pooled_metrics = compute_metrics(pooled, pooled_hist);
  const auto avg = fold_average(per_fold);
  const json report = {{"command", "train"},
                       {"version", kVersion},
                       {"network", to_json(net_cfg)},
                       {"network_name", net_cfg.display_name()},
                       {"parameter_layers", 4 * net_cfg.blocks + 1},
                       {"train", to_json(tc)},
                       {"dataset", dataset_echo(ws)},
                       {"folds", fold_json},
                       {"pooled", to_json(pooled_metrics)},
                       {"fold_averaged", {{"acc", optional_json(avg.acc)}, {"dr", optional_json(avg.dr)},
                                          {"far", optional_json(avg.far)}}},
                       {"timings", {{"total_seconds", clock.seconds()}}}};
  data::write_json(dir / "report.json", report);
  manifest.add(dir / "report.json", "run report");
  manifest.write("train");
  if (!o.quiet) {
    out << "pooled: ACC " << format_metric(pooled_metrics.acc) << "  DR " << format_metric(pooled_metrics.dr)
        << "  FAR " << format_metric(pooled_metrics.far) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
  auto ckpt = load_checkpoint(o.checkpoint);
  const auto& extra = ckpt.extra;
  std::optional<std::size_t> subsample;
  std::uint64_t sub_seed = 0;
  if (extra.contains("subsample") && !extra["subsample"].is_null()) {
    subsample = extra["subsample"].get<std::size_t>();
    sub_seed = extra.value("subsample_seed", std::uint64_t{0});
  }
  const auto ws = open_dataset(o.dataset, subsample, sub_seed);
  const auto& p = ws.prepared;
  const auto& cfg = ckpt.network.config();
  if (cfg.features != p.data.width()) {
    throw ConfigError("checkpoint expects " + std::to_string(cfg.features) + " features but the dataset width is " +
                      std::to_string(p.data.width()));
  }
  if (cfg.classes != p.data.classes()) {
    throw ConfigError("checkpoint has " + std::to_string(cfg.classes) + " classes but the dataset has " +
                      std::to_string(p.data.classes()));
  }
  const std::size_t fold = o.fold ? *o.fold : extra.value("fold", std::size_t{0});
  if (fold >= p.folds.k) throw ConfigError("--fold " + std::to_string(fold) + " out of range");
  const auto rows = p.folds.test_indices(fold);
  const auto ev = evaluate(ckpt.network, p.data, rows);
  const auto m = evaluate_predictions(ev.predicted, ev.truth, p.data.normal_class, p.data.classes());

  out << "fold " << fold << " (" << rows.size() << " records): ACC " << format_metric(m.acc) << "  DR "
      << format_metric(m.dr) << "  FAR " << format_metric(m.far) << "  TP " << m.counts.tp << "  FP " << m.counts.fp
      << "  TN " << m.counts.tn << "  FN " << m.counts.fn << "  loss " << format_double(ev.loss) << "\n";
  if (!o.out.empty()) {
    const fs::path dir = o.out;
    fs::create_directories(dir);
    Manifest manifest(dir);
    data::write_json(dir / "metrics.json", {{"command", "eval"},
                                            {"version", kVersion},
                                            {"checkpoint", o.checkpoint},
                                            {"checkpoint_fnv1a64", hex64(data::file_hash(o.checkpoint))},
                                            {"dataset", dataset_echo(ws)},
                                            {"fold", fold},
                                            {"loss", ev.loss},
                                            {"metrics", to_json(m)}});
    manifest.add(dir / "metrics.json", "evaluation metrics");
    if (o.dump_predictions) {
      write_predictions(dir / "predictions.csv", {{fold, ev}});
      manifest.add(dir / "predictions.csv", "held-out predictions");
    }
    manifest.write("eval");
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// compare

inline int cmd_compare(const CompareOptions& o, std::ostream& out) {
  Stopwatch clock;
  std::vector<std::string> tokens;
  {
    std::stringstream ss(o.archs);
    for (std::string t; std::getline(ss, t, ',');)
      if (!data::trim(t).empty()) tokens.push_back(data::trim(t));
  }
  if (tokens.empty()) throw ConfigError("--archs is empty");
  std::vector<NetworkOptions> archs;
  for (const auto& t : tokens) archs.push_back(parse_arch_token(t));

  const auto ws = open_dataset(o.dataset, o.subsample, o.seed);
  const auto& p = ws.prepared;
  if (o.fold >= p.folds.k) throw ConfigError("--fold " + std::to_string(o.fold) + " out of range");
  TrainConfig tc = default_train_config(p.id);
  if (o.epochs) tc.epochs = *o.epochs;
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch;
  tc.seed = o.seed;
  const auto train_rows = p.folds.train_indices(o.fold);
  const auto test_rows = p.folds.test_indices(o.fold);

  const fs::path dir = o.out;
  fs::create_directories(dir);
  std::ostringstream curves, table;
  curves << "arch,epoch,train_loss,train_acc,test_loss,test_acc\n";
  table << "arch,parameter_layers,tp,fp,tn,fn,dr,acc,far,final_train_loss,final_test_loss\n";
  json rows = json::array();
  auto opt_csv = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };

  for (std::size_t a = 0; a < archs.size(); ++a) {
    Stopwatch arch_clock;
    const auto cfg = network_config(archs[a], p.data.width(), p.data.classes(), o.seed);
    Network net(cfg);
    if (!o.quiet) out << tokens[a] << " (" << cfg.display_name() << ")\n" << std::flush;
    auto res = train(net, p.data, train_rows, test_rows, tc, [&](const EpochRecord& e) {
      if (o.quiet) return;
      char buf[128];
      std::snprintf(buf, sizeof buf, "  epoch %3zu  train_loss %.5f  test_loss %.5f\n", e.epoch, e.train_loss,
                    e.test_loss);
      out << buf << std::flush;
    });
    for (const auto& e : res.history.epochs) {
      curves << tokens[a] << ',' << e.epoch << ',' << format_double(e.train_loss) << ','
             << format_double(e.train_acc) << ',' << format_double(e.test_loss) << ',' << format_double(e.test_acc)
             << '\n';
    }
    const auto& ev = res.final_test;
    const auto m = evaluate_predictions(ev.predicted, ev.truth, p.data.normal_class, p.data.classes());
    const double final_train = res.history.epochs.empty() ? 0.0 : res.history.epochs.back().train_loss;
    table << tokens[a] << ',' << 4 * cfg.blocks + 1 << ',' << m.counts.tp << ',' << m.counts.fp << ','
          << m.counts.tn << ',' << m.counts.fn << ',' << opt_csv(m.dr) << ',' << opt_csv(m.acc) << ','
          << opt_csv(m.far) << ',' << format_double(final_train) << ',' << format_double(ev.loss) << '\n';
    rows.push_back({{"arch", tokens[a]},
                    {"network", to_json(cfg)},
                    {"metrics", to_json(m)},
                    {"final_train_loss", final_train},
                    {"final_test_loss", ev.loss},
                    {"seconds", arch_clock.seconds()}});
  }
  write_text(dir / "loss_curves.csv", curves.str());
  write_text(dir / "comparison.csv", table.str());
  data::write_json(dir / "report.json", {{"command", "compare"},
                                         {"version", kVersion},
                                         {"train", to_json(tc)},
                                         {"fold", o.fold},
                                         {"dataset", dataset_echo(ws)},
                                         {"archs", rows},
                                         {"timings", {{"total_seconds", clock.seconds()}}}});
  Manifest manifest(dir);
  manifest.add(dir / "loss_curves.csv", "per-epoch loss curves");
  manifest.add(dir / "comparison.csv", "comparison table");
  manifest.add(dir / "report.json", "run report");
  manifest.write("compare");
  out << table.str();
  return kOk;
}

// ---------------------------------------------------------------------------
// synth

inline int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const auto id = data::parse_dataset_id(o.dataset);
  data::SyntheticGenerator gen(id);
  if (o.out.empty() || o.out == "-") {
    gen.write_csv(out, o.rows, o.seed, !o.no_header);
    return kOk;
  }
  std::ofstream f(o.out, std::ios::trunc);
  if (!f) throw DataError("cannot write " + o.out);
  gen.write_csv(f, o.rows, o.seed, !o.no_header);
  return kOk;
}

// ---------------------------------------------------------------------------
// Argument parsing

/// Reads a flat key=value file; '#' starts a comment.
inline std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = data::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = data::trim(t.substr(0, eq));
    for (auto& c : key)
      if (c == '_') c = '-';
    out[key] = data::trim(t.substr(eq + 1));
  }
  return out;
}

/// Merges config-file entries into argv; explicit flags win.
inline std::vector<std::string> apply_config(std::vector<std::string> args, CLI::App& sub) {
  auto it = std::find_if(args.begin(), args.end(), [](const std::string& a) {
    return a == "--config" || a.rfind("--config=", 0) == 0;
  });
  if (it == args.end()) return args;
  std::string path;
  if (*it == "--config") {
    if (it + 1 == args.end()) throw ConfigError("--config needs a file");
    path = *(it + 1);
    args.erase(it, it + 2);
  } else {
    path = it->substr(9);
    args.erase(it);
  }
  const auto entries = read_config_file(path);
  auto given = [&](const std::string& key) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == "--" + key || a.rfind("--" + key + "=", 0) == 0;
    });
  };
  for (const auto& [key, value] : entries) {
    if (given(key)) continue;
    const CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) throw ConfigError("config file key '" + key + "' is not an option of '" + sub.get_name() + "'");
    if (opt->get_type_size() == 0) {
      const std::string v = data::lower(value);
      if (v == "true" || v == "1" || v == "yes" || v == "on") args.push_back("--" + key);
      else if (!(v == "false" || v == "0" || v == "no" || v == "off"))
        throw ConfigError("config file key '" + key + "' expects true/false");
    } else {
      args.push_back("--" + key + "=" + value);
    }
  }
  return args;
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return kUsage;
  if (dynamic_cast<const DataError*>(&e)) return kData;
  if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kData;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kData;
  return kInternal;
}

/// Full command line entry point; args[0] is the program name. Returns the exit code.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Residual CNN+GRU intrusion detection: preprocessing, training and evaluation"};
  app.name("pelican");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  PreprocessOptions pre;
  auto* sp = app.add_subcommand("preprocess", "Encode raw CSV files into tensors, encoder and fold plan");
  sp->add_option("--dataset", pre.dataset, "nslkdd or unswnb15")->required();
  sp->add_option("--input", pre.inputs, "CSV files (concatenated in order)")->required();
  sp->add_option("--out", pre.out, "Output directory")->required();
  sp->add_option("--schema", pre.schema, "Column layout override (name:kind per line)");
  sp->add_option("--folds", pre.folds, "k for cross-validation")->capture_default_str();
  sp->add_option("--seed", pre.seed, "Fold seed")->capture_default_str();
  sp->add_flag("--strict", pre.strict, "Fit the encoder on fold 0's training records only");

  TrainOptions tr;
  auto* st = app.add_subcommand("train", "Train one network on a preprocessed dataset");
  st->add_option("--arch", tr.net.arch, "plain or residual")->capture_default_str();
  st->add_option("--blocks", tr.net.blocks, "Number of blocks (parameter layers = 4 * blocks + 1)")
      ->capture_default_str();
  st->add_option("--dataset", tr.dataset, "Preprocessed dataset directory")->required();
  st->add_option("--out", tr.out, "Output directory")->required();
  st->add_option("--epochs", tr.epochs, "Epochs (default 50 NSL-KDD, 100 UNSW-NB15)");
  st->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
  st->add_option("--batch", tr.batch, "Batch size")->capture_default_str();
  st->add_option("--seed", tr.seed, "Seed for initialization, shuffling and dropout")->capture_default_str();
  st->add_option("--clip", tr.clip, "Clip the global gradient L2 norm");
  st->add_flag("--grad-probe", tr.grad_probe, "Record per-layer gradient norms every step");
  st->add_option("--fold", tr.fold, "Held-out fold")->capture_default_str();
  st->add_flag("--all-folds", tr.all_folds, "Train every fold rotation");
  st->add_option("--subsample", tr.subsample, "Stratified subsample size");
  st->add_flag("--dump-predictions", tr.dump_predictions, "Write held-out predictions");
  st->add_option("--layout", tr.net.layout, "flat (1,F) or sequence (F,1)")->capture_default_str();
  st->add_option("--kernel", tr.net.kernel, "Conv kernel size")->capture_default_str();
  st->add_option("--dropout", tr.net.dropout, "Dropout rate")->capture_default_str();
  st->add_option("--shortcut", tr.net.shortcut, "Shortcut source: bn1 or bn2")->capture_default_str();
  st->add_flag("--add-after-dropout", tr.net.add_after_dropout, "Add the shortcut after dropout");
  st->add_flag("--quiet", tr.quiet, "Only write files");

  EvalOptions ev;
  auto* se = app.add_subcommand("eval", "Evaluate a checkpoint on a held-out fold");
  se->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  se->add_option("--dataset", ev.dataset, "Preprocessed dataset directory")->required();
  se->add_option("--fold", ev.fold, "Fold (default: the fold the checkpoint was trained for)");
  se->add_option("--out", ev.out, "Output directory for metrics.json");
  se->add_flag("--dump-predictions", ev.dump_predictions, "Write predictions.csv under --out");

  CompareOptions cmp;
  auto* sc = app.add_subcommand("compare", "Train several networks with a shared seed and compare them");
  sc->add_option("--dataset", cmp.dataset, "Preprocessed dataset directory")->required();
  sc->add_option("--out", cmp.out, "Output directory")->required();
  sc->add_option("--archs", cmp.archs, "Comma-separated arch tokens")->capture_default_str();
  sc->add_option("--subsample", cmp.subsample, "Stratified subsample size");
  sc->add_option("--epochs", cmp.epochs, "Epochs (default 50 NSL-KDD, 100 UNSW-NB15)");
  sc->add_option("--batch", cmp.batch, "Batch size")->capture_default_str();
  sc->add_option("--lr", cmp.lr, "Learning rate")->capture_default_str();
  sc->add_option("--seed", cmp.seed, "Shared seed")->capture_default_str();
  sc->add_option("--fold", cmp.fold, "Held-out fold")->capture_default_str();
  sc->add_flag("--quiet", cmp.quiet, "Only print the final table");

  SynthOptions sy;
  auto* ss = app.add_subcommand("synth", "Write schema-conformant synthetic records");
  ss->add_option("--dataset", sy.dataset, "nslkdd or unswnb15")->required();
  ss->add_option("--rows", sy.rows, "Record count")->capture_default_str();
  ss->add_option("--seed", sy.seed, "Sample seed")->capture_default_str();
  ss->add_option("--out", sy.out, "Output CSV (stdout when omitted)");
  ss->add_flag("--no-header", sy.no_header, "Omit the header row");

  std::string config_file;
  for (auto* sub : {sp, st, se, sc, ss}) sub->add_option("--config", config_file, "key=value file; explicit flags win");

  try {
    if (args.size() > 1) {
      for (auto* sub : {sp, st, se, sc, ss}) {
        if (args[1] == sub->get_name()) {
          args = apply_config(args, *sub);
          break;
        }
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }

  try {
    if (sp->parsed()) return cmd_preprocess(pre, out);
    if (st->parsed()) return cmd_train(tr, out);
    if (se->parsed()) return cmd_eval(ev, out);
    if (sc->parsed()) return cmd_compare(cmp, out);
    if (ss->parsed()) return cmd_synth(sy, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUsage;
}

}  // namespace pelican::cli

namespace pelican::cli {

inline int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace pelican::cli
