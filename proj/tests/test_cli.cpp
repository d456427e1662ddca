#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"

using namespace pelican;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "pelican");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return data::read_file(p); }

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  const auto header = data::split_csv_line(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    const auto f = data::split_csv_line(line);
    std::map<std::string, std::string> r;
    for (std::size_t i = 0; i < header.size(); ++i) r[header[i]] = f.at(i);
    rows.push_back(r);
  }
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("pelican_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    ASSERT_EQ(run({"synth", "--dataset", "nslkdd", "--rows", "240", "--seed", "5", "--out", csv().string()}).code, 0);
    const auto r = run({"preprocess", "--dataset", "nslkdd", "--input", csv().string(), "--out", prepared().string(),
                        "--folds", "4", "--seed", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static fs::path csv() { return root_ / "synth.csv"; }
  static fs::path prepared() { return root_ / "prepared"; }
  static fs::path dir(const std::string& name) { return root_ / name; }

  static std::vector<std::string> train_args(const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"train",   "--dataset", prepared().string(), "--out", dir(out).string(), "--blocks",
                               "1",       "--epochs",  "2",                 "--batch", "32",          "--seed",
                               "9",       "--quiet"};
    for (std::size_t i = 0; i < extra.size(); ++i) {
      const auto it = std::find(a.begin(), a.end(), extra[i]);
      const bool has_value = i + 1 < extra.size() && extra[i + 1].rfind("--", 0) != 0;
      if (it != a.end() && has_value) {
        *(it + 1) = extra[++i];
      } else {
        a.push_back(extra[i]);
        if (has_value) a.push_back(extra[++i]);
      }
    }
    return a;
  }

  static inline fs::path root_;
};

}  // namespace

TEST_F(CliTest, PreprocessSummary) {
  const auto s = data::read_json(prepared() / "summary.json");
  EXPECT_EQ(s.at("records"), 240);
  EXPECT_EQ(s.at("encoded_width"), 122);
  EXPECT_EQ(s.at("reject_count"), 0);
  EXPECT_TRUE(fs::exists(prepared() / "manifest.json"));
  const auto p = data::load_prepared(prepared());
  EXPECT_EQ(p.folds.k, 4u);
  EXPECT_EQ(p.data.width(), 122u);
}

TEST_F(CliTest, TrainWritesArtifactsAndEvalMatchesFinalEpoch) {
  const auto r = run(train_args("t1", {"--dump-predictions", "--grad-probe"}));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"checkpoint.bin", "history.csv", "grad_norms.csv", "predictions.csv", "report.json",
                        "manifest.json"})
    EXPECT_TRUE(fs::exists(dir("t1") / f)) << f;
  const auto history = read_csv(dir("t1") / "history.csv");
  ASSERT_EQ(history.size(), 2u);
  const auto report = data::read_json(dir("t1") / "report.json");
  EXPECT_EQ(report.at("network_name"), "Residual-5");
  EXPECT_EQ(report.at("parameter_layers"), 5);

  const auto e = run({"eval", "--checkpoint", (dir("t1") / "checkpoint.bin").string(), "--dataset",
                      prepared().string(), "--out", dir("e1").string(), "--dump-predictions"});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto m = data::read_json(dir("e1") / "metrics.json");
  EXPECT_EQ(m.at("loss").get<double>(), std::stod(history.back().at("test_loss")));
  EXPECT_EQ(m.at("metrics"), report.at("folds").at(0).at("metrics"));
  EXPECT_EQ(slurp(dir("e1") / "predictions.csv"), slurp(dir("t1") / "predictions.csv"));
}

TEST_F(CliTest, PredictionDumpRecomputesReportedMetrics) {
  ASSERT_EQ(run(train_args("t2", {"--dump-predictions", "--all-folds"})).code, 0);
  const auto rows = read_csv(dir("t2") / "predictions.csv");
  EXPECT_EQ(rows.size(), 240u);
  std::vector<std::size_t> pred, truth;
  for (const auto& r : rows) {
    pred.push_back(std::stoul(r.at("predicted")));
    truth.push_back(std::stoul(r.at("truth")));
  }
  const auto report = data::read_json(dir("t2") / "report.json");
  const auto pooled = to_json(compute_metrics(confusion(pred, truth, 0)));
  for (const char* k : {"tp", "tn", "fp", "fn", "acc"}) EXPECT_EQ(report.at("pooled").at(k), pooled.at(k)) << k;
  EXPECT_EQ(report.at("folds").size(), 4u);
  for (int f = 0; f < 4; ++f) EXPECT_TRUE(fs::exists(dir("t2") / ("checkpoint_fold" + std::to_string(f) + ".bin")));
}

TEST_F(CliTest, TrainingIsDeterministic) {
  ASSERT_EQ(run(train_args("d1")).code, 0);
  ASSERT_EQ(run(train_args("d2")).code, 0);
  EXPECT_EQ(slurp(dir("d1") / "history.csv"), slurp(dir("d2") / "history.csv"));
  EXPECT_EQ(slurp(dir("d1") / "checkpoint.bin"), slurp(dir("d2") / "checkpoint.bin"));
  ASSERT_EQ(run(train_args("d3", {"--seed", "10"})).code, 0);
  EXPECT_NE(slurp(dir("d1") / "checkpoint.bin"), slurp(dir("d3") / "checkpoint.bin"));
}

TEST_F(CliTest, ZeroLearningRateKeepsParameterHashFlat) {
  ASSERT_EQ(run(train_args("lr0", {"--lr", "0"})).code, 0);
  const auto hashes = data::read_json(dir("lr0") / "report.json").at("folds").at(0).at("parameter_hashes");
  ASSERT_EQ(hashes.size(), 2u);
  EXPECT_EQ(hashes[0], hashes[1]);
}

TEST_F(CliTest, CheckpointRoundTripReproducesMetrics) {
  ASSERT_EQ(run(train_args("rt", {"--arch", "plain"})).code, 0);
  for (int i = 0; i < 2; ++i) {
    const auto e = run({"eval", "--checkpoint", (dir("rt") / "checkpoint.bin").string(), "--dataset",
                        prepared().string(), "--out", dir("rt_e" + std::to_string(i)).string()});
    ASSERT_EQ(e.code, 0) << e.err;
  }
  EXPECT_EQ(data::read_json(dir("rt_e0") / "metrics.json").at("metrics"),
            data::read_json(dir("rt_e1") / "metrics.json").at("metrics"));
}

TEST_F(CliTest, OverfitsSmallSubsample) {
  const auto r = run(train_args("fit", {"--subsample", "40", "--epochs", "150", "--batch", "40", "--dropout", "0",
                                        "--lr", "0.003", "--fold", "1"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto history = read_csv(dir("fit") / "history.csv");
  EXPECT_GE(std::stod(history.back().at("train_acc")), 0.99);
  const auto ckpt = load_checkpoint(dir("fit") / "checkpoint.bin");
  EXPECT_EQ(ckpt.extra.at("subsample"), 40);
  EXPECT_EQ(ckpt.extra.at("fold"), 1);
  const auto e = run({"eval", "--checkpoint", (dir("fit") / "checkpoint.bin").string(), "--dataset",
                      prepared().string(), "--out", dir("fit_e").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(data::read_json(dir("fit_e") / "metrics.json").at("loss").get<double>(),
            std::stod(history.back().at("test_loss")));
}

TEST_F(CliTest, CompareWritesCurvesAndTable) {
  const auto r = run({"compare", "--dataset", prepared().string(), "--out", dir("cmp").string(), "--archs",
                      "plain5,res5,plain9", "--epochs", "2", "--batch", "64", "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto curves = read_csv(dir("cmp") / "loss_curves.csv");
  EXPECT_EQ(curves.size(), 3u * 2u);
  const auto table = read_csv(dir("cmp") / "comparison.csv");
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[2].at("arch"), "plain9");
  EXPECT_EQ(table[2].at("parameter_layers"), "9");
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"train", "--bogus"}).code, 2);
  EXPECT_EQ(run(train_args("bad_arch", {"--arch", "wide"})).code, 2);
  EXPECT_EQ(run({"compare", "--dataset", prepared().string(), "--out", dir("x").string(), "--archs", "res22"}).code,
            2);
  EXPECT_EQ(run(train_args("bad_fold", {"--fold", "9"})).code, 2);
  EXPECT_EQ(run({"train", "--dataset", dir("missing").string(), "--out", dir("x").string()}).code, 3);
  EXPECT_EQ(run({"eval", "--checkpoint", dir("missing.bin").string(), "--dataset", prepared().string()}).code, 3);

  const auto bad_csv = dir("bad.csv");
  std::ofstream(bad_csv) << "1,2,3\n";
  EXPECT_EQ(run({"preprocess", "--dataset", "nslkdd", "--input", bad_csv.string(), "--out", dir("bad").string()}).code,
            3);

  // Huge learning rates diverge; non-finite loss or gradients exit with 4.
  const auto r = run(train_args("nan", {"--lr", "1e300", "--epochs", "3", "--dropout", "0"}));
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST_F(CliTest, EvalRejectsWidthMismatch) {
  ASSERT_EQ(run(train_args("w")).code, 0);
  const auto ucsv = dir("unsw.csv");
  ASSERT_EQ(run({"synth", "--dataset", "unswnb15", "--rows", "400", "--out", ucsv.string()}).code, 0);
  ASSERT_EQ(run({"preprocess", "--dataset", "unswnb15", "--input", ucsv.string(), "--out", dir("uprep").string(),
                 "--folds", "2"})
                .code,
            0);
  const auto e = run({"eval", "--checkpoint", (dir("w") / "checkpoint.bin").string(), "--dataset",
                      dir("uprep").string()});
  EXPECT_EQ(e.code, 2);
  EXPECT_NE(e.err.find("122"), std::string::npos) << e.err;
  EXPECT_NE(e.err.find("196"), std::string::npos) << e.err;
}

TEST_F(CliTest, ConfigFileDefaultsYieldToFlags) {
  const auto cfg = dir("run.cfg");
  std::ofstream(cfg) << "# shared settings\nepochs = 1\nbatch=32\nseed=9\nquiet=true\narch=plain\n";
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--dataset", prepared().string(), "--out", dir("c1").string(),
                 "--blocks", "1", "--arch", "residual"})
                .code,
            0);
  const auto rep = data::read_json(dir("c1") / "report.json");
  EXPECT_EQ(rep.at("train").at("epochs"), 1);
  EXPECT_EQ(rep.at("network_name"), "Residual-5");
  std::ofstream(dir("bad.cfg")) << "nonsense=1\n";
  EXPECT_EQ(run({"train", "--config", dir("bad.cfg").string(), "--dataset", prepared().string(), "--out",
                 dir("c2").string()})
                .code,
            2);
}

TEST_F(CliTest, DataRootEnvironmentResolvesRelativeDataset) {
  ::setenv(cli::kDataRootEnv, root_.c_str(), 1);
  const auto r = run(train_args("env"));
  std::vector<std::string> args{"eval", "--checkpoint", (dir("env") / "checkpoint.bin").string(), "--dataset",
                                "prepared"};
  const auto e = run(args);
  ::unsetenv(cli::kDataRootEnv);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(e.code, 0) << e.err;
}

TEST_F(CliTest, SynthIsDeterministic) {
  const auto a = run({"synth", "--dataset", "unswnb15", "--rows", "20", "--seed", "3"});
  const auto b = run({"synth", "--dataset", "unswnb15", "--rows", "20", "--seed", "3"});
  EXPECT_EQ(a.out, b.out);
  const auto c = run({"synth", "--dataset", "unswnb15", "--rows", "20", "--seed", "3", "--no-header"});
  EXPECT_EQ(std::count(c.out.begin(), c.out.end(), '\n'), 20);
}
