#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "support/oracles.hpp"

using namespace pelican;
using namespace pelican::data;

namespace {

const char* kTinySchema =
    "# toy layout\n"
    "dur:numeric\n"
    "proto:categorical\n"
    "bytes:numeric\n"
    "class:label\n";

Schema tiny() { return parse_schema(kTinySchema); }

std::vector<std::size_t> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<std::size_t> v(n);
  for (auto& x : v) x = rng.below(classes);
  return v;
}

struct RandomTable {
  Schema schema;
  std::vector<std::vector<std::string>> rows;
  std::string csv;
};

// Random schema with numeric/categorical columns and NSL-KDD style labels.
RandomTable random_table(Rng& rng) {
  std::vector<Column> cols;
  const std::size_t ncols = 1 + rng.below(8);
  std::vector<std::size_t> vocab;
  for (std::size_t c = 0; c < ncols; ++c) {
    const bool cat = rng.uniform() < 0.5;
    cols.push_back({"c" + std::to_string(c), cat ? ColumnKind::Categorical : ColumnKind::Numeric});
    vocab.push_back(cat ? 1 + rng.below(12) : 0);
  }
  cols.push_back({"label", ColumnKind::Label});
  RandomTable t{Schema(cols), {}, {}};
  const std::size_t n = 5 + rng.below(60);
  const char* labels[] = {"normal", "neptune", "satan", "guess_passwd", "rootkit"};
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::string> row;
    for (std::size_t c = 0; c < ncols; ++c) {
      if (vocab[c]) row.push_back("v" + std::to_string(rng.below(vocab[c])));
      else row.push_back(std::to_string(rng.uniform(-50, 50)));
    }
    row.push_back(labels[rng.below(5)]);
    for (std::size_t c = 0; c < row.size(); ++c) t.csv += (c ? "," : "") + row[c];
    t.csv += "\n";
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

// ---- schema and parsing

TEST(Schema, BuiltinFeatureCounts) {
  for (auto id : {DatasetId::NslKdd, DatasetId::UnswNb15}) {
    const auto s = builtin_schema(id);
    EXPECT_EQ(s.count(ColumnKind::Numeric) + s.count(ColumnKind::Categorical), original_feature_count(id));
    EXPECT_EQ(s.count(ColumnKind::Categorical), 3u);
    EXPECT_EQ(s.count(ColumnKind::Label), 1u);
  }
  EXPECT_EQ(class_names(DatasetId::NslKdd).size(), 5u);
  EXPECT_EQ(class_names(DatasetId::UnswNb15).size(), 10u);
}

TEST(Schema, ParseOverrideFile) {
  const auto s = tiny();
  EXPECT_EQ(s.size(), 4u);
  EXPECT_EQ(s.columns()[1].kind, ColumnKind::Categorical);
  EXPECT_THROW(parse_schema("a:numeric\nb:numeric\n"), ConfigError);
  EXPECT_THROW(parse_schema("a:numeric\nb:weird\nc:label\n"), ConfigError);
  EXPECT_THROW(parse_schema("a numeric\nc:label\n"), ConfigError);
}

TEST(Labels, Mapping) {
  EXPECT_EQ(map_label(DatasetId::NslKdd, "neptune"), 1u);
  EXPECT_EQ(map_label(DatasetId::NslKdd, "smurf."), 1u);
  EXPECT_EQ(map_label(DatasetId::NslKdd, "Normal"), 0u);
  EXPECT_EQ(map_label(DatasetId::NslKdd, "ipsweep"), 2u);
  EXPECT_EQ(map_label(DatasetId::NslKdd, "rootkit"), 4u);
  EXPECT_FALSE(map_label(DatasetId::NslKdd, "mystery").has_value());
  EXPECT_EQ(map_label(DatasetId::UnswNb15, ""), 0u);
  EXPECT_EQ(map_label(DatasetId::UnswNb15, " Fuzzers "), 9u);
  EXPECT_EQ(map_label(DatasetId::UnswNb15, "Backdoors"), 6u);
}

TEST(Csv, ThreeRowFile) {
  const auto raw = parse_csv_text("1,tcp,10,normal\n2,udp,20,neptune\n3,tcp,30,satan\n", DatasetId::NslKdd, tiny());
  ASSERT_EQ(raw.rows.size(), 3u);
  EXPECT_EQ(raw.rows[1].numeric, (std::vector<double>{2, 20}));
  EXPECT_EQ(raw.rows[1].categorical, (std::vector<std::string>{"udp"}));
  EXPECT_EQ(raw.rows[2].label, 2u);
  EXPECT_TRUE(raw.rejects.empty());
  EXPECT_FALSE(raw.had_header);
}

TEST(Csv, HeaderAutoDetected) {
  const auto raw = parse_csv_text("dur,proto,bytes,class\n1,tcp,10,normal\n", DatasetId::NslKdd, tiny());
  EXPECT_TRUE(raw.had_header);
  EXPECT_EQ(raw.rows.size(), 1u);
}

TEST(Csv, BadNumberGoesToRejects) {
  const auto raw = parse_csv_text("1,tcp,10,normal\n2,udp,2x0,neptune\n3,tcp,30,satan\n", DatasetId::NslKdd, tiny());
  EXPECT_EQ(raw.rows.size(), 2u);
  ASSERT_EQ(raw.rejects.size(), 1u);
  EXPECT_EQ(raw.rejects[0].line, 2u);
  EXPECT_EQ(raw.rejects[0].column, "bytes");
  EXPECT_EQ(raw.rejects[0].value, "2x0");
}

TEST(Csv, UnknownLabelGoesToRejects) {
  const auto raw = parse_csv_text("1,tcp,10,normal\n2,udp,20,alien\n", DatasetId::NslKdd, tiny());
  EXPECT_EQ(raw.rows.size(), 1u);
  ASSERT_EQ(raw.rejects.size(), 1u);
  EXPECT_EQ(raw.rejects[0].column, "class");
}

TEST(Csv, ColumnCountMismatchIsFatal) {
  try {
    parse_csv_text("1,tcp,10,normal\n2,udp,normal\n", DatasetId::NslKdd, tiny());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Csv, QuotedFieldsAndCarriageReturns) {
  const auto f = split_csv_line("a,\"b,c\", d ");
  EXPECT_EQ(f, (std::vector<std::string>{"a", "b,c", "d"}));
  const auto raw = parse_csv_text("1,tcp,10,normal\r\n", DatasetId::NslKdd, tiny());
  EXPECT_EQ(raw.rows.size(), 1u);
}

TEST(Csv, NslKddDifficultyColumnOptional) {
  SyntheticGenerator gen(DatasetId::NslKdd);
  std::ostringstream with;
  gen.write_csv(with, 5, 1, false);
  std::string without;
  std::istringstream in(with.str());
  for (std::string line; std::getline(in, line);) without += line.substr(0, line.rfind(',')) + "\n";
  EXPECT_EQ(parse_csv_text(with.str(), DatasetId::NslKdd).rows.size(), 5u);
  EXPECT_EQ(parse_csv_text(without, DatasetId::NslKdd).rows.size(), 5u);
}

TEST(Csv, UnswBinaryLabelCrossCheck) {
  SyntheticGenerator gen(DatasetId::UnswNb15);
  std::ostringstream os;
  gen.write_csv(os, 50, 3, true);
  const auto raw = parse_csv_text(os.str(), DatasetId::UnswNb15);
  EXPECT_TRUE(raw.had_header);
  EXPECT_EQ(raw.rows.size(), 50u);
  EXPECT_EQ(raw.label_mismatches, 0u);
}

// ---- encoder

TEST(Encoder, OneHotSortedVocabulary) {
  const auto schema = parse_schema("kind:categorical\nclass:label\n");
  const auto raw = parse_csv_text("b,normal\na,neptune\nb,normal\n", DatasetId::NslKdd, schema);
  const auto model = fit_encoder(raw);
  ASSERT_EQ(model.width, 2u);
  EXPECT_EQ(model.columns[0].vocabulary, (std::vector<std::string>{"a", "b"}));
  const auto enc = apply_encoder(model, raw);
  // Unscaled indicators are [0,1],[1,0],[0,1]; recover them from z-scores.
  const double expect[3][2] = {{0, 1}, {1, 0}, {0, 1}};
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(unscale(model, c, enc.features.at(r, c)), expect[r][c], 1e-12);
}

TEST(Encoder, SpecValuesABA) {
  const auto schema = parse_schema("kind:categorical\nclass:label\n");
  const auto raw = parse_csv_text("a,normal\nb,normal\na,normal\n", DatasetId::NslKdd, schema);
  const auto model = fit_encoder(raw);
  EXPECT_EQ(model.columns[0].vocabulary, (std::vector<std::string>{"a", "b"}));
  const auto enc = apply_encoder(model, raw);
  const double expect[3][2] = {{1, 0}, {0, 1}, {1, 0}};
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(unscale(model, c, enc.features.at(r, c)), expect[r][c], 1e-12);
}

TEST(Encoder, WidthMatchesAnalyticFormulaOnRandomSchemas) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto t = random_table(rng);
    const auto raw = parse_csv_text(t.csv, DatasetId::NslKdd, t.schema);
    const auto model = fit_encoder(raw);
    EXPECT_EQ(model.width, oracle::analytic_width(t.schema, t.rows)) << "seed " << seed;
    EXPECT_EQ(apply_encoder(model, raw).width(), model.width);
  }
}

TEST(Encoder, StandardizedColumnsAndUnscale) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto t = random_table(rng);
    const auto raw = parse_csv_text(t.csv, DatasetId::NslKdd, t.schema);
    const auto model = fit_encoder(raw);
    const auto enc = apply_encoder(model, raw);
    const std::size_t n = enc.rows();
    for (std::size_t c = 0; c < enc.width(); ++c) {
      double m = 0, v = 0;
      for (std::size_t r = 0; r < n; ++r) m += enc.features.at(r, c);
      m /= static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) v += (enc.features.at(r, c) - m) * (enc.features.at(r, c) - m);
      const double sd = std::sqrt(v / static_cast<double>(n));
      EXPECT_NEAR(m, 0.0, 1e-9);
      bool constant = true;
      for (const auto& col : model.columns)
        if (c >= col.offset && c < col.offset + col.width()) constant = col.stddev[c - col.offset] == 0.0;
      if (constant) EXPECT_EQ(sd, 0.0);
      else EXPECT_NEAR(sd, 1.0, 1e-9);
    }
    // Numeric columns recover the raw value.
    for (const auto& col : model.columns) {
      if (col.kind != ColumnKind::Numeric) continue;
      for (std::size_t r = 0; r < n; ++r)
        EXPECT_NEAR(unscale(model, col.offset, enc.features.at(r, col.offset)), raw.rows[r].numeric[col.source], 1e-9);
    }
  }
}

TEST(Encoder, ApplyTwiceIsIdentical) {
  Rng rng(4);
  const auto t = random_table(rng);
  const auto raw = parse_csv_text(t.csv, DatasetId::NslKdd, t.schema);
  const auto model = fit_encoder(raw);
  EXPECT_EQ(apply_encoder(model, raw).features, apply_encoder(model, raw).features);
}

TEST(Encoder, UnseenValueCountedNotFatal) {
  const auto schema = parse_schema("kind:categorical\nx:numeric\nclass:label\n");
  const auto train = parse_csv_text("a,1,normal\nb,2,neptune\n", DatasetId::NslKdd, schema);
  const auto test = parse_csv_text("c,1,normal\na,3,normal\n", DatasetId::NslKdd, schema);
  const auto model = fit_encoder(train);
  const auto enc = apply_encoder(model, test);
  EXPECT_EQ(enc.unseen_values, 1u);
  EXPECT_NEAR(unscale(model, 0, enc.features.at(0, 0)), 0.0, 1e-12);
  EXPECT_NEAR(unscale(model, 1, enc.features.at(0, 1)), 0.0, 1e-12);
}

TEST(Encoder, StrictModeFitsOnTrainingRowsOnly) {
  const auto schema = parse_schema("kind:categorical\nx:numeric\nclass:label\n");
  const auto raw = parse_csv_text("a,1,normal\nb,3,neptune\nc,100,normal\n", DatasetId::NslKdd, schema);
  const std::vector<std::size_t> train_rows{0, 1};
  const auto model = fit_encoder(raw, train_rows);
  EXPECT_EQ(model.columns[0].vocabulary.size(), 2u);
  EXPECT_DOUBLE_EQ(model.columns[1].mean[0], 2.0);
  EXPECT_EQ(model.fitted_rows, 2u);
}

TEST(Encoder, JsonRoundTrip) {
  Rng rng(8);
  const auto t = random_table(rng);
  const auto raw = parse_csv_text(t.csv, DatasetId::NslKdd, t.schema);
  const auto model = fit_encoder(raw);
  const auto back = encoder_from_json(nlohmann::json::parse(to_json(model).dump()));
  EXPECT_EQ(apply_encoder(back, raw).features, apply_encoder(model, raw).features);
}

TEST(Encoder, BuiltinSchemaWidthsOnSyntheticData) {
  // Every vocabulary entry appears once the sample covers the largest vocabulary.
  const auto unsw = SyntheticGenerator(DatasetId::UnswNb15);
  std::ostringstream u;
  unsw.write_csv(u, 400, 1, true);
  const auto ru = parse_csv_text(u.str(), DatasetId::UnswNb15);
  EXPECT_EQ(fit_encoder(ru).width, 196u);

  const auto nsl = SyntheticGenerator(DatasetId::NslKdd);
  std::ostringstream n;
  nsl.write_csv(n, 400, 1, false);
  const auto rn = parse_csv_text(n.str(), DatasetId::NslKdd);
  EXPECT_EQ(fit_encoder(rn).width, 38u + 3u + 70u + 11u);
}

TEST(Synthetic, DeterministicAndSchemaConformant) {
  SyntheticGenerator gen(DatasetId::NslKdd);
  std::ostringstream a, b;
  gen.write_csv(a, 100, 5, true);
  gen.write_csv(b, 100, 5, true);
  EXPECT_EQ(a.str(), b.str());
  const auto raw = parse_csv_text(a.str(), DatasetId::NslKdd);
  EXPECT_EQ(raw.rows.size(), 100u);
  EXPECT_TRUE(raw.rejects.empty());
  std::set<std::size_t> classes;
  for (const auto& r : raw.rows) classes.insert(r.label);
  EXPECT_GE(classes.size(), 3u);
}

// ---- folds and batches

TEST(Folds, BalancedTwoClasses) {
  std::vector<std::size_t> labels(100);
  for (std::size_t i = 0; i < 100; ++i) labels[i] = i % 2;
  const auto plan = make_folds(labels, 10, 1);
  for (const auto& f : plan.folds) {
    ASSERT_EQ(f.size(), 10u);
    EXPECT_EQ(std::count_if(f.begin(), f.end(), [&](auto i) { return labels[i] == 0; }), 5);
  }
}

TEST(Folds, SmallClassSpreadsOverDistinctFolds) {
  std::vector<std::size_t> labels(50, 0);
  labels[3] = labels[17] = labels[40] = 1;
  const auto plan = make_folds(labels, 10, 2);
  std::set<std::size_t> where;
  for (std::size_t f = 0; f < plan.folds.size(); ++f)
    for (auto i : plan.folds[f])
      if (labels[i] == 1) where.insert(f);
  EXPECT_EQ(where.size(), 3u);
}

TEST(Folds, PartitionAndStratificationLaws) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t k = 2 + rng.below(11);
    const std::size_t n = k + rng.below(300);
    const auto labels = random_labels(rng, n, 1 + rng.below(6));
    const auto plan = make_folds(labels, k, seed);
    EXPECT_EQ(oracle::fold_law_violation(plan, labels), "") << "seed " << seed << " k " << k;
  }
}

TEST(Folds, DeterministicAndErrors) {
  Rng rng(0);
  const auto labels = random_labels(rng, 57, 3);
  EXPECT_EQ(make_folds(labels, 5, 9).folds, make_folds(labels, 5, 9).folds);
  EXPECT_NE(make_folds(labels, 5, 9).folds, make_folds(labels, 5, 10).folds);
  EXPECT_THROW(make_folds(labels, 1, 0), ConfigError);
  EXPECT_THROW(make_folds(labels, 58, 0), ConfigError);
  const auto plan = make_folds(labels, 5, 9);
  auto train = plan.train_indices(2);
  auto test = plan.test_indices(2);
  EXPECT_EQ(train.size() + test.size(), 57u);
  EXPECT_THROW(plan.train_indices(5), ConfigError);
  EXPECT_EQ(fold_plan_from_json(to_json(plan)).folds, plan.folds);
}

TEST(Folds, UnstratifiedStillPartitions) {
  Rng rng(1);
  const auto labels = random_labels(rng, 103, 4);
  const auto plan = make_folds(labels, 10, 3, false);
  std::vector<int> seen(103, 0);
  for (const auto& f : plan.folds) {
    EXPECT_TRUE(f.size() == 10 || f.size() == 11);
    for (auto i : f) ++seen[i];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Batches, SizesAndPermutation) {
  std::vector<std::size_t> idx(9000);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto batches = make_batches(idx, 4000, std::uint64_t{5});
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 4000u);
  EXPECT_EQ(batches[1].size(), 4000u);
  EXPECT_EQ(batches[2].size(), 1000u);
  std::vector<int> seen(9000, 0);
  for (const auto& b : batches)
    for (auto i : b) ++seen[i];
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(make_batches(idx, 4000, std::uint64_t{5}), batches);
  EXPECT_NE(make_batches(idx, 4000, std::uint64_t{6}), batches);
}

TEST(Subsample, StratifiedQuotas) {
  std::vector<std::size_t> labels;
  for (int i = 0; i < 700; ++i) labels.push_back(0);
  for (int i = 0; i < 250; ++i) labels.push_back(1);
  for (int i = 0; i < 50; ++i) labels.push_back(2);
  const auto s = stratified_subsample(labels, 100, 3);
  ASSERT_EQ(s.size(), 100u);
  std::size_t counts[3] = {0, 0, 0};
  for (auto i : s) ++counts[labels[i]];
  EXPECT_EQ(counts[0], 70u);
  EXPECT_EQ(counts[1], 25u);
  EXPECT_EQ(counts[2], 5u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(stratified_subsample(labels, 5000, 3).size(), 1000u);
}

TEST(Prepared, SaveLoadRoundTrip) {
  SyntheticGenerator gen(DatasetId::UnswNb15);
  std::ostringstream os;
  gen.write_csv(os, 300, 2, true);
  const auto raw = parse_csv_text(os.str(), DatasetId::UnswNb15);
  PreparedDataset p;
  p.id = DatasetId::UnswNb15;
  p.encoder = fit_encoder(raw);
  p.data = apply_encoder(p.encoder, raw);
  p.folds = make_folds(p.data.labels, 10, 4);
  const auto dir = std::filesystem::temp_directory_path() / "pelican_prepared_test";
  std::filesystem::remove_all(dir);
  save_prepared(dir, p);
  const auto back = load_prepared(dir);
  EXPECT_EQ(back.data.features, p.data.features);
  EXPECT_EQ(back.data.onehot, p.data.onehot);
  EXPECT_EQ(back.data.labels, p.data.labels);
  EXPECT_EQ(back.folds.folds, p.folds.folds);
  EXPECT_EQ(back.encoder.width, 196u);
  const auto sub = subset(back, stratified_subsample(back.data.labels, 100, 1), 5, 1);
  EXPECT_EQ(sub.data.rows(), 100u);
  EXPECT_EQ(oracle::fold_law_violation(sub.folds, sub.data.labels), "");
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_prepared(dir), DataError);
}
