#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include "splitstream/errors.hpp"
#include "splitstream/harness.hpp"
#include "splitstream/synthetic.hpp"

namespace fs = std::filesystem;
using namespace splitstream;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("splitstream_harness_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig small_config(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.synthetic_n = 120;
  c.epochs = 3;
  c.batch_size = 16;
  c.feature_images = 0;
  c.output_dir = scratch(name);
  return c;
}

std::vector<std::size_t> sizes(const DataPartition& p) {
  std::vector<std::size_t> out = {p.validation.size(), p.test.size()};
  for (const auto& s : p.client_shards) out.push_back(s.size());
  return out;
}

}  // namespace

TEST(Partition, HundredSamples) {
  const auto p = split_dataset(100, {0.7, 0.2, 0.1}, 0.1, 0.1, 7);
  EXPECT_EQ(sizes(p), (std::vector<std::size_t>{10, 10, 56, 16, 8}));
}

TEST(Partition, TenSamplesRemainderToLargest) {
  const auto p = split_dataset(10, {0.7, 0.2, 0.1}, 0.1, 0.1, 7);
  EXPECT_EQ(sizes(p), (std::vector<std::size_t>{1, 1, 6, 1, 1}));
}

TEST(Partition, SeedDeterminism) {
  const auto a = split_dataset(200, {0.7, 0.2, 0.1}, 0.1, 0.1, 11);
  const auto b = split_dataset(200, {0.7, 0.2, 0.1}, 0.1, 0.1, 11);
  const auto c = split_dataset(200, {0.7, 0.2, 0.1}, 0.1, 0.1, 12);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.client_shards, b.client_shards);
  EXPECT_EQ(sizes(a), sizes(c));
  EXPECT_NE(a.pool, c.pool);
}

TEST(Partition, TooFewSamplesOrEmptyShard) {
  EXPECT_THROW(split_dataset(9, {1.0}, 0.1, 0.1, 1), ConfigError);
  EXPECT_THROW(split_dataset(10, std::vector<double>(9, 1.0 / 9), 0.1, 0.1, 1), ConfigError);
}

TEST(Partition, RandomizedDisjointCover) {
  Xorshift64Star rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + rng() % 5;
    const std::size_t n = 10 + rng() % 500;
    std::vector<double> ratios(k);
    for (auto& r : ratios) r = 0.05 + rng.uniform(0, 1);
    const double total = std::accumulate(ratios.begin(), ratios.end(), 0.0);
    for (auto& r : ratios) r /= total;
    const double val = rng.uniform(0.05, 0.3), test = rng.uniform(0.05, 0.3);
    DataPartition p;
    try {
      p = split_dataset(n, ratios, val, test, rng());
    } catch (const ConfigError&) {
      continue;  // pool smaller than the shard count
    }
    std::set<std::size_t> seen(p.validation.begin(), p.validation.end());
    std::size_t count = p.validation.size() + p.test.size();
    seen.insert(p.test.begin(), p.test.end());
    for (const auto& s : p.client_shards) {
      EXPECT_FALSE(s.empty());
      count += s.size();
      seen.insert(s.begin(), s.end());
    }
    ASSERT_EQ(count, n) << "trial " << trial;
    ASSERT_EQ(seen.size(), n) << "trial " << trial;
    EXPECT_EQ(*seen.rbegin(), n - 1);
  }
}

TEST(Averaging, OppositeWeightsCancel) {
  const ModelSpec spec = build_model(ModelKind::kCholesterolMlp, 1.0, 3);
  Network neg = spec.network;
  for (const auto& name : neg.parameter_names()) {
    for (auto& v : neg.parameter(name).data()) v = -v;
  }
  const Network avg = average_parameters({spec.network, neg}, {5, 5});
  for (const auto& name : avg.parameter_names()) {
    for (float v : avg.parameter(name).data()) ASSERT_EQ(v, 0.f) << name;
  }
}

TEST(Averaging, SingleNetworkIsIdentity) {
  const ModelSpec spec = build_model(ModelKind::kCholesterolMlp, 1.0, 3);
  const Network avg = average_parameters({spec.network}, {17});
  for (const auto& name : avg.parameter_names()) {
    EXPECT_EQ(avg.parameter(name), spec.network.parameter(name)) << name;
  }
}

TEST(FedAvg, OneClientReducesToCentralizedTraining) {
  // With one client the round structure is invisible: E rounds of one local
  // epoch equal one round of E epochs on the same shuffle stream.
  ExperimentConfig a = small_config("fedavg_rounds");
  a.mode = RunMode::kFedAvgLite;
  a.client_ratios = {1.0};
  a.epochs = 4;
  ExperimentConfig b = a;
  b.name = "fedavg_single_round";
  b.output_dir = scratch(b.name);
  b.fedavg_rounds = 1;
  b.local_epochs = 4;
  const auto ra = run_experiment(a);
  const auto rb = run_experiment(b);
  for (const auto& name : ra.trained.network.parameter_names()) {
    EXPECT_EQ(ra.trained.network.parameter(name), rb.trained.network.parameter(name)) << name;
  }
  EXPECT_EQ(ra.report.final, rb.report.final);
}

TEST(Experiment, SingleFullFractionEqualsOneClientSpatio) {
  ExperimentConfig single = small_config("single_full");
  single.mode = RunMode::kSingleClient;
  single.single_fraction = 1.0;
  ExperimentConfig spatio = small_config("spatio_one");
  spatio.client_ratios = {1.0};
  const auto a = run_experiment(single);
  const auto b = run_experiment(spatio);
  EXPECT_EQ(a.client_sizes, b.client_sizes);
  EXPECT_EQ(a.report.final, b.report.final);
  EXPECT_EQ(a.report.per_sample_losses, b.report.per_sample_losses);
  EXPECT_EQ(slurp(a.output_dir / "weights.bin"), slurp(b.output_dir / "weights.bin"));
}

TEST(Experiment, SingleClientFractionSizes) {
  ExperimentConfig c = small_config("single_tenth");
  c.mode = RunMode::kSingleClient;
  c.single_fraction = 0.1;
  EXPECT_EQ(run_experiment(c).client_sizes, (std::vector<std::size_t>{9}));
}

TEST(Experiment, EmitsDeclaredFiles) {
  ExperimentConfig c = small_config("files");
  c.feature_images = 2;
  const auto r = run_experiment(c);
  for (const char* f : {"metrics.json", "per_sample_losses.csv", "cdf.csv", "pdf.csv", "epochs.csv",
                        "weights.bin", "manifest.csv", "run.json"}) {
    EXPECT_TRUE(fs::exists(r.output_dir / f)) << f;
  }
  EXPECT_TRUE(fs::exists(r.output_dir / "features" / "client2_sample1_feature.pgm"));
  EXPECT_EQ(r.client_sizes, (std::vector<std::size_t>{68, 19, 9}));
  EXPECT_EQ(r.report.per_epoch.size(), 3u);
  EXPECT_TRUE(r.report.per_epoch.back().val_accuracy.has_value());
  EXPECT_EQ(load_weights(r.output_dir / "weights.bin").network.parameter_names(),
            r.trained.network.parameter_names());
}

TEST(Experiment, RegressionRunReportsLogMetrics) {
  ExperimentConfig c = small_config("regression");
  c.model = ModelKind::kCholesterolMlp;
  c.source = DataSource::kSyntheticRegression;
  c.synthetic_n = 200;
  c.epochs = 20;
  const auto r = run_experiment(c);
  ASSERT_TRUE(r.report.final.count("msle"));
  EXPECT_NEAR(r.report.final.at("rmsle") * r.report.final.at("rmsle"), r.report.final.at("msle"), 1e-9);
  EXPECT_GE(r.report.final.at("smape"), 0.0);
  EXPECT_LE(r.report.final.at("smape"), 100.0);
}

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig d;
  const ExperimentConfig back = config_from_json(config_to_json(d));
  EXPECT_EQ(config_to_json(back), config_to_json(d));
  EXPECT_EQ(config_from_json(nlohmann::json::object()).client_ratios, (std::vector<double>{0.7, 0.2, 0.1}));
}

TEST(Config, ParsesSectionsAndComments) {
  const fs::path p = scratch("config.json");
  std::ofstream(p) << R"({
    // regression baseline
    "name": "reg", "seed": 9,
    "model": {"kind": "cholesterol_mlp"},
    "data": {"source": "synthetic_reg"},
    "mode": {"kind": "single_client", "fraction": 0.2},
    "transport": {"kind": "tcp"}
  })";
  const ExperimentConfig c = load_config(p);
  EXPECT_EQ(c.name, "reg");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.model, ModelKind::kCholesterolMlp);
  EXPECT_EQ(c.mode, RunMode::kSingleClient);
  EXPECT_DOUBLE_EQ(c.single_fraction, 0.2);
  EXPECT_EQ(c.transport, TransportKind::kTcp);
}

TEST(Config, RejectsBadInput) {
  using nlohmann::json;
  EXPECT_THROW(config_from_json(json{{"colour", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"model", {{"kind", "resnet"}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"data", {{"client_ratios", {0.5, 0.4}}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"data", {{"val_fraction", 0.6}, {"test_fraction", 0.5}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"data", {{"source", "synthetic_reg"}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"seed", "one"}}), ConfigError);
}

TEST(Config, OutputRootFromEnvironment) {
  ExperimentConfig c;
  c.name = "envrun";
  c.output_dir = "elsewhere";
  ::setenv("SPLITSTREAM_OUT", "/tmp/ss_root", 1);
  EXPECT_EQ(resolve_output_dir(c), fs::path("/tmp/ss_root/envrun"));
  ::unsetenv("SPLITSTREAM_OUT");
  EXPECT_EQ(resolve_output_dir(c), fs::path("elsewhere"));
}

namespace {

fs::path fake_report(const std::string& name, TaskKind task, std::map<std::string, double> final,
                     std::vector<double> losses) {
  MetricsReport r;
  r.task = task;
  r.label = name;
  r.final = std::move(final);
  for (std::size_t e = 0; e < losses.size(); ++e) {
    EpochMetrics m;
    m.epoch = e + 1;
    m.loss = losses[e];
    if (task == TaskKind::kClassification) m.accuracy = 50.0 + static_cast<double>(e);
    r.per_epoch.push_back(m);
  }
  r.per_sample_losses = {0.1, 0.2};
  r.distribution = distribution_export(r.per_sample_losses);
  const fs::path dir = scratch("report_" + name);
  write_report(r, dir);
  return dir / "metrics.json";
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Compare, SelfComparisonHasZeroDifferences) {
  const auto a = fake_report("self", TaskKind::kClassification, {{"accuracy", 91.5}, {"loss", 0.25}}, {0.7, 0.5});
  const fs::path out = scratch("cmp_self");
  compare_reports({a, a}, out);
  const auto rows = lines(out / "comparison.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "run,accuracy,loss,diff_accuracy,diff_loss");
  EXPECT_EQ(rows[2], "self_1,91.5,0.25,0,0");
}

TEST(Compare, RegressionColumns) {
  const auto a = fake_report("single", TaskKind::kRegression, {{"msle", 0.04}, {"rmsle", 0.2}, {"smape", 9.0}, {"loss", 1}}, {3});
  const auto b = fake_report("spatio", TaskKind::kRegression, {{"msle", 0.01}, {"rmsle", 0.1}, {"smape", 4.0}, {"loss", 1}}, {2});
  const fs::path out = scratch("cmp_reg");
  compare_reports({a, b}, out);
  const auto rows = lines(out / "comparison.csv");
  EXPECT_EQ(rows[0], "run,msle,rmsle,smape,diff_msle,diff_rmsle,diff_smape");
  EXPECT_EQ(rows[2], "spatio,0.01,0.1,4,-0.03,-0.1,-5");
}

TEST(Compare, CurvesHaveOneColumnPerRun) {
  const auto a = fake_report("a", TaskKind::kClassification, {{"accuracy", 1}, {"loss", 1}}, {0.9, 0.8, 0.7});
  const auto b = fake_report("b", TaskKind::kClassification, {{"accuracy", 2}, {"loss", 1}}, {0.6, 0.5});
  const auto c = fake_report("c", TaskKind::kClassification, {{"accuracy", 3}, {"loss", 1}}, {0.4, 0.3, 0.2});
  const fs::path out = scratch("cmp_curves");
  compare_reports({a, b, c}, out);
  const auto rows = lines(out / "curves.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "epoch,a_loss,b_loss,c_loss,a_accuracy,b_accuracy,c_accuracy");
  EXPECT_EQ(rows[3], "3,0.7,,0.2,52,,52");
}

TEST(Compare, MixedTasksRejected) {
  const auto a = fake_report("cls", TaskKind::kClassification, {{"accuracy", 1}, {"loss", 1}}, {1});
  const auto b = fake_report("reg", TaskKind::kRegression, {{"msle", 0}, {"rmsle", 0}, {"smape", 0}}, {1});
  EXPECT_THROW(compare_reports({a, b}, scratch("cmp_mixed")), ConfigError);
  EXPECT_THROW(compare_reports({a}, scratch("cmp_one")), ConfigError);
}

TEST(Synthetic, GeneratorsAreSeededAndBalanced) {
  const auto a = synthetic_images(40, 5), b = synthetic_images(40, 5);
  ASSERT_EQ(a.size(), 40u);
  double positives = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features, b[i].features);
    positives += a[i].label;
    for (float v : a[i].features.data()) ASSERT_TRUE(v >= 0.f && v <= 1.f);
  }
  EXPECT_EQ(positives, 20);
  for (const auto& s : synthetic_cholesterol(500, 3)) {
    ASSERT_EQ(s.features.size(), kTabularFeatures);
    ASSERT_GE(s.label, 15.f);
  }
}

TEST(Synthetic, WrittenDatasetLoadsBack) {
  const fs::path dir = scratch("gen_cls");
  const auto samples = synthetic_images(6, 2);
  write_image_dataset(dir, samples);
  const auto loaded = load_image_dataset(dir, {16, 16, 1});
  ASSERT_EQ(loaded.size(), 6u);
  std::multiset<float> want, got;
  for (const auto& s : samples) want.insert(s.label);
  for (const auto& s : loaded) got.insert(s.label);
  EXPECT_EQ(want, got);

  const fs::path csv = scratch("gen_reg.csv");
  const auto rows = synthetic_cholesterol(25, 4);
  write_tabular_csv(csv, rows);
  const auto back = load_tabular_csv(csv);
  ASSERT_EQ(back.size(), 25u);
  EXPECT_EQ(back[7].features, rows[7].features);
  EXPECT_EQ(back[7].label, rows[7].label);
}
