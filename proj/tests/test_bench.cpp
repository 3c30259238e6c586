#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "oacsplit/bench/config.hpp"
#include "oacsplit/bench/cost.hpp"
#include "oacsplit/bench/experiment.hpp"

using namespace oacsplit;
using namespace oacsplit::bench;
namespace fs = std::filesystem;

namespace {

// a/b == c/d without trusting the library's fraction type.
bool same(const Rational& got, std::int64_t num, std::int64_t den) { return got.num * den == num * got.den; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("oacsplit_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.setting = Setting::custom;
  c.channel = {2, 4, 4, 6, 0.0, 5, ""};
  c.oac.r = {2, 4};
  c.oac.noise.values = {20.0};
  c.train.batch = 16;
  c.train.steps = 30;
  c.train.eval_every = 10;
  c.seeds = {0, 1, 2};
  c.dataset.image = false;
  c.dataset.features = 8;
  c.dataset.train_per_class = 20;
  c.dataset.test_per_class = 10;
  c.hidden = 4;
  return c;
}

ExperimentConfig short_preset(Setting s) {
  json j = {{"setting", to_string(s)}, {"train", {{"steps", 6}, {"eval_every", 3}, {"batch", 16}}}, {"seeds", {0, 1}}};
  j["dataset"] = {{"train_per_class", 20}, {"test_per_class", 10}};
  return config_from_json(j);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST(Cost, MatchesLiteralFormulasOnRandomSizes) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto pick = [&](int hi) { return static_cast<std::int64_t>(1 + rng.below(static_cast<std::uint64_t>(hi))); };
    LayerSpec s;
    const std::int64_t Ni = pick(64), No = pick(64), Nt = pick(32), Nr = pick(32), r = pick(16), B = pick(128);
    const std::int64_t Nci = pick(32), Nco = pick(32), Nk = pick(7), Nwi = pick(16), Nhi = pick(16), Nwo = pick(16), Nho = pick(16);
    s.n_in = Ni, s.n_out = No, s.n_tx = Nt, s.n_rx = Nr, s.r = r, s.batch = B;
    s.n_ci = Nci, s.n_co = Nco, s.n_k = Nk, s.w_in = Nwi, s.h_in = Nhi, s.w_out = Nwo, s.h_out = Nho;
    const auto rows = cost_report(s);
    ASSERT_EQ(rows.size(), 8u);
    // FC, each value written as numerator / r.
    EXPECT_TRUE(same(rows[0].params, Ni * No * Nt + Nr * r * r, r));
    EXPECT_TRUE(same(rows[0].macs, B * No * Nr * r + B * No * Ni * Nt, r));
    EXPECT_TRUE(same(rows[0].transmissions, B * No, r));
    EXPECT_TRUE(same(rows[1].params, Ni * No + (Nt + Nr) * r, 1));
    EXPECT_TRUE(same(rows[1].macs, B * No * (Ni + Nt + Nr), 1));
    EXPECT_TRUE(same(rows[1].transmissions, B * No, r));
    EXPECT_TRUE(same(rows[2].params, Ni * No * Nr + Nt * r * r, r));
    EXPECT_TRUE(same(rows[2].macs, B * Ni * Nt * r + B * Ni * No * Nr, r));
    EXPECT_TRUE(same(rows[2].transmissions, B * Ni, r));
    EXPECT_TRUE(same(rows[3].params, Ni * No + (Nt + Nr) * r, 1));
    EXPECT_TRUE(same(rows[3].macs, B * Ni * (No + Nt + Nr), 1));
    EXPECT_TRUE(same(rows[3].transmissions, B * Ni, r));
    // Conv.
    const std::int64_t k2 = Nk * Nk, out_px = Nwo * Nho, in_px = Nwi * Nhi;
    EXPECT_TRUE(same(rows[4].params, Nco * k2 * Nt + Nr * r * r, r));
    EXPECT_TRUE(same(rows[4].macs, B * Nci * Nco * out_px * k2 * Nt + B * Nco * out_px * Nr * r, r));
    EXPECT_TRUE(same(rows[4].transmissions, B * Nco * out_px, r));
    EXPECT_TRUE(same(rows[5].params, Nco * k2 + (Nt + Nr) * r, 1));
    EXPECT_TRUE(same(rows[5].macs, B * Nci * Nco * out_px * k2 + B * Nco * out_px * (Nt + Nr), 1));
    EXPECT_TRUE(same(rows[5].transmissions, B * Nco * out_px, r));
    EXPECT_TRUE(same(rows[6].params, Nco * k2 * Nr + Nt * r * r, r));
    EXPECT_TRUE(same(rows[6].macs, B * Nci * Nco * out_px * k2 * Nr + B * Nci * in_px * Nt * r, r));
    EXPECT_TRUE(same(rows[6].transmissions, B * Nci * in_px, r));
    EXPECT_TRUE(same(rows[7].params, Nco * k2 + (Nt + Nr) * r, 1));
    EXPECT_TRUE(same(rows[7].macs, B * Nci * Nco * out_px * k2 + B * Nci * in_px * (Nt + Nr), 1));
    EXPECT_TRUE(same(rows[7].transmissions, B * Nci * in_px, r));
  }
}

TEST(Cost, FigureSizedExample) {
  LayerSpec s;
  s.n_in = s.n_out = 6;
  s.n_tx = s.n_rx = 4;
  s.r = 3;
  s.batch = 3;
  const CostRow row = cost_report(s)[1];
  EXPECT_EQ(row.design.name(), "tx_separated");
  EXPECT_EQ(row.params, Rational(60));
  EXPECT_EQ(row.macs, Rational(252));
  EXPECT_EQ(row.transmissions, Rational(6));
}

TEST(Cost, SeparatedDesignsShareParameterCountForSquareLayers) {
  LayerSpec s;
  s.n_in = s.n_out = 9;
  s.n_tx = 5;
  s.n_rx = 7;
  s.r = 2;
  s.batch = 4;
  const auto rows = cost_rows(s);
  EXPECT_EQ(rows[1].params, rows[3].params);
}

TEST(Cost, PointwiseConvReducesToDense) {
  // MACs and transmissions reduce for any channel count. The conv parameter
  // closed forms carry no input-channel factor, so parameters reduce only
  // for a single input channel.
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    LayerSpec conv;
    conv.kind = LayerKind::conv;
    conv.n_ci = static_cast<std::int64_t>(1 + rng.below(12));
    conv.n_co = static_cast<std::int64_t>(1 + rng.below(12));
    conv.n_k = conv.h_in = conv.w_in = conv.h_out = conv.w_out = 1;
    conv.n_tx = static_cast<std::int64_t>(1 + rng.below(8));
    conv.n_rx = static_cast<std::int64_t>(1 + rng.below(8));
    conv.r = static_cast<std::int64_t>(1 + rng.below(6));
    conv.batch = static_cast<std::int64_t>(1 + rng.below(20));
    LayerSpec fc = conv;
    fc.kind = LayerKind::fc;
    fc.n_in = conv.n_ci;
    fc.n_out = conv.n_co;
    const auto a = cost_rows(conv), b = cost_rows(fc);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(a[i].macs, b[i].macs);
      EXPECT_EQ(a[i].transmissions, b[i].transmissions);
    }
    conv.n_ci = fc.n_in = 1;
    const auto c = cost_rows(conv), d = cost_rows(fc);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(c[i].params, d[i].params);
  }
}

TEST(Cost, AlgorithmComparison) {
  const auto r16 = cost_comparison(16);
  ASSERT_EQ(r16.size(), 4u);
  EXPECT_EQ(r16[3].algorithm, "proposed");
  EXPECT_EQ(r16[3].transmission, Rational(1, 256));
  EXPECT_TRUE(r16[3].transmission_bound);
  EXPECT_EQ(r16[3].channel_estimation, Rational(0));
  EXPECT_EQ(r16[0].transmission, Rational(1));
  const auto r1 = cost_comparison(1);
  EXPECT_EQ(r1[0].transmission, r1[1].transmission);
}

TEST(Cost, RejectsNonPositiveSizes) {
  LayerSpec s;
  s.n_in = 3;
  s.n_out = 3;
  s.n_tx = s.n_rx = 2;
  s.r = 0;
  EXPECT_THROW(cost_report(s), ConfigError);
  EXPECT_THROW(layer_spec_from_json(json{{"n_in", 2}, {"bogus", 1}}), ConfigError);
}

TEST(Rational, ReducesAndCompares) {
  EXPECT_EQ(Rational(6, 4), Rational(3, 2));
  EXPECT_EQ((Rational(1, 3) + Rational(1, 6)).str(), "1/2");
  EXPECT_EQ((Rational(2, 3) * Rational(3, 4)).str(), "1/2");
  EXPECT_EQ((Rational(5) / Rational(10)).str(), "1/2");
  EXPECT_TRUE(Rational(8, 4).is_integer());
}

TEST(Config, PresetsPinChannelSizes) {
  const auto c = config_from_json(json{{"setting", "massive_3node"}});
  EXPECT_EQ(c.channel.n_tx, 64);
  EXPECT_EQ(c.channel.n_rx, 64);
  EXPECT_EQ(c.channel.n_paths, 8);
  EXPECT_EQ(c.channel.nodes, 3);
  EXPECT_EQ(c.train.batch, 64);
  EXPECT_DOUBLE_EQ(c.train.lr, 0.005);
  EXPECT_DOUBLE_EQ(c.train.alpha, 0.99);
  EXPECT_EQ(c.train.optimizer, nn::OptimizerKind::adam);
  const auto s = config_from_json(json{{"setting", "sparse_3node"}});
  EXPECT_EQ(s.channel.n_paths, 4);
  EXPECT_EQ(config_from_json(json{{"setting", "complex_2node"}}).channel.n_paths, 20);
}

TEST(Config, ValidationErrorsNameTheField) {
  auto field_of = [](const json& j) {
    try {
      config_from_json(j);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of({{"setting", "complex_2node"}, {"channel", {{"n_tx", 8}}}}), "channel.n_tx");
  EXPECT_EQ(field_of({{"train", {{"bogus", 1}}}}), "train.bogus");
  EXPECT_EQ(field_of({{"oac", {{"r", {4, -1}}}}}), "oac.r[1]");
  EXPECT_EQ(field_of({{"oac", {{"design", "sideways"}}}}), "design");
  EXPECT_EQ(field_of({{"baseline", "oracle"}}), "baseline");
  EXPECT_EQ(field_of({{"setting", "sparse_3node"}, {"channel", {{"rho", 0.1}}}}), "channel.rho");
  EXPECT_EQ(field_of({{"train", {{"lr", "fast"}}}}), "train.lr");
  EXPECT_EQ(field_of({{"seeds", {1, 1}}}), "seeds");
  EXPECT_EQ(field_of({{"oac", {{"snr_db", {10}}, {"noise_power", {0.1}}}}}), "oac.noise_power");
}

TEST(Config, RoundTripIsIdentity) {
  std::vector<json> inputs;
  for (const auto& entry : fs::directory_iterator(fs::path(OACSPLIT_SOURCE_DIR) / "configs")) {
    const json j = read_json_file(entry.path().string());
    if (j.contains("setting")) inputs.push_back(j);
  }
  ASSERT_GE(inputs.size(), 4u);
  inputs.push_back(json::object());
  inputs.push_back({{"oac", {{"noise_power", {0.0, 0.25}}, {"rescale_backward", false}}}, {"train", {{"optimizer", "sgd"}}}});
  inputs.push_back({{"setting", "moving_3node"}, {"channel", {{"rho", 0.1}}}});
  for (const json& in : inputs) {
    const ExperimentConfig a = config_from_json(in);
    const json once = config_to_json(a);
    const ExperimentConfig b = config_from_json(once);
    EXPECT_EQ(config_to_json(b), once) << in.dump();
    EXPECT_EQ(config_from_json(json::parse(once.dump())).seeds, a.seeds);
  }
}

TEST(Config, OverridesReachNestedFields) {
  json j = {{"setting", "complex_2node"}};
  apply_override(j, "train.steps=12");
  apply_override(j, "oac.r=[4,8]");
  apply_override(j, "oac.design=rx_separated");
  apply_override(j, "baseline=ideal");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.train.steps, 12);
  EXPECT_EQ(c.oac.r, (std::vector<int>{4, 8}));
  EXPECT_EQ(c.oac.design, "rx_separated");
  EXPECT_EQ(c.baseline, Baseline::ideal);
  EXPECT_THROW(apply_override(j, "no_equals_sign"), ConfigError);
}

TEST(Experiment, CentralizedGivesOneAccuracyPerSeedAndRepeatsExactly) {
  ExperimentConfig c = short_preset(Setting::complex_2node);
  c.baseline = Baseline::centralized;
  c.oac.noise = {NoiseConfig::Kind::power, {0.0}};
  const fs::path a = temp_dir("central_a"), b = temp_dir("central_b");
  const auto rep = run_experiment(c, a.string());
  run_experiment(c, b.string());
  ASSERT_EQ(rep.runs.size(), c.seeds.size());
  for (const auto& r : rep.runs) {
    EXPECT_TRUE(r.ok) << r.error;
    EXPECT_TRUE(std::isfinite(r.final_accuracy));
  }
  ASSERT_EQ(rep.summary.size(), 1u);
  EXPECT_EQ(rep.summary[0].completed, c.seeds.size());
  for (const auto& r : rep.runs) EXPECT_EQ(slurp(a / r.file), slurp(b / r.file));
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
  EXPECT_EQ(slurp(a / "runs.csv"), slurp(b / "runs.csv"));
}

TEST(Experiment, StillMovingChannelMatchesStaticSetting) {
  ExperimentConfig moving = short_preset(Setting::moving_3node);
  moving.channel.rho = 0.0;
  moving.seeds = {3};
  ExperimentConfig fixed = short_preset(Setting::sparse_3node);
  fixed.seeds = {3};
  const auto a = run_experiment(moving), b = run_experiment(fixed);
  ASSERT_TRUE(a.runs[0].ok) << a.runs[0].error;
  EXPECT_EQ(a.runs[0].metrics, b.runs[0].metrics);
  moving.channel.rho = 0.1;
  EXPECT_NE(run_experiment(moving).runs[0].metrics, b.runs[0].metrics);
}

TEST(Experiment, WorkerCountDoesNotChangeResults) {
  ExperimentConfig c = tiny_config();
  const auto serial = run_experiment(c);
  c.workers = 3;
  const auto pooled = run_experiment(c);
  ASSERT_EQ(serial.runs.size(), pooled.runs.size());
  for (std::size_t i = 0; i < serial.runs.size(); ++i) EXPECT_EQ(serial.runs[i].metrics, pooled.runs[i].metrics);
  EXPECT_EQ(serial.summary_csv, pooled.summary_csv);
}

TEST(Experiment, SummaryIsRecomputableFromMetricFiles) {
  const ExperimentConfig c = tiny_config();
  const fs::path dir = temp_dir("recompute");
  run_experiment(c, dir.string());
  // Final accuracy of a run: accuracy of its last test row.
  std::map<std::string, std::vector<double>> by_point;
  std::ifstream runs(dir / "runs.csv");
  std::string line;
  std::getline(runs, line);
  while (std::getline(runs, line)) {
    const auto f = split(line, ',');
    std::ifstream metrics(dir / f[8]);
    std::string row, last;
    while (std::getline(metrics, row)) {
      if (row.rfind("test,", 0) == 0) last = row;
    }
    ASSERT_FALSE(last.empty());
    by_point[f[0] + "," + f[2]].push_back(std::stod(split(last, ',')[3]));
  }
  std::ifstream summary(dir / "summary.csv");
  std::getline(summary, line);
  int rows = 0;
  while (std::getline(summary, line)) {
    const auto f = split(line, ',');
    const auto& acc = by_point.at(f[3] + "," + f[5]);
    double mean = 0.0;
    for (double a : acc) mean += a / static_cast<double>(acc.size());
    double ss = 0.0;
    for (double a : acc) ss += (a - mean) * (a - mean);
    EXPECT_NEAR(std::stod(f[8]), mean, 1e-15);
    EXPECT_NEAR(std::stod(f[9]), std::sqrt(ss / static_cast<double>(acc.size() - 1)), 1e-15);
    EXPECT_EQ(std::stoul(f[6]), acc.size());
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}

TEST(Experiment, BlowUpIsMarkedFailedAndOthersContinue) {
  ExperimentConfig c = tiny_config();
  c.train.optimizer = nn::OptimizerKind::sgd;
  c.train.lr = 1e200;
  c.oac.r = {2};
  c.seeds = {0, 1};
  const auto rep = run_experiment(c);
  ASSERT_EQ(rep.runs.size(), 2u);
  for (const auto& r : rep.runs) {
    EXPECT_FALSE(r.ok);
    EXPECT_FALSE(r.error.empty());
    EXPECT_GE(r.steps, 1) << r.error;
  }
  EXPECT_EQ(rep.summary[0].failed, 2u);
  EXPECT_NE(rep.runs_csv.find(",failed,"), std::string::npos);
}

TEST(Experiment, StoredChannelsReplayExactly) {
  ExperimentConfig c = tiny_config();
  c.seeds = {0};
  const fs::path dir = temp_dir("replay");
  const auto first = run_experiment(c, dir.string());
  c.channel.file = (dir / "channels.json").string();
  c.channel.seed = 999;  // ignored when replaying
  const auto second = run_experiment(c);
  EXPECT_EQ(first.runs[0].metrics, second.runs[0].metrics);
}

TEST(Experiment, MetricRowsCarryLinkColumns) {
  ExperimentConfig c = tiny_config();
  c.seeds = {0};
  c.oac.r = {2};
  const auto rep = run_experiment(c);
  std::istringstream in(rep.runs[0].metrics);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, metrics_header(1).substr(0, header.size()));
  EXPECT_EQ(split(header, ',').size(), split(first, ',').size());
  EXPECT_EQ(split(first, ',')[0], "train");
  // r = 2 on a 4-input layer needs two transmissions, so two amplitudes.
  EXPECT_EQ(split(split(first, ',')[6], '|').size(), 2u);
}
