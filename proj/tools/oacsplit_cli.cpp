// Command-line driver: experiments, cost tables, regret curves, synthetic
// data and self-checks.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oacsplit/oacsplit.hpp"

namespace fs = std::filesystem;
using namespace oacsplit;
using nlohmann::json;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
};

// Accepts a path or inline JSON text.
json load_json_arg(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') {
    json j = json::parse(arg, nullptr, false);
    if (j.is_discarded()) throw ConfigError("", "argument is not valid JSON");
    return j;
  }
  return bench::read_json_file(arg);
}

json with_overrides(json j, const Common& common) {
  for (const std::string& o : common.overrides) bench::apply_override(j, o);
  return j;
}

int cmd_run(const std::string& path, const Common& common, std::optional<int> workers) {
  json j = with_overrides(load_json_arg(path), common);
  if (common.seed) j["seeds"] = {*common.seed};
  if (workers) j["workers"] = *workers;
  const bench::ExperimentConfig cfg = bench::config_from_json(j);
  const std::string out = common.out_dir.empty() ? "results" : common.out_dir;
  const auto report = bench::run_experiment(cfg, out, [](const bench::RunResult& r) {
    json rec = {{"run", r.file}, {"status", r.ok ? "ok" : "failed"}, {"steps", r.steps}};
    if (r.ok) {
      rec["final_accuracy"] = r.final_accuracy;
    } else {
      rec["error"] = r.error;
    }
    std::cerr << rec.dump() << "\n";
  });
  json rows = json::array();
  for (const auto& s : report.summary) {
    json row = {{"point", s.point.key()}, {"completed", s.completed}, {"failed", s.failed}};
    if (s.completed > 0) {
      row["mean_accuracy"] = s.mean_accuracy;
      row["std_accuracy"] = s.std_accuracy;
    }
    rows.push_back(row);
  }
  std::cout << json{{"out_dir", out}, {"summary", rows}}.dump(2) << "\n";
  std::size_t failed = 0;
  for (const auto& r : report.runs) failed += !r.ok;
  return failed == report.runs.size() ? 3 : 0;
}

int cmd_cost(const std::string& arg, const Common& common) {
  json j = with_overrides(load_json_arg(arg), common);
  const bench::LayerSpec spec = bench::layer_spec_from_json(j);
  json rows = json::array(), comparison = json::array();
  for (const auto& row : bench::cost_report(spec)) rows.push_back(bench::to_json(row));
  for (const auto& row : bench::cost_comparison(spec.r)) comparison.push_back(bench::to_json(row));
  const json out = {{"rows", rows}, {"comparison", comparison}};
  if (!common.out_dir.empty()) bench::write_text(fs::path(common.out_dir) / "cost.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_regret(const std::string& arg, const Common& common) {
  json j = with_overrides(load_json_arg(arg), common);
  if (common.seed) j["seeds"] = {*common.seed};
  const runtime::RegretConfig cfg = bench::regret_config_from_json(j);
  const runtime::RegretResult res = runtime::regret_experiment(cfg);
  json series = json::array();
  std::string csv = "sigma,t,mean_average_regret\n";
  for (const auto& s : res.series) {
    series.push_back({{"sigma", s.sigma},
                      {"slope", s.slope},
                      {"seed_slopes", s.seed_slopes},
                      {"coefficient", s.coefficient},
                      {"max_loss_gap", s.max_loss_gap},
                      {"max_gradient", s.max_gradient},
                      {"diverged", s.diverged}});
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      csv += bench::fmt(s.sigma) + "," + std::to_string(s.t[i]) + "," + bench::fmt(s.mean_average_regret[i]) + "\n";
    }
  }
  const json out = {{"config", bench::regret_config_to_json(cfg)},
                    {"series", series},
                    {"ratio", res.ratio},
                    {"predicted_ratio", res.predicted_ratio},
                    {"fit_offset", res.fit_offset},
                    {"fit_slope", res.fit_slope}};
  if (!common.out_dir.empty()) {
    bench::write_text(fs::path(common.out_dir) / "regret.csv", csv);
    bench::write_text(fs::path(common.out_dir) / "regret.json", out.dump(2) + "\n");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_gen_data(const std::string& arg, const Common& common) {
  json j = with_overrides(load_json_arg(arg), common);
  if (common.seed) j["seed"] = *common.seed;
  const auto [spec, seed] = bench::dataset_spec_from_json(j);
  const bench::Dataset ds = bench::generate_dataset(spec, seed);
  const fs::path out = common.out_dir.empty() ? fs::path("data") : fs::path(common.out_dir);
  bench::write_text(out / "train.csv", bench::dataset_csv(ds.x_train, ds.y_train));
  bench::write_text(out / "test.csv", bench::dataset_csv(ds.x_test, ds.y_test));
  json meta = bench::spec_to_json(spec);
  meta["seed"] = seed;
  meta["nearest_centroid_accuracy"] = bench::nearest_centroid_accuracy(ds.x_test, ds.y_test, ds.means);
  bench::write_text(out / "spec.json", meta.dump(2) + "\n");
  std::cout << json{{"out_dir", out.string()}, {"train", ds.y_train.size()}, {"test", ds.y_test.size()}, {"spec", meta}}.dump(2) << "\n";
  return 0;
}

int cmd_verify() {
  bool all = true;
  for (const auto& r : bench::verify_all()) {
    std::cout << json{{"check", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}}.dump() << "\n";
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

void print_error(const std::string& kind, const std::string& message, const std::string& field = "") {
  json rec = {{"error", {{"kind", kind}, {"message", message}}}};
  if (!field.empty()) rec["error"]["field"] = field;
  std::cerr << rec.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split learning over simulated MIMO over-the-air links"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Replace the seed list (run, regret) or the dataset seed (gen-data)");
  app.add_option("--out-dir", common.out_dir, "Directory for output files");
  app.add_option("--override", common.overrides, "key=value applied to the input JSON, dotted keys for nested fields")->allow_extra_args(false);

  std::string run_path, cost_arg, regret_path, data_arg;
  std::optional<int> workers;
  auto* run = app.add_subcommand("run", "Run an experiment sweep");
  run->add_option("config", run_path, "Experiment config (JSON file)")->required();
  run->add_option("--workers", workers, "Parallel runs (0: one per hardware thread)");
  auto* cost = app.add_subcommand("cost", "Parameter, MAC and transmission counts for a layer");
  cost->add_option("layer-spec", cost_arg, "Layer sizes (JSON file or inline JSON)")->required();
  auto* regret = app.add_subcommand("regret", "Regret curves of noisy SGD on complex least squares");
  regret->add_option("config", regret_path, "Regret config (JSON file or inline JSON)")->required();
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  gen->add_option("spec", data_arg, "Dataset spec (JSON file or inline JSON)")->required();
  auto* verify = app.add_subcommand("verify", "Run the built-in property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }
  if (*seed_opt) common.seed = seed;

  try {
    if (*run) return cmd_run(run_path, common, workers);
    if (*cost) return cmd_cost(cost_arg, common);
    if (*regret) return cmd_regret(regret_path, common);
    if (*gen) return cmd_gen_data(data_arg, common);
    if (*verify) return cmd_verify();
  } catch (const ConfigError& e) {
    print_error(e.kind(), e.what(), e.field());
    return 2;
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
