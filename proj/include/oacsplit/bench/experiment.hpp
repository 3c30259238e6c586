#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "oacsplit/bench/config.hpp"
#include "oacsplit/bench/dataset.hpp"
#include "oacsplit/runtime/network.hpp"
#include "oacsplit/runtime/system.hpp"

namespace oacsplit::bench {

// Numbers in metric files: round-trip precision, fixed spellings for
// non-finite values.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Channels of every link, drawn once from the channel seed or replayed from
// a stored file.
inline std::vector<ChannelState> make_channels(const ExperimentConfig& c) {
  const std::size_t links = static_cast<std::size_t>(c.channel.nodes - 1);
  std::vector<ChannelState> out;
  if (!c.channel.file.empty()) {
    const json j = read_json_file(c.channel.file);
    const json& list = j.contains("links") ? j.at("links") : j;
    if (!list.is_array() || list.size() != links) {
      throw ConfigError("channel.file", "expected " + std::to_string(links) + " stored channel(s)");
    }
    for (const json& e : list) {
      ChannelState s = channel_from_json(e);
      if (s.n_tx() != c.channel.n_tx || s.n_rx() != c.channel.n_rx) throw ConfigError("channel.file", "stored channel size differs from n_tx / n_rx");
      out.push_back(std::move(s));
    }
    return out;
  }
  Rng rng(c.channel.seed, 0);
  for (std::size_t l = 0; l < links; ++l) out.push_back(sample_channel(c.channel.n_tx, c.channel.n_rx, c.channel.n_paths, rng));
  return out;
}

inline json channels_to_json(const std::vector<ChannelState>& channels) {
  json links = json::array();
  for (const ChannelState& s : channels) links.push_back(channel_to_json(s));
  return {{"links", links}};
}

inline nn::ComplexNet make_network(const ExperimentConfig& c, Rng& rng) {
  const DatasetSpec& d = c.dataset;
  if (d.image) return runtime::make_conv_network(d.channels, d.height, d.width, d.classes, c.channel.nodes, rng);
  return runtime::make_dense_network(d.features, d.classes, c.hidden, rng);
}

// One point of the sweep. Centralized runs have no link, so r and noise are
// left unset.
struct SweepPoint {
  int r = 0;
  double noise = 0.0;
  bool has_link = true;

  std::string key() const {
    return has_link ? "r" + std::to_string(r) + "_noise" + fmt_short(noise) : std::string("centralized");
  }
};

inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& c) {
  if (c.baseline == Baseline::centralized) return {SweepPoint{0, 0.0, false}};
  std::vector<SweepPoint> out;
  for (double v : c.oac.noise.values) {
    for (int r : c.oac.r) out.push_back({r, v, true});
  }
  return out;
}

inline std::string noise_kind(const ExperimentConfig& c) {
  if (c.baseline == Baseline::centralized) return "none";
  return c.oac.noise.kind == NoiseConfig::Kind::snr_db ? "snr_db" : "noise_power";
}

// Header of a per-run metric file for the given link count.
inline std::string metrics_header(std::size_t links) {
  std::string h = "phase,step,loss,accuracy";
  for (std::size_t l = 0; l < links; ++l) {
    const std::string s = std::to_string(l);
    h += ",forward_snr_db_" + s + ",backward_snr_db_" + s + ",amplitude_" + s + ",amplitude_tilde_" + s + ",comm_combiner_" + s +
         ",comm_signal_" + s;
  }
  return h + "\n";
}

struct RunResult {
  SweepPoint point;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double final_accuracy = std::nan("");
  double final_loss = std::nan("");
  int steps = 0;
  std::string metrics;  // CSV contents
  std::string file;     // relative path inside the output directory
};

class RunFailure : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

namespace detail {

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "|" : "") + fmt(v[i]);
  return s;
}

inline std::string row(const char* phase, int step, double loss, double acc, const std::vector<runtime::LinkMetrics>& links, std::size_t n_links) {
  std::string s = std::string(phase) + "," + std::to_string(step) + "," + fmt(loss) + "," + fmt(acc);
  for (std::size_t l = 0; l < n_links; ++l) {
    if (l < links.size()) {
      const runtime::LinkMetrics& m = links[l];
      s += "," + fmt(m.forward_snr_db) + "," + fmt(m.backward_snr_db) + "," + join(m.amplitude) + "," + join(m.amplitude_tilde) + "," +
           fmt(m.comm_combiner) + "," + fmt(m.comm_signal);
    } else {
      s += ",,,,,,";
    }
  }
  return s + "\n";
}

}  // namespace detail

// Trains and evaluates one (point, seed) pair. Never throws: failures are
// recorded in the result.
inline RunResult run_single(const ExperimentConfig& c, const Dataset& data, const std::vector<ChannelState>& channels, const SweepPoint& point,
                            std::uint64_t seed) {
  RunResult res;
  res.point = point;
  res.seed = seed;
  res.file = "runs/" + point.key() + "_seed" + std::to_string(seed) + ".csv";
  const std::size_t n_links = point.has_link ? channels.size() : 0;
  res.metrics = metrics_header(n_links);
  try {
    Rng init(seed, runtime::streams::init);
    const nn::ComplexNet net = make_network(c, init);
    std::function<runtime::BatchMetrics(const Tensor&, const std::vector<int>&)> train;
    std::function<runtime::SplitSystem::Evaluation()> eval;
    std::unique_ptr<runtime::SplitSystem> sys;
    std::unique_ptr<runtime::Centralized> central;
    if (point.has_link) {
      runtime::SystemOptions opt;
      opt.r = point.r;
      if (c.oac.design == "auto") {
        const nn::Layer& mix = net.layer(net.split_points.front());
        Index n_in = 0, n_out = 0;
        if (auto* d = dynamic_cast<const nn::Dense*>(&mix)) {
          n_in = d->weight().value.cols();
          n_out = d->weight().value.rows();
        } else if (auto* cv = dynamic_cast<const nn::Conv2d*>(&mix)) {
          n_in = cv->in_channels();
          n_out = cv->out_channels();
        }
        opt.design = auto_design(n_in, n_out, point.r, c.channel.n_tx, c.channel.n_rx);
      } else {
        opt.design = oac::OacDesign::parse(c.oac.design);
      }
      opt.init = c.baseline == Baseline::ideal ? runtime::InitMode::ideal : c.oac.init;
      opt.optimizer = c.train.optimizer;
      opt.lr = c.train.lr;
      opt.alpha = c.train.alpha;
      opt.comm.enabled = c.oac.comm_loss;
      opt.rescale_forward = c.oac.rescale_forward;
      opt.rescale_backward = c.oac.rescale_backward;
      opt.rho = c.channel.rho;
      opt.seed = seed;
      std::vector<NoiseModel> noises;
      for (const ChannelState& ch : channels) {
        noises.push_back(c.oac.noise.kind == NoiseConfig::Kind::snr_db ? NoiseModel::from_snr_db(ch, point.noise) : NoiseModel::from_power(point.noise));
      }
      sys = std::make_unique<runtime::SplitSystem>(net, channels, noises, opt);
      train = [&](const Tensor& x, const std::vector<int>& y) { return sys->train_batch(x, y); };
      eval = [&] { return sys->evaluate(data.x_test, data.y_test); };
    } else {
      central = std::make_unique<runtime::Centralized>(net, c.train.optimizer, c.train.lr);
      train = [&](const Tensor& x, const std::vector<int>& y) { return central->train_batch(x, y); };
      eval = [&] { return central->evaluate(data.x_test, data.y_test); };
    }
    Rng order(seed, runtime::streams::data);
    const std::uint64_t n_train = static_cast<std::uint64_t>(data.x_train.batch());
    std::vector<Index> rows(static_cast<std::size_t>(c.train.batch));
    std::vector<int> labels(rows.size());
    for (int step = 1; step <= c.train.steps; ++step) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i] = static_cast<Index>(order.below(n_train));
        labels[i] = data.y_train[static_cast<std::size_t>(rows[i])];
      }
      const runtime::BatchMetrics m = train(gather_rows(data.x_train, rows), labels);
      res.metrics += detail::row("train", step, m.loss, m.accuracy, m.links, n_links);
      res.steps = step;
      if (!std::isfinite(m.loss)) throw RunFailure("training loss is not finite at step " + std::to_string(step));
      if (step % c.train.eval_every == 0 || step == c.train.steps) {
        const auto e = eval();
        res.metrics += detail::row("test", step, e.loss, e.accuracy, {}, n_links);
        if (!std::isfinite(e.loss)) throw RunFailure("test loss is not finite at step " + std::to_string(step));
        res.final_accuracy = e.accuracy;
        res.final_loss = e.loss;
      }
    }
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
    res.final_accuracy = std::nan("");
    res.final_loss = std::nan("");
  }
  return res;
}

struct SummaryRow {
  SweepPoint point;
  std::size_t completed = 0, failed = 0;
  double mean_accuracy = std::nan("");
  double std_accuracy = std::nan("");
};

// Mean and sample standard deviation of final accuracies over completed runs.
inline std::vector<SummaryRow> summarize(const std::vector<SweepPoint>& points, const std::vector<RunResult>& runs) {
  std::vector<SummaryRow> out;
  for (const SweepPoint& p : points) {
    SummaryRow s;
    s.point = p;
    std::vector<double> acc;
    for (const RunResult& r : runs) {
      if (r.point.key() != p.key()) continue;
      if (r.ok) {
        acc.push_back(r.final_accuracy);
      } else {
        ++s.failed;
      }
    }
    s.completed = acc.size();
    if (!acc.empty()) {
      double mean = 0.0;
      for (double a : acc) mean += a;
      mean /= static_cast<double>(acc.size());
      double var = 0.0;
      for (double a : acc) var += (a - mean) * (a - mean);
      s.mean_accuracy = mean;
      s.std_accuracy = acc.size() > 1 ? std::sqrt(var / static_cast<double>(acc.size() - 1)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

struct ExperimentReport {
  std::vector<SweepPoint> points;
  std::vector<RunResult> runs;
  std::vector<SummaryRow> summary;
  std::string summary_csv;
  std::string runs_csv;
};

inline std::string design_label(const ExperimentConfig& c, const SweepPoint& p) {
  if (!p.has_link) return "none";
  if (c.oac.design != "auto") return c.oac.design;
  // Both built-in networks have square mixing layers.
  return "auto:" + auto_design(1, 1, p.r, c.channel.n_tx, c.channel.n_rx).name();
}

inline std::string summary_csv(const ExperimentConfig& c, const std::vector<SummaryRow>& rows) {
  std::string s = "setting,baseline,design,r,noise_kind,noise,completed,failed,mean_accuracy,std_accuracy\n";
  for (const SummaryRow& r : rows) {
    s += to_string(c.setting) + "," + to_string(c.baseline) + "," + design_label(c, r.point) + "," +
         (r.point.has_link ? std::to_string(r.point.r) : std::string()) + "," + noise_kind(c) + "," +
         (r.point.has_link ? fmt(r.point.noise) : std::string()) + "," + std::to_string(r.completed) + "," + std::to_string(r.failed) + "," +
         fmt(r.mean_accuracy) + "," + fmt(r.std_accuracy) + "\n";
  }
  return s;
}

inline std::string runs_csv(const ExperimentConfig& c, const std::vector<RunResult>& runs) {
  std::string s = "r,noise_kind,noise,seed,status,final_accuracy,final_loss,steps,metrics_file,error\n";
  for (const RunResult& r : runs) {
    std::string err = r.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
    }
    s += (r.point.has_link ? std::to_string(r.point.r) : std::string()) + "," + noise_kind(c) + "," +
         (r.point.has_link ? fmt(r.point.noise) : std::string()) + "," + std::to_string(r.seed) + "," + (r.ok ? "ok" : "failed") + "," +
         fmt(r.final_accuracy) + "," + fmt(r.final_loss) + "," + std::to_string(r.steps) + "," + r.file + "," + err + "\n";
  }
  return s;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("out_dir", "cannot write '" + p.string() + "'");
  out << text;
}

// Runs every (point, seed) pair, in a pool of `workers` threads. Results are
// collected in sweep order, so the output does not depend on scheduling.
// Files are written when `out_dir` is nonempty.
inline ExperimentReport run_experiment(const ExperimentConfig& c, const std::string& out_dir = "",
                                       const std::function<void(const RunResult&)>& progress = {}) {
  validate(c);
  const Dataset data = generate_dataset(c.dataset, c.dataset_seed);
  const std::vector<ChannelState> channels = make_channels(c);
  ExperimentReport rep;
  rep.points = sweep_points(c);
  struct Job {
    std::size_t point;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < rep.points.size(); ++p) {
    for (std::uint64_t seed : c.seeds) jobs.push_back({p, seed});
  }
  rep.runs.resize(jobs.size());
  unsigned workers = c.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : static_cast<unsigned>(c.workers);
  workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      rep.runs[i] = run_single(c, data, channels, rep.points[jobs[i].point], jobs[i].seed);
      if (progress) {
        std::lock_guard<std::mutex> lock(report_mutex);
        progress(rep.runs[i]);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  rep.summary = summarize(rep.points, rep.runs);
  rep.summary_csv = summary_csv(c, rep.summary);
  rep.runs_csv = runs_csv(c, rep.runs);
  if (!out_dir.empty()) {
    const std::filesystem::path root(out_dir);
    for (const RunResult& r : rep.runs) write_text(root / r.file, r.metrics);
    write_text(root / "summary.csv", rep.summary_csv);
    write_text(root / "runs.csv", rep.runs_csv);
    write_text(root / "config.json", config_to_json(c).dump(2) + "\n");
    write_text(root / "channels.json", channels_to_json(channels).dump(2) + "\n");
  }
  return rep;
}

}  // namespace oacsplit::bench
