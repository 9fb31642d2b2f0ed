#pragma once

// Experiment configuration, single training runs and the angle/noise/seed
// sweep, plus the sweep CSV and its box-plot statistics.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "stecgd/coarse_grad.hpp"
#include "stecgd/errors.hpp"
#include "stecgd/network.hpp"
#include "stecgd/parallel.hpp"
#include "stecgd/quantization.hpp"
#include "stecgd/subspace_data.hpp"
#include "stecgd/text_io.hpp"

namespace stecgd {

/// Parses an angle given as radians or as "pi/8", "3pi/8", "3*pi/8", "pi".
inline double parse_angle(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw ConfigError("angle must be a number or a string like \"pi/8\"");
  std::string s = v.get<std::string>();
  s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
  s.erase(std::remove(s.begin(), s.end(), '*'), s.end());
  const auto pos = s.find("pi");
  if (pos == std::string::npos) {
    try {
      std::size_t used = 0;
      const double x = std::stod(s, &used);
      if (used == s.size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("cannot parse angle '" + v.get<std::string>() + "'");
  }
  double num = 1.0;
  double den = 1.0;
  try {
    if (pos > 0) num = std::stod(s.substr(0, pos));
    const auto rest = s.substr(pos + 2);
    if (!rest.empty()) {
      if (rest[0] != '/') throw ConfigError("");
      den = std::stod(rest.substr(1));
    }
  } catch (const std::exception&) {
    throw ConfigError("cannot parse angle '" + v.get<std::string>() + "'");
  }
  if (num == 1.0 && den == 2.0) return std::numbers::pi / 2;  // exact orthogonal case
  return num * std::numbers::pi / den;
}

struct ExperimentConfig {
  TrainConfig train;
  SteKind ste = SteKind::ReLU;
  // Pre-activation magnitude on which the surrogate's slope bounds are declared.
  double ste_domain = 100.0;
  int bits = 4;
  int k = 24;
  int n = 2;
  double value = 0.5;
  std::string layout;  // "angled" or "orthogonal"; empty picks angled for n = 2
  double theta = std::numbers::pi / 2;
  double noise = 0.0;
  std::vector<double> thetas;
  std::vector<double> noises{0.0, 0.01, 0.05};
  std::vector<std::uint64_t> seeds;
  std::string data_path;
  std::string out_dir = "out";
  unsigned sweep_workers = 0;  // 0 = hardware concurrency

  ExperimentConfig() {
    for (int m = 1; m <= 8; ++m) thetas.push_back(m == 8 ? std::numbers::pi / 2 : m * std::numbers::pi / 16);
    for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
  }

  bool angled() const {
    if (layout.empty()) return n == 2;
    return layout == "angled";
  }

  void validate() const {
    train.validate();
    if (bits < 1 || bits > 30) throw ConfigError("bits must lie in [1, 30]");
    if (n < 2) throw ConfigError("need at least two classes");
    if (k < n) {
      throw ConfigError("k=" + std::to_string(k) + " < n=" + std::to_string(n) +
                        ": every class needs its own hidden unit");
    }
    if (!(value > 0.0 && value < 1.0)) throw ConfigError("value must lie in (0, 1)");
    if (!layout.empty() && layout != "angled" && layout != "orthogonal") {
      throw ConfigError("layout must be 'angled' or 'orthogonal'");
    }
    if (angled() && n != 2) throw ConfigError("the angled layout has exactly two classes");
    if (thetas.empty()) throw ConfigError("theta list must be non-empty");
    if (seeds.empty()) throw ConfigError("seed list must be non-empty");
    if (noises.empty()) throw ConfigError("noise list must be non-empty");
    if (!(ste_domain > 0.0)) throw ConfigError("ste_domain must be positive");
  }

  SteSpec ste_spec() const { return SteSpec::make(ste, Quantizer(bits), ste_domain); }
};

/// Reads a JSON config; unknown keys are rejected.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "eta") c.train.eta = v.get<double>();
      else if (key == "max_iters") c.train.max_iters = v.get<long>();
      else if (key == "momentum") c.train.momentum = v.get<double>();
      else if (key == "tol_grad") c.train.tol_grad = v.get<double>();
      else if (key == "seed") c.train.seed = v.get<std::uint64_t>();
      else if (key == "init_scale") c.train.init_scale = v.get<double>();
      else if (key == "log_every") c.train.log_every = v.get<long>();
      else if (key == "batch_size") c.train.batch_size = v.get<std::size_t>();
      else if (key == "lr_decay_factor") c.train.lr_decay_factor = v.get<double>();
      else if (key == "lr_decay_epochs") c.train.lr_decay_epochs = v.get<std::vector<long>>();
      else if (key == "certify") c.train.certify = v.get<bool>();
      else if (key == "workers") c.train.workers = v.get<unsigned>();
      else if (key == "ste") c.ste = parse_ste_kind(v.get<std::string>());
      else if (key == "ste_domain") c.ste_domain = v.get<double>();
      else if (key == "bits") c.bits = v.get<int>();
      else if (key == "k") c.k = v.get<int>();
      else if (key == "n") c.n = v.get<int>();
      else if (key == "value") c.value = v.get<double>();
      else if (key == "layout") c.layout = v.get<std::string>();
      else if (key == "theta") c.theta = parse_angle(v);
      else if (key == "noise") c.noise = v.get<double>();
      else if (key == "thetas") {
        c.thetas.clear();
        for (const auto& t : v) c.thetas.push_back(parse_angle(t));
      } else if (key == "noises") c.noises = v.get<std::vector<double>>();
      else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "data") c.data_path = v.get<std::string>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else if (key == "sweep_workers") c.sweep_workers = v.get<unsigned>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment_config(doc);
}

/// Subspace layout for one run of the experiment.
inline SubspaceSpec make_run_spec(const ExperimentConfig& cfg, double theta, double noise,
                                  std::uint64_t seed) {
  if (cfg.angled()) return make_angled_pair(theta, seed, noise);
  return make_orthogonal(cfg.n, seed, noise);
}

/// Randomly initialized network for `data`; the non-zero projection condition
/// is enforced when the data carry subspace bases.
inline Network make_initial_network(const ExperimentConfig& cfg, const Dataset& data,
                                    std::uint64_t seed) {
  std::optional<SubspaceProjectors> proj;
  if (data.spec.has_bases()) proj.emplace(data.spec);
  Matrix w = init_weights(data.dim(), cfg.k, seed, cfg.train.init_scale, proj ? &*proj : nullptr);
  return Network(std::move(w), make_second_layer(cfg.n, cfg.k, cfg.value), Quantizer(cfg.bits));
}

struct RunOutcome {
  Dataset data;
  TrainResult result;
};

inline RunOutcome run_once(const ExperimentConfig& cfg, double theta, double noise,
                           std::uint64_t seed) {
  ExperimentConfig local = cfg;
  local.train.seed = seed;
  Dataset data = generate(make_run_spec(local, theta, noise, seed));
  Network net = make_initial_network(local, data, seed);
  TrainResult res = train(net, data, local.ste_spec(), local.train);
  return {std::move(data), std::move(res)};
}

struct SweepRow {
  double theta = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  long iters = 0;  // first t with zero loss, or max_iters when it never got there
  double final_loss = 0.0;
  double accuracy = 0.0;
  double weight_norm = 0.0;

  bool converged() const { return final_loss == 0.0; }
};

inline constexpr std::string_view kSweepHeader =
    "theta,noise,seed,iters,final_loss,accuracy,weight_norm";

/// Runs every (theta, noise, seed) tuple. Rows come back in canonical
/// theta-major, then noise, then seed order whatever order runs finish in.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Job {
    double theta, noise;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double th : cfg.thetas) {
    for (double nz : cfg.noises) {
      for (auto s : cfg.seeds) jobs.push_back({th, nz, s});
    }
  }
  ExperimentConfig run_cfg = cfg;
  // Sweeps only need the final state; keep the per-run trace small.
  run_cfg.train.log_every = std::max<long>(1, cfg.train.max_iters + 1);
  run_cfg.train.certify = false;
  run_cfg.train.workers = 1;

  std::vector<SweepRow> rows(jobs.size());
  const unsigned workers =
      cfg.sweep_workers ? cfg.sweep_workers : std::max(1u, std::thread::hardware_concurrency());
  parallel_for(jobs.size(), workers, [&](std::size_t idx) {
    const Job& job = jobs[idx];
    SweepRow row{job.theta, job.noise, job.seed};
    try {
      const auto out = run_once(run_cfg, job.theta, job.noise, job.seed);
      const auto& tr = out.result.trace;
      row.iters = tr.converged_at ? *tr.converged_at : cfg.train.max_iters;
      row.final_loss = out.result.final_eval.loss;
      row.accuracy = out.result.final_eval.accuracy;
      row.weight_norm = out.result.network.weight_norm();
    } catch (const InitializationError&) {
      row.iters = cfg.train.max_iters;
      row.final_loss = std::numeric_limits<double>::quiet_NaN();
      row.accuracy = 0.0;
      row.weight_norm = std::numeric_limits<double>::quiet_NaN();
    }
    rows[idx] = row;
  });
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepHeader << '\n';
  for (const auto& r : rows) {
    out << text::format_double(r.theta) << ',' << text::format_double(r.noise) << ',' << r.seed
        << ',' << r.iters << ',' << text::format_double(r.final_loss) << ','
        << text::format_double(r.accuracy) << ',' << text::format_double(r.weight_norm) << '\n';
  }
}

/// Row numbers in errors count the header as row 1.
inline std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) {
    throw ParseError("expected header '" + std::string(kSweepHeader) + "'", 1);
  }
  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  auto number = [](std::string_view s, std::size_t ln) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    return text::parse_double(s, ln);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != 7) {
      throw ParseError("expected 7 fields, got " + std::to_string(cells.size()), lineno);
    }
    SweepRow r;
    r.theta = number(cells[0], lineno);
    r.noise = number(cells[1], lineno);
    r.seed = text::parse_int<std::uint64_t>(cells[2], lineno);
    r.iters = text::parse_int<long>(cells[3], lineno);
    r.final_loss = number(cells[4], lineno);
    r.accuracy = number(cells[5], lineno);
    r.weight_norm = number(cells[6], lineno);
    rows.push_back(r);
  }
  if (rows.empty()) throw ParseError("no data rows", lineno + 1);
  return rows;
}

/// Five-number summary (linearly interpolated quartiles) plus the median
/// absolute deviation.
struct BoxStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mad = 0;
  std::size_t count = 0;
};

inline double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline BoxStats box_stats(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double x) { return std::isnan(x); }),
               values.end());
  BoxStats b;
  b.count = values.size();
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    b = {nan, nan, nan, nan, nan, nan, 0};
    return b;
  }
  std::sort(values.begin(), values.end());
  b.min = values.front();
  b.max = values.back();
  b.q1 = quantile_sorted(values, 0.25);
  b.median = quantile_sorted(values, 0.5);
  b.q3 = quantile_sorted(values, 0.75);
  std::vector<double> dev;
  for (double x : values) dev.push_back(std::abs(x - b.median));
  std::sort(dev.begin(), dev.end());
  b.mad = quantile_sorted(dev, 0.5);
  return b;
}

struct SweepGroup {
  double noise = 0.0;
  double theta = 0.0;
  BoxStats iters;
  BoxStats weight_norm;
  std::size_t runs = 0;
  std::size_t converged = 0;
};

/// Groups rows by (noise, theta) in first-appearance order of each value.
inline std::vector<SweepGroup> summarize_sweep(const std::vector<SweepRow>& rows) {
  std::vector<double> noises, thetas;
  for (const auto& r : rows) {
    if (std::find(noises.begin(), noises.end(), r.noise) == noises.end()) noises.push_back(r.noise);
    if (std::find(thetas.begin(), thetas.end(), r.theta) == thetas.end()) thetas.push_back(r.theta);
  }
  std::vector<SweepGroup> out;
  for (double nz : noises) {
    for (double th : thetas) {
      SweepGroup g;
      g.noise = nz;
      g.theta = th;
      std::vector<double> it, wn;
      for (const auto& r : rows) {
        if (r.noise != nz || r.theta != th) continue;
        ++g.runs;
        if (r.converged()) ++g.converged;
        it.push_back(static_cast<double>(r.iters));
        wn.push_back(r.weight_norm);
      }
      if (g.runs == 0) continue;
      g.iters = box_stats(std::move(it));
      g.weight_norm = box_stats(std::move(wn));
      out.push_back(g);
    }
  }
  return out;
}

inline void write_sweep_summary(std::ostream& out, const std::vector<SweepGroup>& groups) {
  out << "noise,theta,metric,min,q1,median,q3,max,mad,runs,converged\n";
  for (const auto& g : groups) {
    for (int m = 0; m < 2; ++m) {
      const BoxStats& b = m == 0 ? g.iters : g.weight_norm;
      out << text::format_double(g.noise) << ',' << text::format_double(g.theta) << ','
          << (m == 0 ? "iters" : "weight_norm") << ',' << text::format_double(b.min) << ','
          << text::format_double(b.q1) << ',' << text::format_double(b.median) << ','
          << text::format_double(b.q3) << ',' << text::format_double(b.max) << ','
          << text::format_double(b.mad) << ',' << g.runs << ',' << g.converged << '\n';
    }
  }
}

}  // namespace stecgd
