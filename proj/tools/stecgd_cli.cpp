// stecgd: dataset generation, training, sweeps, surrogate validation, lemma
// checks and plotting.
//
// Exit codes: 0 success, 1 a check or validation failed, 2 bad config or
// malformed input, 3 weight initialization failed, 4 I/O failure.
// Errors print one line "error: <kind>: <message>" on stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "stecgd/stecgd.hpp"

namespace fs = std::filesystem;
using namespace stecgd;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kBadInput = 2, kInitFailed = 3, kIoFailed = 4 };

int fail(const char* kind, const std::string& msg, int code) {
  std::string flat = msg;
  for (char& c : flat) {
    if (c == '\n') c = ' ';
  }
  std::cerr << "error: " << kind << ": " << flat << '\n';
  return code;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw std::ios_base::failure("failed writing '" + path.string() + "'");
}

// Flags shared by train and sweep; each one overrides the config file field
// when given on the command line.
struct Overrides {
  std::string config;
  std::string data, out_dir, ste, theta;
  double noise = 0, eta = 0, momentum = 0, tol_grad = 0;
  long max_iters = 0, log_every = 0;
  std::uint64_t seed = 0;
  int k = 0, n = 0, bits = 0;
  unsigned workers = 0;
  bool certify = false;

  void attach(CLI::App* app) {
    app->add_option("config", config, "JSON config file (optional)");
    app->add_option("--data", data, "Train on a dataset file instead of generating one");
    app->add_option("--out-dir", out_dir, "Output directory");
    app->add_option("--ste", ste, "relu | reverse_exp | log_tailed_relu");
    app->add_option("--theta", theta, "Subspace angle, radians or e.g. pi/4");
    app->add_option("--noise", noise, "Gaussian noise sigma");
    app->add_option("--seed", seed, "Seed for data noise and weight init");
    app->add_option("--eta", eta, "Learning rate");
    app->add_option("--momentum", momentum, "Heavy-ball momentum in [0, 1)");
    app->add_option("--tol-grad", tol_grad, "Gradient-norm stopping tolerance");
    app->add_option("--max-iters", max_iters, "Iteration budget");
    app->add_option("--log-every", log_every, "Trace logging interval");
    app->add_option("-k,--units", k, "Hidden units");
    app->add_option("-n,--classes", n, "Classes");
    app->add_option("--bits", bits, "Activation bit-width");
    app->add_option("--workers", workers, "Worker threads");
    app->add_flag("--certify", certify, "Log every iteration for lemma checks");
  }

  ExperimentConfig resolve(CLI::App* app) const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
    auto given = [&](const char* name) { return app->count(name) > 0; };
    if (given("--data")) c.data_path = data;
    if (given("--out-dir")) c.out_dir = out_dir;
    if (given("--ste")) c.ste = parse_ste_kind(ste);
    if (given("--theta")) {
      c.theta = parse_angle(nlohmann::json(theta));
      c.thetas = {c.theta};
    }
    if (given("--noise")) {
      c.noise = noise;
      c.noises = {noise};
    }
    if (given("--seed")) {
      c.train.seed = seed;
      c.seeds = {seed};
    }
    if (given("--eta")) c.train.eta = eta;
    if (given("--momentum")) c.train.momentum = momentum;
    if (given("--tol-grad")) c.train.tol_grad = tol_grad;
    if (given("--max-iters")) c.train.max_iters = max_iters;
    if (given("--log-every")) c.train.log_every = log_every;
    if (given("--units")) c.k = k;
    if (given("--classes")) c.n = n;
    if (given("--bits")) c.bits = bits;
    if (given("--workers")) {
      c.train.workers = workers;
      c.sweep_workers = workers;
    }
    if (certify) c.train.certify = true;
    return c;
  }
};

int cmd_gen_data(double noise, std::uint64_t seed, const std::string& theta, int classes,
                 const std::string& out) {
  const SubspaceSpec spec = classes == 2
                                ? make_angled_pair(parse_angle(nlohmann::json(theta)), seed, noise)
                                : make_orthogonal(classes, seed, noise);
  const Dataset data = generate(spec);
  save_dataset(data, out);
  std::cout << "wrote " << data.size() << " samples (d=" << spec.ambient_dim
            << ", n=" << spec.classes << ") to " << out << '\n';
  return kOk;
}

int cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset data;
  if (!cfg.data_path.empty()) {
    data = load_dataset(cfg.data_path);
    if (data.classes() != cfg.n) {
      throw ConfigError("dataset has " + std::to_string(data.classes()) +
                        " classes, config says n=" + std::to_string(cfg.n));
    }
  } else {
    data = generate(make_run_spec(cfg, cfg.theta, cfg.noise, cfg.train.seed));
  }
  if (data.empty()) throw ConfigError("dataset is empty");
  const Network init = make_initial_network(cfg, data, cfg.train.seed);
  const TrainResult res = train(init, data, cfg.ste_spec(), cfg.train);

  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);
  std::ostringstream trace, ckpt;
  write_trace(trace, res.trace);
  write_checkpoint(ckpt, res.network);
  write_file(dir / "trace.jsonl", trace.str());
  write_file(dir / "checkpoint.json", ckpt.str());
  if (cfg.data_path.empty()) save_dataset(data, (dir / "data.csv").string());

  const auto& tr = res.trace;
  std::cout << "loss=" << text::format_double(res.final_eval.loss)
            << " accuracy=" << text::format_double(res.final_eval.accuracy)
            << " iterations=" << tr.iterations << " converged_at="
            << (tr.converged_at ? std::to_string(*tr.converged_at) : "none")
            << " termination=" << to_string(tr.termination)
            << " weight_norm=" << text::format_double(res.network.weight_norm()) << '\n';
  return kOk;
}

int cmd_sweep(const ExperimentConfig& cfg) {
  const auto rows = run_sweep(cfg);
  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);
  std::ostringstream csv, summary;
  write_sweep_csv(csv, rows);
  const auto groups = summarize_sweep(rows);
  write_sweep_summary(summary, groups);
  write_file(dir / "sweep.csv", csv.str());
  write_file(dir / "sweep_summary.csv", summary.str());
  for (double nz : cfg.noises) {
    std::vector<SweepRow> sel;
    for (const auto& r : rows) {
      if (r.noise == nz) sel.push_back(r);
    }
    char name[64];
    std::snprintf(name, sizeof name, "sweep_noise_%g.svg", nz);
    write_file(dir / name, svg::render_sweep(sel));
  }
  std::size_t converged = 0;
  for (const auto& r : rows) converged += r.converged() ? 1 : 0;
  std::cout << "runs=" << rows.size() << " converged=" << converged << " out=" << cfg.out_dir
            << '\n';
  for (const auto& g : groups) {
    std::printf("noise=%-6g theta=%-8.5f converged=%zu/%zu median_iters=%-8g median_norm=%.4f\n",
                g.noise, g.theta, g.converged, g.runs, g.iters.median, g.weight_norm.median);
  }
  return kOk;
}

int cmd_validate_ste(const std::string& kind, int bits, double domain, double delta,
                     double delta_tilde, bool has_delta, bool has_delta_tilde, int resolution) {
  SteSpec s = SteSpec::make(parse_ste_kind(kind), Quantizer(bits), domain);
  if (has_delta) s.delta = delta;
  if (has_delta_tilde) s.delta_tilde = delta_tilde;
  const auto report = validate_ste(s, resolution);
  std::printf("surrogate=%s q_b=%g delta=%.6g delta_tilde=%.6g domain=%g grid=%d\n",
              std::string(to_string(s.kind)).c_str(), s.q_b, s.delta, s.delta_tilde,
              s.domain_bound, resolution);
  std::printf("%-26s %-6s %-14s %s\n", "property", "status", "worst_x", "violation");
  for (const auto& c : report.checks) {
    std::printf("%-26s %-6s %-14.8g %.6g\n", c.name.c_str(), c.passed ? "pass" : "FAIL",
                c.worst_x, c.worst_violation);
  }
  return report.passed() ? kOk : kCheckFailed;
}

int cmd_check(const std::string& trace_path, const std::string& ckpt_path,
              const std::string& data_path, const std::string& kind, double domain) {
  const Network net = load_checkpoint(ckpt_path);
  const Dataset data = load_dataset(data_path);
  const TrainTrace trace = load_trace(trace_path);
  if (data.dim() != net.input_dim() || data.classes() != net.classes()) {
    throw ConfigError("checkpoint and dataset shapes disagree");
  }
  const SteSpec ste = SteSpec::make(parse_ste_kind(kind), net.quantizer(), domain);

  std::vector<LemmaReport> reports;
  auto guarded = [&](const char* name, auto&& fn) {
    try {
      reports.push_back(fn());
    } catch (const DiagnosticUnavailable& e) {
      LemmaReport r;
      r.name = name;
      r.status = CheckStatus::NotApplicable;
      r.detail = e.what();
      reports.push_back(r);
    }
  };
  guarded("norm_monotonicity",
          [&] { return check_monotonicity(trace, net.second_layer(), data.spec); });
  guarded("decoupling", [&] { return check_decoupling(net, data, ste); });
  guarded("region_probability_bound", [&] { return check_region_bound(net, data, ste); });
  guarded("zero_gradient_zero_loss", [&] { return check_zero_grad_zero_loss(net, data, ste); });

  std::printf("%-26s %-15s %-12s %-6s %-5s %-5s %s\n", "check", "status", "violation", "iter",
              "unit", "class", "detail");
  bool any_failed = false;
  for (const auto& r : reports) {
    any_failed = any_failed || r.failed();
    std::printf("%-26s %-15s %-12.4g %-6ld %-5d %-5d %s\n", r.name.c_str(),
                std::string(to_string(r.status)).c_str(), r.worst_violation, r.iteration, r.unit,
                r.cls, r.detail.c_str());
  }
  std::printf("max_weight_norm=%.6g termination=%s iterations=%ld\n", trace.max_weight_norm,
              std::string(to_string(trace.termination)).c_str(), trace.iterations);
  return any_failed ? kCheckFailed : kOk;
}

int cmd_plot(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + in_path + "'");
  const int first = in.peek();
  std::string svg_text;
  if (first == '{') {
    svg_text = svg::render_trace(read_trace(in));
  } else {
    svg_text = svg::render_sweep(read_sweep_csv(in));
  }
  write_file(out_path, svg_text);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse gradient descent with straight-through estimators"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a subspace dataset");
  std::string gen_theta = "pi/2", gen_out;
  double gen_noise = 0.0;
  std::uint64_t gen_seed = 0;
  int gen_classes = 2;
  gen->add_option("--theta", gen_theta, "Angle between the two class planes (n = 2 only)");
  gen->add_option("--noise", gen_noise, "Gaussian noise sigma per coordinate");
  gen->add_option("--seed", gen_seed, "Noise seed");
  gen->add_option("--classes", gen_classes, "Classes; n != 2 uses orthogonal coordinate planes");
  gen->add_option("--out", gen_out, "Output dataset file")->required();

  auto* trn = app.add_subcommand("train", "Train with coarse gradient descent");
  Overrides train_opts;
  train_opts.attach(trn);

  auto* swp = app.add_subcommand("sweep", "Angle / noise / seed sweep");
  Overrides sweep_opts;
  sweep_opts.attach(swp);

  auto* val = app.add_subcommand("validate-ste", "Check a surrogate against its slope bounds");
  std::string val_kind = "relu";
  int val_bits = 4, val_res = 2001;
  double val_domain = 10.0, val_delta = 0.0, val_delta_tilde = 0.0;
  val->add_option("--ste", val_kind, "relu | reverse_exp | log_tailed_relu");
  val->add_option("--bits", val_bits, "Activation bit-width (sets q_b)");
  val->add_option("--domain", val_domain, "Input magnitude bound M");
  auto* opt_delta = val->add_option("--delta", val_delta, "Declared lower slope bound");
  auto* opt_delta_t = val->add_option("--delta-tilde", val_delta_tilde, "Declared upper slope bound");
  val->add_option("--resolution", val_res, "Grid points over [-M, M]");

  auto* chk = app.add_subcommand("check", "Run lemma checks on a trained model");
  std::string chk_trace, chk_ckpt, chk_data, chk_ste = "relu";
  double chk_domain = 100.0;
  chk->add_option("--trace", chk_trace, "Trace JSONL")->required();
  chk->add_option("--checkpoint", chk_ckpt, "Checkpoint JSON")->required();
  chk->add_option("--data", chk_data, "Dataset file")->required();
  chk->add_option("--ste", chk_ste, "Surrogate used in training");
  chk->add_option("--domain", chk_domain, "Pre-activation bound for the surrogate");

  auto* plt = app.add_subcommand("plot", "Render a sweep CSV or trace JSONL as SVG");
  std::string plot_in, plot_out;
  plt->add_option("input", plot_in, "sweep.csv or trace.jsonl")->required();
  plt->add_option("output", plot_out, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), kBadInput);
  }

  try {
    if (*gen) return cmd_gen_data(gen_noise, gen_seed, gen_theta, gen_classes, gen_out);
    if (*trn) return cmd_train(train_opts.resolve(trn));
    if (*swp) return cmd_sweep(sweep_opts.resolve(swp));
    if (*val) {
      return cmd_validate_ste(val_kind, val_bits, val_domain, val_delta, val_delta_tilde,
                              opt_delta->count() > 0, opt_delta_t->count() > 0, val_res);
    }
    if (*chk) return cmd_check(chk_trace, chk_ckpt, chk_data, chk_ste, chk_domain);
    if (*plt) return cmd_plot(plot_in, plot_out);
  } catch (const ParseError& e) {
    return fail("parse", e.what(), kBadInput);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), kBadInput);
  } catch (const InitializationError& e) {
    return fail("init", e.what(), kInitFailed);
  } catch (const DiagnosticUnavailable& e) {
    return fail("diagnostic", e.what(), kBadInput);
  } catch (const std::exception& e) {
    return fail("io", e.what(), kIoFailed);
  }
  return kOk;
}
