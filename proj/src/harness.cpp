#include "sdprop/harness.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "sdprop/error.hpp"
#include "sdprop/rng.hpp"

namespace fs = std::filesystem;

namespace sdprop {

namespace {

// Independent randomness streams hanging off each run's seed.
constexpr std::uint64_t kProblemStream = 11;  // gradient noise
constexpr std::uint64_t kInitStream = 12;     // network init
constexpr std::uint64_t kShuffleStream = 13;  // batch order

// The synthetic dataset is shared by every run and every experiment, so its
// seed is a fixed constant rather than something derived from the run seed.
constexpr std::uint64_t kDatasetSeed = 0xDA7A5EED;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  double out{};
  const char* begin = value.data();
  const char* end = begin + value.size();
  auto [p, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || p != end) {
    throw ConfigError("--" + key + ": cannot parse '" + value + "' as a number");
  }
  return out;
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
  std::int64_t out{};
  const char* begin = value.data();
  const char* end = begin + value.size();
  auto [p, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || p != end) {
    throw ConfigError("--" + key + ": cannot parse '" + value +
                      "' as an integer");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  const std::int64_t v = parse_i64(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("--" + key + ": " + value + " is out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out{};
  const char* begin = value.data();
  const char* end = begin + value.size();
  auto [p, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || p != end) {
    throw ConfigError("--" + key + ": cannot parse '" + value +
                      "' as an unsigned integer");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("--" + key + ": expected true/false, got '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& key,
                                      const std::string& value) {
  std::vector<double> out;
  std::string token;
  std::stringstream ss(value);
  while (std::getline(ss, token, ',')) {
    out.push_back(parse_double(key, trim(token)));
  }
  if (out.empty()) {
    throw ConfigError("--" + key + ": expected a comma-separated list of numbers");
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string token;
  std::stringstream ss(line);
  while (std::getline(ss, token, ',')) fields.push_back(token);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

void write_file(const fs::path& path,
                const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  body(out);
  out.flush();
  if (!out) throw Error("failed while writing " + path.string());
}

DecaySchedule& ensure_decay(ExperimentConfig& config) {
  if (!config.optimizer.decay) config.optimizer.decay = DecaySchedule{};
  return *config.optimizer.decay;
}

std::unique_ptr<Problem> make_problem(
    const ProblemSpec& spec, std::uint64_t run_seed,
    const std::shared_ptr<const Dataset>& dataset) {
  if (spec.name == "quadratic") {
    const auto d = static_cast<Eigen::Index>(spec.curvatures.size());
    if (d == 0) throw ConfigError("quadratic needs at least one curvature");
    Eigen::VectorXd a(d), theta0(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double ai = spec.curvatures[static_cast<std::size_t>(i)];
      if (!(ai > 0.0)) throw ConfigError("curvatures must be positive");
      a(i) = ai;
      theta0(i) = spec.theta0_scale / std::sqrt(ai);
    }
    const double noise = spec.noise.value_or(1.0);
    if (!(noise >= 0.0)) throw ConfigError("--noise must be >= 0");
    return std::make_unique<NoisyQuadratic>(a, noise, std::move(theta0),
                                            derive_seed(run_seed, kProblemStream));
  }
  if (spec.name == "rosenbrock") {
    const double noise = spec.noise.value_or(0.1);
    if (!(noise >= 0.0)) throw ConfigError("--noise must be >= 0");
    return std::make_unique<NoisyRosenbrock>(noise,
                                             derive_seed(run_seed, kProblemStream));
  }
  if (spec.name == "mlp") {
    if (!dataset) throw ConfigError("mlp problem needs a dataset");
    if (spec.hidden_layers < 0) throw ConfigError("--hidden-layers must be >= 0");
    if (spec.hidden_layers > 0 && spec.hidden_units < 1) {
      throw ConfigError("--hidden-units must be >= 1");
    }
    if (!(spec.init_stddev >= 0.0)) throw ConfigError("--init-stddev must be >= 0");
    std::vector<int> hidden(static_cast<std::size_t>(spec.hidden_layers),
                            spec.hidden_units);
    InitSpec init;
    init.mean = 0.0;
    init.stddev = spec.init_stddev;
    init.seed = derive_seed(run_seed, kInitStream);
    return std::make_unique<ClassificationProblem>(dataset, std::move(hidden),
                                                   init);
  }
  throw ConfigError("unknown problem '" + spec.name +
                    "' (expected quadratic, rosenbrock, or mlp)");
}

void validate_common(const ExperimentConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("--batch-size must be >= 1");
  if (cfg.epochs < 0) throw ConfigError("--epochs must be >= 0");
  if (cfg.runs < 1) throw ConfigError("--runs must be >= 1");
  if (cfg.warmup_steps < 0) throw ConfigError("--warmup must be >= 0");
  if (cfg.threads < 0) throw ConfigError("--threads must be >= 0");
  if (cfg.problem.name != "mlp" && cfg.steps_per_epoch < 1) {
    throw ConfigError("--steps-per-epoch must be >= 1");
  }
}

struct RunClock {
  std::chrono::steady_clock::time_point start;
  bool enabled;
  double ms() const {
    if (!enabled) return 0.0;
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

RunResult single_run(const ExperimentConfig& cfg, const OptimizerConfig& opt,
                     int run_index, std::uint64_t run_seed, Problem& problem,
                     std::ostream* log) {
  RunResult rr;
  rr.run = run_index;

  BatchSampler sampler(cfg.batch_size, derive_seed(run_seed, kShuffleStream));
  const Eigen::Index n = problem.num_examples();
  const bool dataset_backed = n > 0;
  if (dataset_backed && cfg.batch_size > n) {
    throw ConfigError("batch size " + std::to_string(cfg.batch_size) +
                      " exceeds the dataset size " + std::to_string(n));
  }
  const Eigen::Index steps_per_epoch =
      dataset_backed ? sampler.num_batches(n) : cfg.steps_per_epoch;

  Eigen::VectorXd theta = problem.initial_params();
  OptimizerState state = init_state(opt, theta.size());
  const RunClock clock{std::chrono::steady_clock::now(), cfg.timing};

  bool diverged = false;
  std::int64_t global_step = 0;

  // Statistics-only warmup, fed from "epochs before epoch zero" so the
  // training batches themselves are untouched by the warmup length.
  for (int w = 0; w < cfg.warmup_steps && !diverged; ++w) {
    std::vector<int> batch;
    if (dataset_backed) {
      const std::int64_t e = -1 - (w / steps_per_epoch);
      batch = sampler.batch_indices(n, e, w % steps_per_epoch);
    }
    GradSample gs = problem.sample_gradient(theta, batch);
    if (!gs.gradient.allFinite()) {
      diverged = true;
      break;
    }
    Eigen::VectorXd g = opt.clip_threshold
                            ? clip_gradient(std::move(gs.gradient),
                                            *opt.clip_threshold)
                            : std::move(gs.gradient);
    state = warm_statistics(std::move(state), g, opt);
  }

  for (int epoch = 0; epoch < cfg.epochs && !diverged; ++epoch) {
    const double rate = opt.decay
                            ? apply_decay(base_rate(opt), epoch, *opt.decay)
                            : base_rate(opt);
    const OptimizerConfig eff = with_rate(opt, rate);
    std::vector<int> perm;
    if (dataset_backed) perm = sampler.epoch_permutation(n, epoch);

    for (Eigen::Index s = 0; s < steps_per_epoch && !diverged; ++s) {
      std::vector<int> batch;
      if (dataset_backed) {
        const Eigen::Index b = s * cfg.batch_size;
        const Eigen::Index e2 = std::min<Eigen::Index>(n, b + cfg.batch_size);
        batch.assign(perm.begin() + b, perm.begin() + e2);
      }
      GradSample gs = problem.sample_gradient(theta, batch);
      if (!gs.gradient.allFinite() || !std::isfinite(gs.loss)) {
        diverged = true;
        break;
      }
      Eigen::VectorXd g = eff.clip_threshold
                              ? clip_gradient(std::move(gs.gradient),
                                              *eff.clip_threshold)
                              : std::move(gs.gradient);
      StepResult sr = optimizer_step(std::move(theta), g, std::move(state), eff);
      theta = std::move(sr.theta);
      state = std::move(sr.state);
      ++global_step;
      if (!theta.allFinite()) {
        diverged = true;
        break;
      }

      if (cfg.cadence == MetricsCadence::PerStep) {
        MetricsRecord rec;
        rec.run = run_index;
        rec.epoch = epoch;
        rec.step = global_step;
        // Exact objective after the step when affordable, otherwise the
        // minibatch loss the gradient was computed on.
        rec.loss = problem.cheap_loss() ? problem.evaluate(theta).loss : gs.loss;
        if (!std::isfinite(rec.loss)) {
          diverged = true;
          break;
        }
        rec.elapsed_ms = clock.ms();
        rec.rate = rate;
        rr.metrics.push_back(std::move(rec));
      }
    }
    if (diverged) break;

    if (cfg.cadence == MetricsCadence::PerEpoch) {
      const Evaluation ev = problem.evaluate(theta);
      if (!std::isfinite(ev.loss)) {
        diverged = true;
        break;
      }
      MetricsRecord rec;
      rec.run = run_index;
      rec.epoch = epoch;
      rec.step = global_step;
      rec.loss = ev.loss;
      rec.accuracy = ev.accuracy;
      rec.elapsed_ms = clock.ms();
      rec.rate = rate;
      rr.metrics.push_back(std::move(rec));
      if (log && !problem.cheap_loss()) {
        *log << "  epoch " << (epoch + 1) << "/" << cfg.epochs << ": loss "
             << format_double(ev.loss);
        if (ev.accuracy) *log << ", accuracy " << format_double(*ev.accuracy);
        *log << " (rate " << format_double(rate) << ")\n";
      }
    }
  }

  rr.status = diverged ? RunStatus::Diverged : RunStatus::Completed;
  if (diverged) {
    rr.final_loss = kInf;
  } else if (!rr.metrics.empty()) {
    rr.final_loss = rr.metrics.back().loss;
    rr.final_accuracy = rr.metrics.back().accuracy;
  } else {
    // Zero epochs: report the starting point.
    const Evaluation ev = problem.evaluate(theta);
    rr.final_loss = ev.loss;
    rr.final_accuracy = ev.accuracy;
  }
  return rr;
}

}  // namespace

std::shared_ptr<const Dataset> load_problem_dataset(const ProblemSpec& spec) {
  if (spec.name != "mlp") return nullptr;
  Dataset d;
  if (!spec.mnist_images.empty() || !spec.mnist_labels.empty()) {
    if (spec.mnist_images.empty() || spec.mnist_labels.empty()) {
      throw ConfigError("--mnist-images and --mnist-labels must be given together");
    }
    d = load_idx(spec.mnist_images, spec.mnist_labels);
  } else if (const char* dir = std::getenv("SDPROP_MNIST_DIR");
             dir != nullptr && *dir != '\0') {
    const std::string base(dir);
    d = load_idx(base + "/train-images-idx3-ubyte",
                 base + "/train-labels-idx1-ubyte");
  } else {
    if (spec.synth_n < 1 || spec.synth_d < 1 || spec.synth_k < 2) {
      throw ConfigError("synthetic dataset needs n >= 1, d >= 1, k >= 2");
    }
    d = synthetic_classification(spec.synth_n, spec.synth_d, spec.synth_k,
                                 spec.separation, kDatasetSeed);
  }
  if (spec.subset < 0) throw ConfigError("--subset must be >= 0");
  if (spec.subset > 0 && spec.subset < d.rows()) {
    d = take_prefix(d, spec.subset);
  }
  return std::make_shared<const Dataset>(std::move(d));
}

ExperimentResult run_experiment_on(const ExperimentConfig& config,
                                   std::shared_ptr<const Dataset> dataset,
                                   std::ostream* log) {
  ExperimentConfig cfg = config;
  cfg.optimizer = validated(cfg.optimizer);
  validate_common(cfg);
  if (cfg.threads > 0) Eigen::setNbThreads(cfg.threads);
  if (cfg.problem.name == "mlp" && !dataset) {
    dataset = load_problem_dataset(cfg.problem);
  }

  ExperimentResult result;
  result.config = cfg;
  for (int i = 0; i < cfg.runs; ++i) {
    const std::uint64_t run_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    std::unique_ptr<Problem> problem =
        make_problem(cfg.problem, run_seed, dataset);
    if (log && !problem->cheap_loss()) {
      *log << "run " << (i + 1) << "/" << cfg.runs << " ("
           << to_string(cfg.optimizer.kind) << ")\n";
    }
    RunResult rr = single_run(cfg, cfg.optimizer, i, run_seed, *problem, log);
    if (log) {
      *log << "run " << (i + 1) << "/" << cfg.runs << ": final loss "
           << format_double(rr.final_loss);
      if (rr.final_accuracy) {
        *log << ", accuracy " << format_double(*rr.final_accuracy);
      }
      if (rr.status == RunStatus::Diverged) *log << " [diverged]";
      *log << "\n";
    }
    result.runs.push_back(std::move(rr));
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::ostream* log) {
  return run_experiment_on(config, nullptr, log);
}

// --- serialization ----------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(const ExperimentResult& result, std::ostream& out) {
  out << kMetricsCsvHeader << '\n';
  for (const RunResult& run : result.runs) {
    for (const MetricsRecord& rec : run.metrics) {
      out << rec.run << ',' << rec.epoch << ',' << rec.step << ','
          << format_double(rec.loss) << ',';
      if (rec.accuracy) out << format_double(*rec.accuracy);
      out << ',' << format_double(rec.elapsed_ms) << ','
          << format_double(rec.rate) << '\n';
    }
  }
}

void write_metrics_jsonl(const ExperimentResult& result, std::ostream& out) {
  for (const RunResult& run : result.runs) {
    for (const MetricsRecord& rec : run.metrics) {
      out << "{\"run\":" << rec.run << ",\"epoch\":" << rec.epoch
          << ",\"step\":" << rec.step << ",\"loss\":" << format_double(rec.loss)
          << ",\"accuracy\":"
          << (rec.accuracy ? format_double(*rec.accuracy) : "null")
          << ",\"elapsed_ms\":" << format_double(rec.elapsed_ms)
          << ",\"rate\":" << format_double(rec.rate) << "}\n";
    }
  }
}

void write_config(const ExperimentConfig& config, std::ostream& out) {
  const ProblemSpec& p = config.problem;
  out << "problem=" << p.name << '\n';
  if (p.name == "quadratic") {
    out << "curvature=";
    for (std::size_t i = 0; i < p.curvatures.size(); ++i) {
      if (i) out << ',';
      out << format_double(p.curvatures[i]);
    }
    out << '\n';
    out << "theta0-scale=" << format_double(p.theta0_scale) << '\n';
    out << "noise=" << format_double(p.noise.value_or(1.0)) << '\n';
  } else if (p.name == "rosenbrock") {
    out << "noise=" << format_double(p.noise.value_or(0.1)) << '\n';
  } else if (p.name == "mlp") {
    out << "hidden-layers=" << p.hidden_layers << '\n';
    out << "hidden-units=" << p.hidden_units << '\n';
    out << "init-stddev=" << format_double(p.init_stddev) << '\n';
    if (!p.mnist_images.empty()) out << "mnist-images=" << p.mnist_images << '\n';
    if (!p.mnist_labels.empty()) out << "mnist-labels=" << p.mnist_labels << '\n';
    out << "subset=" << p.subset << '\n';
    out << "synth-n=" << p.synth_n << '\n';
    out << "synth-d=" << p.synth_d << '\n';
    out << "synth-k=" << p.synth_k << '\n';
    out << "separation=" << format_double(p.separation) << '\n';
  }

  const OptimizerConfig& o = config.optimizer;
  out << "optimizer=" << to_string(o.kind) << '\n';
  if (o.alpha) out << "alpha=" << format_double(*o.alpha) << '\n';
  if (o.rho) out << "rho=" << format_double(*o.rho) << '\n';
  if (o.beta) out << "beta=" << format_double(*o.beta) << '\n';
  if (o.beta1) out << "beta1=" << format_double(*o.beta1) << '\n';
  if (o.beta2) out << "beta2=" << format_double(*o.beta2) << '\n';
  if (o.gamma) out << "gamma=" << format_double(*o.gamma) << '\n';
  if (o.epsilon) out << "epsilon=" << format_double(*o.epsilon) << '\n';
  if (o.kind == OptimizerKind::SdPropDiag) {
    out << "bias-correction=" << (o.bias_correction ? "true" : "false") << '\n';
  }
  if (o.clip_threshold) out << "clip=" << format_double(*o.clip_threshold) << '\n';
  if (o.decay) {
    out << "decay-every=" << o.decay->every_n_epochs << '\n';
    out << "decay-factor=" << format_double(o.decay->factor) << '\n';
  }

  out << "batch-size=" << config.batch_size << '\n';
  out << "epochs=" << config.epochs << '\n';
  if (p.name != "mlp") out << "steps-per-epoch=" << config.steps_per_epoch << '\n';
  out << "seed=" << config.seed << '\n';
  out << "runs=" << config.runs << '\n';
  out << "warmup=" << config.warmup_steps << '\n';
  out << "cadence="
      << (config.cadence == MetricsCadence::PerEpoch ? "epoch" : "step") << '\n';
  out << "timing=" << (config.timing ? "true" : "false") << '\n';
  if (config.threads > 0) out << "threads=" << config.threads << '\n';
}

void apply_kv(ExperimentConfig& config, const std::string& key,
              const std::string& value) {
  ProblemSpec& p = config.problem;
  OptimizerConfig& o = config.optimizer;

  if (key == "problem") {
    if (value != "quadratic" && value != "rosenbrock" && value != "mlp") {
      throw ConfigError("--problem: unknown problem '" + value +
                        "' (expected quadratic, rosenbrock, or mlp)");
    }
    p.name = value;
  } else if (key == "curvature") {
    p.curvatures = parse_double_list(key, value);
  } else if (key == "theta0-scale") {
    p.theta0_scale = parse_double(key, value);
  } else if (key == "noise") {
    p.noise = parse_double(key, value);
  } else if (key == "hidden-layers") {
    p.hidden_layers = parse_int(key, value);
  } else if (key == "hidden-units") {
    p.hidden_units = parse_int(key, value);
  } else if (key == "init-stddev") {
    p.init_stddev = parse_double(key, value);
  } else if (key == "mnist-images") {
    p.mnist_images = value;
  } else if (key == "mnist-labels") {
    p.mnist_labels = value;
  } else if (key == "subset") {
    p.subset = parse_int(key, value);
  } else if (key == "synth-n") {
    p.synth_n = parse_int(key, value);
  } else if (key == "synth-d") {
    p.synth_d = parse_int(key, value);
  } else if (key == "synth-k") {
    p.synth_k = parse_int(key, value);
  } else if (key == "separation") {
    p.separation = parse_double(key, value);
  } else if (key == "optimizer") {
    const auto kind = optimizer_from_string(value);
    if (!kind) {
      throw ConfigError("--optimizer: unknown optimizer '" + value +
                        "' (expected sgd, rmsprop, adam, sdprop, sdprop-full)");
    }
    o.kind = *kind;
  } else if (key == "alpha") {
    o.alpha = parse_double(key, value);
  } else if (key == "rho") {
    o.rho = parse_double(key, value);
  } else if (key == "beta") {
    o.beta = parse_double(key, value);
  } else if (key == "beta1") {
    o.beta1 = parse_double(key, value);
  } else if (key == "beta2") {
    o.beta2 = parse_double(key, value);
  } else if (key == "gamma") {
    o.gamma = parse_double(key, value);
  } else if (key == "epsilon") {
    o.epsilon = parse_double(key, value);
  } else if (key == "bias-correction") {
    o.bias_correction = parse_bool(key, value);
  } else if (key == "clip") {
    o.clip_threshold = parse_double(key, value);
  } else if (key == "decay-every") {
    ensure_decay(config).every_n_epochs = parse_int(key, value);
  } else if (key == "decay-factor") {
    ensure_decay(config).factor = parse_double(key, value);
  } else if (key == "batch-size") {
    config.batch_size = parse_int(key, value);
  } else if (key == "epochs") {
    config.epochs = parse_int(key, value);
  } else if (key == "steps-per-epoch") {
    config.steps_per_epoch = parse_int(key, value);
  } else if (key == "seed") {
    config.seed = parse_u64(key, value);
  } else if (key == "runs") {
    config.runs = parse_int(key, value);
  } else if (key == "warmup") {
    config.warmup_steps = parse_int(key, value);
  } else if (key == "cadence") {
    if (value == "epoch") {
      config.cadence = MetricsCadence::PerEpoch;
    } else if (value == "step") {
      config.cadence = MetricsCadence::PerStep;
    } else {
      throw ConfigError("--cadence: expected 'epoch' or 'step', got '" + value + "'");
    }
  } else if (key == "timing") {
    config.timing = parse_bool(key, value);
  } else if (key == "out") {
    config.out_dir = value;
  } else if (key == "threads") {
    config.threads = parse_int(key, value);
  } else {
    throw ConfigError("unknown option --" + key);
  }
}

std::vector<std::pair<std::string, std::string>> read_kv_file(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value, got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    pairs.emplace_back(key, value);
  }
  return pairs;
}

std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  return read_kv_file(in);
}

std::string resolve_out_dir(const ExperimentConfig& config) {
  if (!config.out_dir.empty()) return config.out_dir;
  if (const char* env = std::getenv("SDPROP_OUT_DIR");
      env != nullptr && *env != '\0') {
    return env;
  }
  return "out";
}

std::string write_experiment(const ExperimentResult& result,
                             const std::string& dir) {
  fs::create_directories(dir);
  write_file(fs::path(dir) / "metrics.csv",
             [&](std::ostream& out) { write_metrics_csv(result, out); });
  write_file(fs::path(dir) / "metrics.jsonl",
             [&](std::ostream& out) { write_metrics_jsonl(result, out); });
  write_file(fs::path(dir) / "config.txt",
             [&](std::ostream& out) { write_config(result.config, out); });
  return dir;
}

// --- summaries ---------------------------------------------------------------

AccuracySummary summarize_runs(const ExperimentResult& result) {
  AccuracySummary s;
  for (const RunResult& run : result.runs) {
    if (run.status != RunStatus::Completed || !run.final_accuracy) continue;
    const double a = *run.final_accuracy;
    if (s.completed == 0) {
      s.best = s.worst = a;
    } else {
      s.best = std::max(s.best, a);
      s.worst = std::min(s.worst, a);
    }
    s.avg += a;
    s.completed += 1;
  }
  if (s.completed == 0) {
    throw StateError("no completed runs reported accuracy");
  }
  s.avg /= static_cast<double>(s.completed);
  return s;
}

// --- grid search ---------------------------------------------------------------

std::vector<GridAxis> protocol_grid(OptimizerKind kind) {
  const std::vector<std::string> rates = {"0.1", "0.01", "0.001"};
  const std::vector<std::string> decays = {"0.9", "0.99"};
  switch (kind) {
    case OptimizerKind::Sgd:
    case OptimizerKind::Adam:
      return {{"alpha", rates}};
    case OptimizerKind::RmsProp:
      return {{"beta", decays}, {"alpha", rates}};
    case OptimizerKind::SdPropDiag:
    case OptimizerKind::SdPropFull:
      return {{"gamma", decays}, {"rho", rates}};
  }
  throw ConfigError("unknown optimizer kind");
}

GridResult grid_search(const ExperimentConfig& base,
                       const std::vector<GridAxis>& axes,
                       std::ostream* log) {
  if (axes.empty()) throw ConfigError("grid search needs at least one axis");
  for (const GridAxis& axis : axes) {
    if (axis.key.empty() || axis.values.empty()) {
      throw ConfigError("grid axes need a key and at least one value");
    }
  }

  // Reuse one dataset across combinations unless an axis changes how the
  // dataset itself is built.
  static const std::set<std::string> dataset_keys = {
      "problem", "mnist-images", "mnist-labels", "subset",
      "synth-n", "synth-d",      "synth-k",      "separation"};
  bool share_dataset = base.problem.name == "mlp";
  for (const GridAxis& axis : axes) {
    if (dataset_keys.count(axis.key)) share_dataset = false;
  }
  std::shared_ptr<const Dataset> dataset =
      share_dataset ? load_problem_dataset(base.problem) : nullptr;

  GridResult gr;
  std::vector<std::size_t> odo(axes.size(), 0);
  double best_score = kInf;
  bool have_best = false;

  while (true) {
    GridRow row;
    ExperimentConfig cfg = base;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      row.assignment.emplace_back(axes[k].key, axes[k].values[odo[k]]);
      apply_kv(cfg, axes[k].key, axes[k].values[odo[k]]);
    }

    ExperimentResult res = run_experiment_on(cfg, dataset, nullptr);
    double sum = 0.0;
    for (const RunResult& run : res.runs) {
      if (run.status == RunStatus::Diverged) row.diverged_runs += 1;
      sum += run.final_loss;  // +inf for diverged runs poisons the average
    }
    row.avg_final_loss = sum / static_cast<double>(res.runs.size());

    if (log) {
      for (const auto& [k, v] : row.assignment) *log << k << "=" << v << " ";
      *log << "-> avg final loss " << format_double(row.avg_final_loss);
      if (row.diverged_runs > 0) *log << " (" << row.diverged_runs << " diverged)";
      *log << "\n";
    }

    if (!have_best || row.avg_final_loss < best_score) {
      best_score = row.avg_final_loss;
      have_best = true;
      gr.best_index = gr.rows.size();
      gr.best_config = res.config;
      gr.best_runs = std::move(res.runs);
    }
    gr.rows.push_back(std::move(row));

    // Odometer over the axes, last axis fastest.
    std::size_t k = axes.size();
    while (k > 0) {
      --k;
      if (++odo[k] < axes[k].values.size()) break;
      odo[k] = 0;
      if (k == 0) return gr;
    }
  }
}

void write_grid(const GridResult& result, const std::string& dir) {
  if (result.rows.empty()) throw StateError("empty grid result");
  fs::create_directories(dir);
  write_file(fs::path(dir) / "grid.csv", [&](std::ostream& out) {
    for (const auto& [key, value] : result.rows.front().assignment) {
      (void)value;
      out << key << ',';
    }
    out << "avg_final_loss,diverged_runs\n";
    for (const GridRow& row : result.rows) {
      for (const auto& [key, value] : row.assignment) {
        (void)key;
        out << value << ',';
      }
      out << format_double(row.avg_final_loss) << ',' << row.diverged_runs
          << '\n';
    }
  });
  write_file(fs::path(dir) / "best_config.txt", [&](std::ostream& out) {
    write_config(result.best_config, out);
  });
}

// --- plotting hand-off ---------------------------------------------------------

void emit_plots(const std::vector<std::string>& metrics_csvs,
                const std::string& out_path) {
  if (metrics_csvs.empty()) {
    throw ConfigError("emit-plots needs at least one metrics.csv");
  }
  write_file(out_path, [&](std::ostream& out) {
    out << "source,run,epoch,step,loss,accuracy\n";
    for (const std::string& path : metrics_csvs) {
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot read metrics file: " + path);
      std::string line;
      if (!std::getline(in, line)) {
        throw FormatError(path, "a metrics header line", "empty file");
      }
      const std::string expect = "run,epoch,step,loss,accuracy";
      if (line.rfind(expect, 0) != 0) {
        throw FormatError(path, "header starting with '" + expect + "'", line);
      }
      while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() < 5) {
          throw FormatError(path, "at least 5 comma-separated fields", line);
        }
        out << path << ',' << fields[0] << ',' << fields[1] << ',' << fields[2]
            << ',' << fields[3] << ',' << fields[4] << '\n';
      }
    }
  });
}

}  // namespace sdprop
