// Command-line front end: `run` trains one configuration, `grid` sweeps a
// hyperparameter grid, `verify` executes the acceptance checks, and
// `emit-plots` merges metrics files for external plotting. Every training
// option is a string routed through the same key=value parser that reads
// config files, so the two syntaxes stay interchangeable by construction.

#include <chrono>
#include <iomanip>
#include <iostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "sdprop/error.hpp"
#include "sdprop/harness.hpp"
#include "sdprop/optim.hpp"
#include "sdprop/verify.hpp"

namespace {

using sdprop::ExperimentConfig;

// One entry per key understood by apply_kv; grouped for --help readability.
struct KeyDoc {
  const char* key;
  const char* group;
  const char* help;
};

constexpr KeyDoc kKeys[] = {
    {"problem", "Problem", "quadratic | rosenbrock | mlp"},
    {"curvature", "Problem", "comma list of quadratic curvatures"},
    {"theta0-scale", "Problem", "quadratic start: theta0_i = scale/sqrt(a_i)"},
    {"noise", "Problem", "gradient noise stddev (quadratic/rosenbrock)"},
    {"hidden-layers", "Problem", "mlp depth"},
    {"hidden-units", "Problem", "mlp width"},
    {"init-stddev", "Problem", "mlp weight init stddev"},
    {"mnist-images", "Problem", "idx image file (mlp)"},
    {"mnist-labels", "Problem", "idx label file (mlp)"},
    {"subset", "Problem", "keep first N examples (0 = all)"},
    {"synth-n", "Problem", "synthetic dataset size"},
    {"synth-d", "Problem", "synthetic feature count"},
    {"synth-k", "Problem", "synthetic class count"},
    {"separation", "Problem", "synthetic class-mean separation"},
    {"optimizer", "Optimizer", "sgd | rmsprop | adam | sdprop | sdprop-full"},
    {"alpha", "Optimizer", "learning rate (sgd/rmsprop/adam)"},
    {"rho", "Optimizer", "step scale (sdprop kinds)"},
    {"beta", "Optimizer", "rmsprop decay"},
    {"beta1", "Optimizer", "adam first-moment decay"},
    {"beta2", "Optimizer", "adam second-moment decay"},
    {"gamma", "Optimizer", "sdprop decay"},
    {"epsilon", "Optimizer", "denominator stabilizer"},
    {"bias-correction", "Optimizer", "true|false (sdprop diagonal only)"},
    {"clip", "Optimizer", "gradient-norm clip threshold"},
    {"decay-every", "Optimizer", "decay the rate every N epochs"},
    {"decay-factor", "Optimizer", "multiplicative decay factor"},
    {"batch-size", "Training", "minibatch size"},
    {"epochs", "Training", "training epochs"},
    {"steps-per-epoch", "Training", "steps per epoch (stream problems)"},
    {"seed", "Training", "master seed; run i uses a derived sub-seed"},
    {"runs", "Training", "independent repetitions"},
    {"warmup", "Training", "statistics-only steps before updating"},
    {"cadence", "Output", "metrics cadence: epoch | step"},
    {"timing", "Output", "true records wall-clock ms (breaks byte-identity)"},
    {"out", "Output", "output directory (default $SDPROP_OUT_DIR or ./out)"},
    {"threads", "Output", "Eigen thread count (0 = library default)"},
};

struct KvCapture {
  std::vector<std::pair<std::string, std::string>> pairs;  // command-line order
  std::string config_path;
};

void add_config_options(CLI::App& cmd, KvCapture& cap) {
  for (const KeyDoc& doc : kKeys) {
    const std::string key = doc.key;
    cmd.add_option_function<std::string>(
           "--" + key,
           [key, &cap](const std::string& v) { cap.pairs.emplace_back(key, v); },
           doc.help)
        ->group(doc.group);
  }
  cmd.add_option("--config", cap.config_path,
                 "key=value file; explicit command-line flags win")
      ->group("Output");
}

// Config-file pairs fill in only the keys the command line left unset.
ExperimentConfig build_config(const KvCapture& cap) {
  ExperimentConfig cfg;
  std::set<std::string> cli_keys;
  for (const auto& [k, v] : cap.pairs) cli_keys.insert(k);
  if (!cap.config_path.empty()) {
    for (const auto& [k, v] : sdprop::read_kv_file(cap.config_path)) {
      if (cli_keys.count(k) == 0) sdprop::apply_kv(cfg, k, v);
    }
  }
  for (const auto& [k, v] : cap.pairs) sdprop::apply_kv(cfg, k, v);
  return cfg;
}

std::string describe(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    if (!out.empty()) out += " ";
    out += k + "=" + v;
  }
  return out;
}

int do_run(const KvCapture& cap) {
  const ExperimentConfig cfg = build_config(cap);
  const auto t0 = std::chrono::steady_clock::now();
  const sdprop::ExperimentResult result = sdprop::run_experiment(cfg, &std::cerr);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  for (const sdprop::RunResult& run : result.runs) {
    std::cout << "run " << run.run << ": ";
    if (run.status == sdprop::RunStatus::Diverged) {
      std::cout << "diverged";
    } else {
      std::cout << "final loss " << sdprop::format_double(run.final_loss);
      if (run.final_accuracy) {
        std::cout << ", accuracy " << sdprop::format_double(*run.final_accuracy);
      }
    }
    std::cout << "\n";
  }
  const std::string dir =
      sdprop::write_experiment(result, sdprop::resolve_out_dir(cfg));
  std::cout << "wrote " << dir << "/{metrics.csv,metrics.jsonl,config.txt} in "
            << std::fixed << std::setprecision(1) << secs << "s\n";
  return 0;
}

sdprop::GridAxis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) {
    throw sdprop::ConfigError("--axis: expected key=v1[,v2,...], got '" +
                              spec + "'");
  }
  sdprop::GridAxis axis;
  axis.key = spec.substr(0, eq);
  std::string rest = spec.substr(eq + 1);
  std::size_t start = 0;
  while (start <= rest.size()) {
    const auto comma = rest.find(',', start);
    const std::string token =
        rest.substr(start, comma == std::string::npos ? std::string::npos
                                                      : comma - start);
    if (token.empty()) {
      throw sdprop::ConfigError("--axis " + spec + ": empty value");
    }
    axis.values.push_back(token);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return axis;
}

int do_grid(const KvCapture& cap, const std::vector<std::string>& axis_specs) {
  const ExperimentConfig cfg = build_config(cap);
  std::vector<sdprop::GridAxis> axes;
  if (axis_specs.empty()) {
    axes = sdprop::protocol_grid(cfg.optimizer.kind);
  } else {
    for (const std::string& spec : axis_specs) axes.push_back(parse_axis(spec));
  }

  const auto t0 = std::chrono::steady_clock::now();
  const sdprop::GridResult grid = sdprop::grid_search(cfg, axes, &std::cerr);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  for (const sdprop::GridRow& row : grid.rows) {
    std::cout << describe(row.assignment) << ": avg final loss "
              << sdprop::format_double(row.avg_final_loss);
    if (row.diverged_runs > 0) {
      std::cout << " (" << row.diverged_runs << " diverged)";
    }
    std::cout << "\n";
  }
  std::cout << "best: " << describe(grid.rows[grid.best_index].assignment)
            << "\n";
  const std::string dir = sdprop::resolve_out_dir(cfg);
  sdprop::write_grid(grid, dir);
  std::cout << "wrote " << dir << "/{grid.csv,best_config.txt} in "
            << std::fixed << std::setprecision(1) << secs << "s\n";
  return 0;
}

int do_verify(const std::vector<int>& only, const sdprop::VerifyOptions& opts) {
  if (only.empty()) {
    return sdprop::run_all_criteria(std::cout, opts) ? 0 : 1;
  }
  bool ok = true;
  for (const int id : only) {
    const sdprop::CriterionResult r = sdprop::run_criterion(id, opts);
    ok = ok && r.pass;
    std::cout << "criterion " << r.id << " " << r.name << ": "
              << (r.pass ? "PASS" : "FAIL") << " (" << std::fixed
              << std::setprecision(1) << r.seconds << "s) — " << r.detail
              << "\n";
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic-gradient optimizer benchmark harness"};
  app.require_subcommand(1);

  KvCapture run_cap;
  CLI::App* run_cmd =
      app.add_subcommand("run", "train one configuration and write metrics");
  add_config_options(*run_cmd, run_cap);

  KvCapture grid_cap;
  std::vector<std::string> axis_specs;
  CLI::App* grid_cmd = app.add_subcommand(
      "grid", "sweep a hyperparameter grid, pick the lowest avg final loss");
  add_config_options(*grid_cmd, grid_cap);
  grid_cmd
      ->add_option("--axis", axis_specs,
                   "key=v1,v2 sweep axis (repeatable); default: the standard "
                   "grid for the chosen optimizer")
      ->group("Grid");

  std::vector<int> only;
  sdprop::VerifyOptions verify_opts;
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "run the acceptance checks");
  verify_cmd->add_option("--only", only, "criterion ids to run (default all)");
  verify_cmd->add_option("--mnist-dir", verify_opts.mnist_dir,
                         "directory with train-images-idx3-ubyte / "
                         "train-labels-idx1-ubyte");
  verify_cmd->add_option("--threads", verify_opts.threads,
                         "Eigen thread count");

  std::vector<std::string> plot_inputs;
  std::string plot_out = "curves.csv";
  CLI::App* plots_cmd = app.add_subcommand(
      "emit-plots", "merge metrics.csv files into one long-format table");
  plots_cmd->add_option("inputs", plot_inputs, "metrics.csv files")
      ->required()
      ->expected(-1);
  plots_cmd->add_option("--out", plot_out, "output path (default curves.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run_cmd)) return do_run(run_cap);
    if (app.got_subcommand(grid_cmd)) return do_grid(grid_cap, axis_specs);
    if (app.got_subcommand(verify_cmd)) return do_verify(only, verify_opts);
    if (app.got_subcommand(plots_cmd)) {
      sdprop::emit_plots(plot_inputs, plot_out);
      std::cout << "wrote " << plot_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    std::cerr << app.get_subcommands().front()->help() << "\n";
    return 2;
  }
  return 0;
}
