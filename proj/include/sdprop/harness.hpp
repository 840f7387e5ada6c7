#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdprop/data.hpp"
#include "sdprop/optim.hpp"
#include "sdprop/problems.hpp"

namespace sdprop {

enum class MetricsCadence { PerEpoch, PerStep };

enum class RunStatus { Completed, Diverged };

// One row of the metrics table. `step` is the global 1-based update count at
// record time; per-epoch records carry the full-dataset evaluation, per-step
// records carry the exact objective when it is cheap and the minibatch loss
// otherwise. `rate` is the decayed learning rate in effect for that epoch.
struct MetricsRecord {
  int run = 0;
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double loss = 0.0;
  std::optional<double> accuracy;
  double elapsed_ms = 0.0;  // 0 unless timing is enabled (see ExperimentConfig)
  double rate = 0.0;
};

// Which objective to train and how to build it. Problem names: "quadratic",
// "rosenbrock", "mlp".
struct ProblemSpec {
  std::string name = "quadratic";

  // quadratic: f = 0.5 theta' diag(curvatures) theta, start at
  // theta0_i = theta0_scale / sqrt(curvatures_i) so every coordinate begins
  // at the same height regardless of conditioning.
  std::vector<double> curvatures = {1.0, 100.0};
  double theta0_scale = 1.0;
  // Gradient noise level; unset picks 1.0 (quadratic) or 0.1 (rosenbrock).
  std::optional<double> noise;

  // mlp: depth x width, gaussian init scale.
  int hidden_layers = 20;
  int hidden_units = 50;
  double init_stddev = 0.01;
  // Dataset: explicit IDX paths win; otherwise $SDPROP_MNIST_DIR is probed
  // for train-images-idx3-ubyte / train-labels-idx1-ubyte; otherwise a
  // deterministic synthetic mixture of the same shape stands in.
  std::string mnist_images;
  std::string mnist_labels;
  int subset = 10000;  // keep the first N examples (0 = all)
  int synth_n = 10000;
  int synth_d = 784;
  int synth_k = 10;
  double separation = 3.0;  // synthetic class-mean distance from the origin
};

struct ExperimentConfig {
  ProblemSpec problem;
  OptimizerConfig optimizer;
  int batch_size = 128;
  int epochs = 50;
  int steps_per_epoch = 100;  // stream problems only; datasets derive it
  std::uint64_t seed = 12345;
  int runs = 1;
  // Fold this many minibatch gradients into the sdprop statistics before the
  // first parameter update (avoids the documented oversized first step).
  int warmup_steps = 0;
  MetricsCadence cadence = MetricsCadence::PerEpoch;
  // When false (default), elapsed_ms is written as 0 so metrics files are
  // byte-identical across same-seed re-runs. When true, real wall-clock
  // milliseconds are recorded and byte-reproducibility is deliberately lost.
  bool timing = false;
  std::string out_dir;  // empty: $SDPROP_OUT_DIR, falling back to ./out
  int threads = 0;      // 0 = leave the Eigen default alone
};

struct RunResult {
  int run = 0;
  RunStatus status = RunStatus::Completed;
  double final_loss = 0.0;  // +inf when the run diverged
  std::optional<double> final_accuracy;
  std::vector<MetricsRecord> metrics;
};

struct ExperimentResult {
  ExperimentConfig config;  // resolved (optimizer defaults filled in)
  std::vector<RunResult> runs;
};

// Builds the problem/dataset, runs config.runs independent seeded runs, and
// returns everything in memory. `log` (optional) receives progress lines.
// Run i draws all of its randomness from derive_seed(config.seed, i); the
// dataset for "mlp" is built once and shared by every run.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::ostream* log = nullptr);

// Resolves the dataset the spec describes (see ProblemSpec). Exposed so
// callers can share one dataset across many experiments.
std::shared_ptr<const Dataset> load_problem_dataset(const ProblemSpec& spec);

// As run_experiment, but reuses an already-loaded dataset (ignored for
// stream problems).
ExperimentResult run_experiment_on(const ExperimentConfig& config,
                                   std::shared_ptr<const Dataset> dataset,
                                   std::ostream* log = nullptr);

// --- metrics & config serialization ---------------------------------------

// Column layout of metrics.csv. Version note: columns are append-only; code
// reading these files must tolerate new trailing columns.
inline constexpr const char* kMetricsCsvHeader =
    "run,epoch,step,loss,accuracy,elapsed_ms,rate";

// Shortest decimal string that round-trips the double exactly.
std::string format_double(double v);

void write_metrics_csv(const ExperimentResult& result, std::ostream& out);
void write_metrics_jsonl(const ExperimentResult& result, std::ostream& out);
// Full resolved key=value dump; keys are the CLI flag spellings without the
// leading dashes, so a config file and a command line are interchangeable.
void write_config(const ExperimentConfig& config, std::ostream& out);

// Applies one key=value pair (CLI flag spelling, e.g. "decay-every").
// Unknown keys and unparsable values raise ConfigError.
void apply_kv(ExperimentConfig& config, const std::string& key,
              const std::string& value);

// key=value lines; '#' starts a comment, blank lines are skipped. Returned in
// file order so later lines override earlier ones when applied in sequence.
std::vector<std::pair<std::string, std::string>> read_kv_file(std::istream& in);
std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::string& path);

// Resolves the output directory: explicit config value, else $SDPROP_OUT_DIR,
// else "./out".
std::string resolve_out_dir(const ExperimentConfig& config);

// Writes metrics.csv, metrics.jsonl and config.txt under `dir` (created if
// missing). Returns the directory actually used.
std::string write_experiment(const ExperimentResult& result,
                             const std::string& dir);

// --- summaries -------------------------------------------------------------

struct AccuracySummary {
  double avg = 0.0;
  double best = 0.0;
  double worst = 0.0;
  int completed = 0;  // runs that finished with finite parameters
};

// Final-accuracy statistics over the completed runs of a classification
// experiment. Throws StateError when no run completed or the problem does not
// report accuracy.
AccuracySummary summarize_runs(const ExperimentResult& result);

// --- grid search -------------------------------------------------------------

struct GridAxis {
  std::string key;                  // apply_kv spelling, e.g. "gamma"
  std::vector<std::string> values;  // textual values, e.g. {"0.9", "0.99"}
};

struct GridRow {
  std::vector<std::pair<std::string, std::string>> assignment;
  double avg_final_loss = 0.0;  // +inf when any run diverged
  int diverged_runs = 0;
};

struct GridResult {
  std::vector<GridRow> rows;    // enumeration order
  std::size_t best_index = 0;   // lowest avg_final_loss, ties to the earliest
  ExperimentConfig best_config;
  std::vector<RunResult> best_runs;
};

// Cartesian product of the axes over the base config. Every combination is
// trained with the same seeds; the winner is the lowest average final loss
// (diverged combinations lose outright).
GridResult grid_search(const ExperimentConfig& base,
                       const std::vector<GridAxis>& axes,
                       std::ostream* log = nullptr);

// The tuning grid used throughout: sgd/adam sweep alpha over
// {0.1, 0.01, 0.001}; rmsprop crosses that with beta in {0.9, 0.99}; the
// sdprop kinds sweep rho over the same rates crossed with gamma in
// {0.9, 0.99}.
std::vector<GridAxis> protocol_grid(OptimizerKind kind);

// grid.csv (one row per combination) and best_config.txt under `dir`.
void write_grid(const GridResult& result, const std::string& dir);

// --- plotting hand-off -------------------------------------------------------

// Merges metrics CSVs into one long-format curves.csv
// (source,run,epoch,step,loss,accuracy) ready for any plotting tool.
void emit_plots(const std::vector<std::string>& metrics_csvs,
                const std::string& out_path);

}  // namespace sdprop
