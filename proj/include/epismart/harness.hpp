#pragma once

#include "epismart/engine.hpp"
#include "epismart/filters.hpp"
#include "epismart/model.hpp"
#include "epismart/scoring.hpp"
#include "epismart/signal.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace epismart {

// ---------------------------------------------------------------------------
// Stream plumbing
// ---------------------------------------------------------------------------

/// preprocess -> windowize pipeline over a synthetic or file stream.
std::unique_ptr<WindowSource> make_window_source(const StreamSpec& spec,
                                                 std::uint64_t seed,
                                                 const PreprocessConfig& preprocess,
                                                 const WindowingConfig& windowing);

/// Reference events of the stream (planned events for synthetic sources,
/// annotation file for file sources).
std::vector<EventInterval> stream_reference_events(const StreamSpec& spec,
                                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Desk-scale defaults
// ---------------------------------------------------------------------------

/// 4 channels at 64 Hz; an 18-channel 256 Hz variant mirrors the recorded-EEG
/// geometry when full scale is wanted.
StreamSpec desk_stream_template(bool full_scale = false);
PreprocessConfig desk_preprocess(double rate_hz);
ArchSpec desk_arch(const StreamSpec& stream, const WindowingConfig& windowing);

/// Derive one subject's stream from a template: per-channel gains, noise
/// scale and event band vary by subject; with_drift adds mid-stream regime
/// changes (the personalization target).
StreamSpec make_subject_spec(const StreamSpec& tmpl, std::uint64_t subject_seed,
                             bool with_drift);

// ---------------------------------------------------------------------------
// Pretraining
// ---------------------------------------------------------------------------

struct PretrainConfig {
  int n_subjects = 4;
  StreamSpec subject_template;  // pooled subjects derive from this
  PreprocessConfig preprocess;
  WindowingConfig windowing;
  ArchSpec arch;
  TrainConfig train;
  std::size_t max_nonseizure = 6000;  // per-pool cap before balancing
};

PretrainConfig desk_pretrain_config();

/// Train the subject-independent model on a pool of synthetic subjects.
ClassifierF pretrain_pool(const PretrainConfig& cfg, std::uint64_t seed);

/// Window-level F1 of a model over one stream (pool validation helper).
double window_f1(ClassifierF& model, const StreamSpec& spec, std::uint64_t seed,
                 const PreprocessConfig& preprocess, const WindowingConfig& windowing);

// ---------------------------------------------------------------------------
// Cells, runs, sweeps
// ---------------------------------------------------------------------------

struct CellSpec {
  std::string id;
  StreamSpec stream;
  WindowingConfig windowing;
  PreprocessConfig preprocess;
  EngineConfig engine;
  ScoringConfig scoring;
  std::string checkpoint;  // pretrained model path
};

struct ExperimentSpec {
  std::vector<CellSpec> cells;
  int repeats = 3;
  std::uint64_t seed_base = 1;
  std::string out_dir;
};

/// The default strategy-comparison cell on the desk benchmark.
CellSpec benchmark_cell(Strategy strategy, const std::string& checkpoint);

struct RunArtifacts {
  RunResult run;
  MetricsReport metrics;
};

/// Engine + scoring for one (cell, seed); no file output. The metric window
/// starts after the initial-adaptation hour for every strategy so baselines
/// are compared on the same span.
RunArtifacts execute_run(const CellSpec& cell, std::uint64_t seed);

/// Post-process and score one finished run.
MetricsReport score_run(const RunResult& run, const std::vector<EventInterval>& reference,
                        double stream_duration_s, const ScoringConfig& cfg,
                        double eval_start_s);

/// Counted selections per stepped window (random_update cost matching).
double counted_selection_rate(const RunResult& run);

/// execute_run + persistence: JSON result, p1 binary, final row in
/// results.csv. seed = seed_base + repeat.
MetricsReport run_cell(const CellSpec& cell, int repeat, std::uint64_t seed_base,
                       const std::string& out_dir);

/// Run every (cell, repeat) of the experiment, in parallel; per-run failures
/// are recorded in errors.log and do not abort the rest.
void run_experiment(const ExperimentSpec& spec, int max_parallel = 0);

struct SweepSpec {
  CellSpec base;
  std::vector<double> tau_es;
  std::vector<int> tau_us;
  int repeats = 3;
  std::uint64_t seed_base = 1;
  std::string out_dir;
};

/// Grid over (tau_E, tau_U); writes per-run rows plus a long-format
/// sweep_long.csv (tau_e, tau_u, metric, mean, std).
void sweep(const SweepSpec& spec, int max_parallel = 0);

struct AggregateRow {
  std::string cell_id;
  int runs = 0;
  std::map<std::string, std::pair<double, double>> metrics;  // name -> (mean, std)
};

/// Aggregate results.csv in a directory; writes aggregate.csv next to it.
std::vector<AggregateRow> report(const std::string& dir);

/// Fixed results.csv column order (documented in the README).
const std::vector<std::string>& results_csv_columns();

}  // namespace epismart
