#include "epismart/harness.hpp"

#include "epismart/serialize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace epismart {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Stream plumbing
// ---------------------------------------------------------------------------

namespace {

class PipelineWindowSource : public WindowSource {
 public:
  PipelineWindowSource(std::function<std::optional<SampleBlock>()> producer,
                       const PreprocessConfig& preprocess, Eigen::Index channels,
                       double rate_hz, const WindowingConfig& windowing)
      : producer_(std::move(producer)),
        preprocessor_(preprocess, channels, rate_hz),
        windowizer_(channels, rate_hz, windowing) {}

  std::optional<Window> next() override {
    Window w;
    while (!windowizer_.next(w)) {
      auto block = producer_();
      if (!block) return std::nullopt;
      preprocessor_.process_inplace(*block);
      windowizer_.push(*block);
    }
    return w;
  }

 private:
  std::function<std::optional<SampleBlock>()> producer_;
  Preprocessor preprocessor_;
  Windowizer windowizer_;
};

}  // namespace

std::unique_ptr<WindowSource> make_window_source(const StreamSpec& spec,
                                                 std::uint64_t seed,
                                                 const PreprocessConfig& preprocess,
                                                 const WindowingConfig& windowing) {
  if (spec.source == StreamSpec::Source::synthetic) {
    auto synth = std::make_shared<Synthesizer>(spec, seed);
    return std::make_unique<PipelineWindowSource>(
        [synth] { return synth->next_block(); }, preprocess, spec.channels,
        spec.rate_hz, windowing);
  }
  auto reader = std::make_shared<FileBlockReader>(spec.path);
  return std::make_unique<PipelineWindowSource>(
      [reader] { return reader->next_block(); }, preprocess, reader->channels(),
      reader->rate_hz(), windowing);
}

std::vector<EventInterval> stream_reference_events(const StreamSpec& spec,
                                                   std::uint64_t seed) {
  if (spec.source == StreamSpec::Source::synthetic)
    return Synthesizer(spec, seed).reference_events();
  return read_annotations_tsv(spec.annotations);
}

// ---------------------------------------------------------------------------
// Desk-scale defaults
// ---------------------------------------------------------------------------

StreamSpec desk_stream_template(bool full_scale) {
  StreamSpec spec;
  spec.source = StreamSpec::Source::synthetic;
  spec.channels = full_scale ? 18 : 4;
  spec.rate_hz = full_scale ? 256.0 : 64.0;
  spec.duration_s = 48.0 * 3600.0;
  spec.events.mean_gap_s = 4.0 * 3600.0;
  spec.events.min_duration_s = 12.0;
  spec.events.max_duration_s = 24.0;
  spec.events.band_lo_hz = 5.0;
  spec.events.band_hi_hz = 11.0;
  spec.events.first_event_latest_s = 600.0;
  spec.events.amplitude_rms_ratio = 3.0;
  return spec;
}

PreprocessConfig desk_preprocess(double rate_hz) {
  PreprocessConfig cfg;
  if (rate_hz <= 2.0 * cfg.lowpass_hz) {
    cfg.enable_lowpass = false;
    cfg.notch_hz = 25.0;  // keep a notch stage inside the narrow band
  }
  return cfg;
}

ArchSpec desk_arch(const StreamSpec& stream, const WindowingConfig& windowing) {
  ArchSpec arch;
  arch.in_channels = stream.channels;
  arch.input_samples =
      static_cast<int>(std::lround(windowing.duration_s * stream.rate_hz));
  return arch;
}

StreamSpec make_subject_spec(const StreamSpec& tmpl, std::uint64_t subject_seed,
                             bool with_drift) {
  std::mt19937_64 rng(detail::mix_seed(subject_seed, 21));
  auto uni = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  StreamSpec spec = tmpl;
  const auto nch = static_cast<std::size_t>(spec.channels);

  DriftSegment base;
  base.time_s = 0.0;
  base.noise_scale = uni(0.8, 1.2);
  for (std::size_t c = 0; c < nch; ++c) base.gains.push_back(uni(0.7, 1.4));
  spec.drift = {base};

  const double band_center = uni(6.5, 10.0);
  spec.events.band_lo_hz = band_center - 2.5;
  spec.events.band_hi_hz = band_center + 2.5;
  spec.events.amplitude_rms_ratio = tmpl.events.amplitude_rms_ratio * uni(0.9, 1.1);

  if (with_drift) {
    DriftSegment prev = base;
    for (int r = 0; r < 3; ++r) {
      DriftSegment seg;
      seg.time_s = spec.duration_s * (r + 1) / 4.0 + uni(-0.04, 0.04) * spec.duration_s;
      seg.noise_scale = prev.noise_scale * uni(1.35, 1.7);
      for (std::size_t c = 0; c < nch; ++c)
        seg.gains.push_back(prev.gains[c] * uni(0.65, 1.55));
      spec.drift.push_back(seg);
      prev = seg;
    }
  }
  return spec;
}

PretrainConfig desk_pretrain_config() {
  PretrainConfig cfg;
  cfg.n_subjects = 4;
  cfg.subject_template = desk_stream_template();
  cfg.subject_template.duration_s = 3.0 * 3600.0;
  cfg.subject_template.events.mean_gap_s = 1200.0;
  cfg.preprocess = desk_preprocess(cfg.subject_template.rate_hz);
  cfg.windowing = {};
  cfg.arch = desk_arch(cfg.subject_template, cfg.windowing);
  cfg.train.seed = 0;
  return cfg;
}

// ---------------------------------------------------------------------------
// Pretraining
// ---------------------------------------------------------------------------

ClassifierF pretrain_pool(const PretrainConfig& cfg, std::uint64_t seed) {
  if (cfg.n_subjects < 2)
    throw config_error("pretrain: need at least 2 pool subjects");

  std::vector<BufferEntry> seizure, nonseizure;
  std::mt19937_64 reservoir_rng(detail::mix_seed(seed, 31));
  long step = 0;
  long nonseizure_seen = 0;

  for (int s = 0; s < cfg.n_subjects; ++s) {
    const StreamSpec sspec =
        make_subject_spec(cfg.subject_template, detail::mix_seed(seed, 100 + s), false);
    const std::uint64_t stream_seed = detail::mix_seed(seed, 200 + s);
    auto source = make_window_source(sspec, stream_seed, cfg.preprocess, cfg.windowing);
    const auto events = stream_reference_events(sspec, stream_seed);

    while (auto w = source->next()) {
      const int label = window_label(*w, events);
      if (label == 1) {
        seizure.push_back({std::move(*w), 1, step++});
      } else {
        // Reservoir-sample the abundant class to the configured cap.
        ++nonseizure_seen;
        if (nonseizure.size() < cfg.max_nonseizure) {
          nonseizure.push_back({std::move(*w), 0, step++});
        } else {
          std::uniform_int_distribution<long> pick(0, nonseizure_seen - 1);
          const long j = pick(reservoir_rng);
          if (j < static_cast<long>(cfg.max_nonseizure))
            nonseizure[static_cast<std::size_t>(j)] = {std::move(*w), 0, step++};
        }
      }
    }
  }

  std::vector<BufferEntry> pool = std::move(nonseizure);
  pool.insert(pool.end(), std::make_move_iterator(seizure.begin()),
              std::make_move_iterator(seizure.end()));

  ClassifierF model(cfg.arch, detail::mix_seed(seed, 1));
  TrainConfig tc = cfg.train;
  tc.seed = detail::mix_seed(seed, 2);
  const TrainReport report = fine_tune(model, pool, tc);
  if (report.skipped || report.diverged)
    throw std::runtime_error("pretrain: training failed (skipped/diverged)");
  return model;
}

double window_f1(ClassifierF& model, const StreamSpec& spec, std::uint64_t seed,
                 const PreprocessConfig& preprocess, const WindowingConfig& windowing) {
  auto source = make_window_source(spec, seed, preprocess, windowing);
  const auto events = stream_reference_events(spec, seed);
  model.set_train(false);

  long tp = 0, fp = 0, fn = 0;
  std::vector<Window> batch;
  auto flush = [&] {
    if (batch.empty()) return;
    std::vector<const Window*> ptrs;
    for (const auto& w : batch) ptrs.push_back(&w);
    const auto input = pack_windows<float>(ptrs);
    const auto logits = model.forward_batch(input, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const int pred = logits(1, static_cast<Eigen::Index>(i)) >
                               logits(0, static_cast<Eigen::Index>(i))
                           ? 1
                           : 0;
      const int truth = window_label(batch[i], events);
      tp += pred == 1 && truth == 1;
      fp += pred == 1 && truth == 0;
      fn += pred == 0 && truth == 1;
    }
    batch.clear();
  };
  while (auto w = source->next()) {
    batch.push_back(std::move(*w));
    if (batch.size() == 256) flush();
  }
  flush();
  return f1_far(tp, fp, fn, 1.0).f1;
}

// ---------------------------------------------------------------------------
// Cells and runs
// ---------------------------------------------------------------------------

CellSpec benchmark_cell(Strategy strategy, const std::string& checkpoint) {
  CellSpec cell;
  cell.id = std::string("bench_") + to_string(strategy);
  cell.stream = make_subject_spec(desk_stream_template(), 1001, true);
  cell.windowing = {};
  cell.preprocess = desk_preprocess(cell.stream.rate_hz);
  cell.engine.strategy = strategy;
  cell.scoring = {};
  cell.checkpoint = checkpoint;
  return cell;
}

MetricsReport score_run(const RunResult& run, const std::vector<EventInterval>& reference,
                        double stream_duration_s, const ScoringConfig& cfg,
                        double eval_start_s) {
  MetricsReport m;

  // Window k of the prediction log starts at (first_step_index + k) * stride.
  std::vector<std::uint8_t> labels;
  double start0 = 0.0;
  bool have_start = false;
  for (std::size_t i = 0; i < run.p1.size(); ++i) {
    const double start =
        (static_cast<double>(run.first_step_index) + static_cast<double>(i)) *
        run.stride_s;
    if (start < eval_start_s - 1e-9) continue;
    if (!have_start) {
      start0 = start;
      have_start = true;
    }
    labels.push_back(run.p1[i] > 0.5f ? 1 : 0);
  }

  const auto decisions = smooth(labels, cfg);
  const WindowTiming timing{start0, run.stride_s, run.window_duration_s};
  const auto predicted = extract_events(decisions, timing, cfg);

  std::vector<EventInterval> ref_eval;
  for (const auto& ev : reference)
    if (ev.start_s >= eval_start_s) ref_eval.push_back(ev);

  const MatchCounts counts = match_events(predicted, ref_eval, cfg);
  const double days = stream_duration_s / 86400.0;
  const RateMetrics rates = f1_far(counts.tp, counts.fp, counts.fn, days);
  const CostMetrics cost =
      costs(run.ledgers.labeled_intervals,
            static_cast<long>(run.ledgers.updates.size()), days, run.window_duration_s);

  m.tp = counts.tp;
  m.fp = counts.fp;
  m.fn = counts.fn;
  m.precision = rates.precision;
  m.recall = rates.recall;
  m.f1 = rates.f1;
  m.far = rates.far;
  m.labeling_cost = cost.labeling_min_per_day;
  m.labeling_cost_naive = cost.labeling_naive_min_per_day;
  m.update_cost = cost.updates_per_day;
  m.stream_days = days;
  return m;
}

double counted_selection_rate(const RunResult& run) {
  if (run.p1.empty()) return 0.0;
  long counted = 0;
  for (const auto& s : run.ledgers.selections)
    counted += s.reason != SelectReason::neighborhood;
  return static_cast<double>(counted) / static_cast<double>(run.p1.size());
}

namespace {

RunArtifacts execute_run_impl(const CellSpec& cell, std::uint64_t seed,
                              ClassifierF* final_model) {
  ClassifierF model = ClassifierF::load(cell.checkpoint);
  auto source = make_window_source(cell.stream, seed, cell.preprocess, cell.windowing);
  const auto reference = stream_reference_events(cell.stream, seed);
  AnnotationOracle oracle(reference);

  EngineConfig ecfg = cell.engine;
  ecfg.seed = seed;

  RunArtifacts out;
  out.run = Engine::run(*source, std::move(model), ecfg, oracle, final_model);

  double duration = cell.stream.duration_s;
  if (!(duration > 0.0)) {
    const double total_windows = static_cast<double>(out.run.first_step_index) +
                                 static_cast<double>(out.run.p1.size());
    duration = total_windows > 0
                   ? (total_windows - 1.0) * out.run.stride_s + out.run.window_duration_s
                   : 0.0;
  }
  out.metrics = score_run(out.run, reference, duration, cell.scoring,
                          ecfg.initial_adaptation_s);
  return out;
}

std::mutex g_results_mutex;

void append_csv_row(const std::string& dir, const std::string& row) {
  std::lock_guard<std::mutex> lock(g_results_mutex);
  const fs::path path = fs::path(dir) / "results.csv";
  const bool fresh = !fs::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("cannot append to " + path.string());
  if (fresh) {
    const auto& cols = results_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
  }
  os << row << '\n';
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
  }
  fs::rename(tmp, path);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

RunArtifacts execute_run(const CellSpec& cell, std::uint64_t seed) {
  return execute_run_impl(cell, seed, nullptr);
}

const std::vector<std::string>& results_csv_columns() {
  static const std::vector<std::string> cols = {
      "cell_id",       "repeat",       "seed",
      "strategy",      "tau_e",        "tau_u",
      "tp",            "fp",           "fn",
      "precision",     "recall",       "f1",
      "far",           "labeling_cost", "labeling_cost_naive",
      "update_cost",   "stream_days",  "selections",
      "labeled_windows", "updates",    "pending_at_end",
      "stage0_windows"};
  return cols;
}

MetricsReport run_cell(const CellSpec& cell, int repeat, std::uint64_t seed_base,
                       const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(repeat);

  ClassifierF final_model = ClassifierF::load(cell.checkpoint);  // placeholder shape
  RunArtifacts art = execute_run_impl(cell, seed, &final_model);

  const std::string stem = cell.id + "_r" + std::to_string(repeat);
  const fs::path dir(out_dir);

  // Prediction log: f32le p1 per stepped window.
  {
    std::string bytes(art.run.p1.size() * sizeof(float), '\0');
    std::memcpy(bytes.data(), art.run.p1.data(), bytes.size());
    atomic_write(dir / (stem + ".p1.bin"), bytes);
  }
  final_model.save((dir / (stem + ".ckpt")).string());

  json j;
  j["id"] = cell.id;
  j["repeat"] = repeat;
  j["seed"] = seed;
  j["config"] = {{"stream", cell.stream},     {"windowing", cell.windowing},
                 {"preprocess", cell.preprocess}, {"engine", cell.engine},
                 {"scoring", cell.scoring},   {"checkpoint", cell.checkpoint}};
  j["metrics"] = art.metrics;
  j["prediction_log"] = {{"file", stem + ".p1.bin"},
                         {"first_step_index", art.run.first_step_index},
                         {"stride_s", art.run.stride_s},
                         {"window_duration_s", art.run.window_duration_s}};
  j["final_checkpoint"] = stem + ".ckpt";
  j["stage0"] = {{"windows", art.run.stage0_windows},
                 {"oracle_queries", art.run.stage0_oracle_queries},
                 {"report", art.run.stage0_report}};

  // Ledgers, with the bulky per-window interval list reduced to its union.
  json ledgers = ledgers_to_json(art.run.ledgers);
  ledgers["labeled_windows"] = art.run.ledgers.labeled_intervals.size();
  ledgers["labeled_union"] = merge_intervals(art.run.ledgers.labeled_intervals);
  ledgers.erase("labeled_intervals");
  if (ledgers["selections"].size() > 20000) {
    ledgers["selections_count"] = ledgers["selections"].size();
    ledgers.erase("selections");
  }
  j["ledgers"] = std::move(ledgers);

  atomic_write(dir / (stem + ".json"), j.dump(2));

  std::ostringstream row;
  row << cell.id << ',' << repeat << ',' << seed << ','
      << to_string(cell.engine.strategy) << ',' << format_double(cell.engine.tau_e)
      << ',' << cell.engine.tau_u << ',' << art.metrics.tp << ',' << art.metrics.fp
      << ',' << art.metrics.fn << ',' << format_double(art.metrics.precision) << ','
      << format_double(art.metrics.recall) << ',' << format_double(art.metrics.f1)
      << ',' << format_double(art.metrics.far) << ','
      << format_double(art.metrics.labeling_cost) << ','
      << format_double(art.metrics.labeling_cost_naive) << ','
      << format_double(art.metrics.update_cost) << ','
      << format_double(art.metrics.stream_days) << ','
      << art.run.ledgers.selections.size() << ','
      << art.run.ledgers.labeled_intervals.size() << ','
      << art.run.ledgers.updates.size() << ',' << art.run.ledgers.pending_at_end
      << ',' << art.run.stage0_windows;
  append_csv_row(out_dir, row.str());
  return art.metrics;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

void run_experiment(const ExperimentSpec& spec, int max_parallel) {
  if (spec.repeats < 1) throw config_error("experiment: repeats must be >= 1");
  fs::create_directories(spec.out_dir);

  struct Job {
    const CellSpec* cell;
    int repeat;
  };
  std::vector<Job> jobs;
  for (const auto& cell : spec.cells)
    for (int r = 0; r < spec.repeats; ++r) jobs.push_back({&cell, r});

  unsigned workers = max_parallel > 0 ? static_cast<unsigned>(max_parallel)
                                      : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, jobs.size()));

  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      try {
        run_cell(*job.cell, job.repeat, spec.seed_base, spec.out_dir);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        std::ofstream os(fs::path(spec.out_dir) / "errors.log", std::ios::app);
        os << job.cell->id << " repeat " << job.repeat << ": " << e.what() << '\n';
      }
    }
  };

  std::vector<std::thread> threads;
  for (unsigned t = 1; t < workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
}

void sweep(const SweepSpec& spec, int max_parallel) {
  if (spec.tau_es.empty() || spec.tau_us.empty())
    throw config_error("sweep: grid must be nonempty");

  ExperimentSpec exp;
  exp.repeats = spec.repeats;
  exp.seed_base = spec.seed_base;
  exp.out_dir = spec.out_dir;

  std::map<std::string, std::pair<double, int>> grid_of;
  for (const double te : spec.tau_es)
    for (const int tu : spec.tau_us) {
      CellSpec cell = spec.base;
      std::ostringstream id;
      id << spec.base.id << "_te" << format_double(te) << "_tu" << tu;
      cell.id = id.str();
      cell.engine.tau_e = te;
      cell.engine.tau_u = tu;
      grid_of[cell.id] = {te, tu};
      exp.cells.push_back(std::move(cell));
    }

  run_experiment(exp, max_parallel);

  const auto rows = report(spec.out_dir);
  std::ostringstream os;
  os << "tau_e,tau_u,metric,mean,std\n";
  for (const auto& row : rows) {
    const auto it = grid_of.find(row.cell_id);
    if (it == grid_of.end()) continue;
    for (const char* metric :
         {"f1", "far", "labeling_cost", "labeling_cost_naive", "update_cost"}) {
      const auto m = row.metrics.find(metric);
      if (m == row.metrics.end()) continue;
      os << format_double(it->second.first) << ',' << it->second.second << ','
         << metric << ',' << format_double(m->second.first) << ','
         << format_double(m->second.second) << '\n';
    }
  }
  atomic_write(fs::path(spec.out_dir) / "sweep_long.csv", os.str());
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

std::vector<AggregateRow> report(const std::string& dir) {
  const fs::path path = fs::path(dir) / "results.csv";
  std::vector<AggregateRow> rows;
  if (!fs::exists(path)) return rows;

  std::ifstream is(path);
  std::string line;
  if (!std::getline(is, line)) return rows;
  const auto header = split_csv(line);

  // Numeric columns to aggregate (identity columns excluded).
  std::vector<std::size_t> metric_cols;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] != "cell_id" && header[i] != "repeat" && header[i] != "seed" &&
        header[i] != "strategy")
      metric_cols.push_back(i);

  std::map<std::string, std::vector<std::vector<double>>> groups;  // id -> rows
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) continue;
    std::vector<double> values;
    for (const auto col : metric_cols) values.push_back(std::stod(fields[col]));
    groups[fields[0]].push_back(std::move(values));
  }

  for (const auto& [id, data] : groups) {
    AggregateRow row;
    row.cell_id = id;
    row.runs = static_cast<int>(data.size());
    for (std::size_t m = 0; m < metric_cols.size(); ++m) {
      double mean = 0.0;
      for (const auto& r : data) mean += r[m];
      mean /= static_cast<double>(data.size());
      double var = 0.0;
      if (data.size() > 1) {
        for (const auto& r : data) var += (r[m] - mean) * (r[m] - mean);
        var /= static_cast<double>(data.size() - 1);
      }
      row.metrics[header[metric_cols[m]]] = {mean, std::sqrt(var)};
    }
    rows.push_back(std::move(row));
  }

  std::ostringstream os;
  os << "cell_id,runs";
  for (const auto col : metric_cols) os << ',' << header[col] << "_mean,"
                                        << header[col] << "_std";
  os << '\n';
  for (const auto& row : rows) {
    os << row.cell_id << ',' << row.runs;
    for (const auto col : metric_cols) {
      const auto& [mean, sd] = row.metrics.at(header[col]);
      os << ',' << format_double(mean) << ',' << format_double(sd);
    }
    os << '\n';
  }
  atomic_write(fs::path(dir) / "aggregate.csv", os.str());
  return rows;
}

}  // namespace epismart
