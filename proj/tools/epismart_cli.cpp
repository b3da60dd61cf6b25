// Command-line front end: pretrain, run, sweep, report, synth.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include "epismart/harness.hpp"
#include "epismart/serialize.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace epismart;

namespace {

std::string default_out_root() {
  if (const char* env = std::getenv("EPISMART_OUT")) return env;
  return "out";
}

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config: " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw config_error(std::string("bad config json: ") + e.what());
  }
}

CellSpec cell_from_json(const json& j) {
  CellSpec cell;
  cell.id = j.value("id", std::string("run"));
  cell.stream = j.value("stream", desk_stream_template());
  cell.windowing = j.value("windowing", WindowingConfig{});
  cell.preprocess = j.value("preprocess", desk_preprocess(cell.stream.rate_hz));
  cell.engine = j.value("engine", EngineConfig{});
  cell.scoring = j.value("scoring", ScoringConfig{});
  cell.checkpoint = j.value("checkpoint", std::string());
  return cell;
}

void print_metrics(const std::string& id, const MetricsReport& m) {
  json j = m;
  std::cout << id << " " << j.dump() << "\n";
}

int cmd_pretrain(int subjects, const std::string& config_path, std::uint64_t seed,
                 std::string out) {
  PretrainConfig cfg = desk_pretrain_config();
  if (!config_path.empty()) {
    const json j = load_json(config_path);
    cfg.subject_template = j.value("stream", cfg.subject_template);
    cfg.preprocess = j.value("preprocess", cfg.preprocess);
    cfg.windowing = j.value("windowing", cfg.windowing);
    cfg.train = j.value("train", cfg.train);
    if (j.contains("arch")) {
      cfg.arch = arch_from_json(j.at("arch").dump());
    } else {
      cfg.arch = desk_arch(cfg.subject_template, cfg.windowing);
    }
    cfg.max_nonseizure = j.value("max_nonseizure", cfg.max_nonseizure);
  }
  cfg.n_subjects = subjects;

  if (out.empty()) out = (fs::path(default_out_root()) / "pool.ckpt").string();
  fs::create_directories(fs::path(out).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out).parent_path());
  ClassifierF model = pretrain_pool(cfg, seed);
  model.save(out);

  // Held-out pool subject sanity figure.
  const StreamSpec held_out =
      make_subject_spec(cfg.subject_template, detail::mix_seed(seed, 100 + subjects), false);
  const double f1 = window_f1(model, held_out, detail::mix_seed(seed, 200 + subjects),
                              cfg.preprocess, cfg.windowing);
  std::cout << "checkpoint " << out << " params " << model.param_count()
            << " heldout_window_f1 " << f1 << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& tau_e,
            const std::string& tau_u, const std::string& strategy,
            const std::string& seed, const std::string& checkpoint, std::string out,
            int repeats) {
  CellSpec cell = config_path.empty() ? cell_from_json(json::object())
                                      : cell_from_json(load_json(config_path));
  if (!strategy.empty()) cell.engine.strategy = strategy_from_string(strategy);
  if (!tau_e.empty()) cell.engine.tau_e = std::stod(tau_e);
  if (!tau_u.empty()) cell.engine.tau_u = std::stoi(tau_u);
  if (!checkpoint.empty()) cell.checkpoint = checkpoint;
  if (cell.checkpoint.empty())
    throw config_error("run: a pretrained --checkpoint (or config key) is required");
  std::uint64_t seed_base = 1;
  if (!seed.empty()) seed_base = std::stoull(seed);
  if (out.empty()) out = default_out_root();

  for (int r = 0; r < repeats; ++r) {
    const MetricsReport m = run_cell(cell, r, seed_base, out);
    print_metrics(cell.id + "_r" + std::to_string(r), m);
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, std::string out, int jobs) {
  const json j = load_json(config_path);
  SweepSpec spec;
  spec.base = cell_from_json(j.value("base", json::object()));
  if (spec.base.checkpoint.empty())
    throw config_error("sweep: base.checkpoint is required");
  spec.tau_es = j.at("tau_es").get<std::vector<double>>();
  spec.tau_us = j.at("tau_us").get<std::vector<int>>();
  spec.repeats = j.value("repeats", 3);
  spec.seed_base = j.value("seed_base", 1ULL);
  spec.out_dir = out.empty() ? j.value("out", default_out_root()) : out;
  sweep(spec, jobs);
  std::cout << "sweep written to " << spec.out_dir << "/sweep_long.csv\n";
  return 0;
}

int cmd_report(std::string dir) {
  if (dir.empty()) dir = default_out_root();
  const auto rows = report(dir);
  if (rows.empty()) {
    std::cerr << "warning: no runs found in " << dir << "\n";
    return 0;
  }
  for (const auto& row : rows) {
    std::cout << row.cell_id << " (n=" << row.runs << ")";
    for (const char* metric : {"f1", "far", "labeling_cost", "update_cost"}) {
      const auto it = row.metrics.find(metric);
      if (it != row.metrics.end())
        std::cout << " " << metric << "=" << it->second.first << "±"
                  << it->second.second;
    }
    std::cout << "\n";
  }
  std::cout << "aggregate written to " << dir << "/aggregate.csv\n";
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out,
              const std::string& events_out, std::uint64_t seed, double duration) {
  StreamSpec spec = desk_stream_template();
  if (!config_path.empty()) spec = load_json(config_path).value("stream", spec);
  if (duration > 0) spec.duration_s = duration;
  if (out.empty()) throw config_error("synth: --out is required (.csv or .bin)");

  auto [blocks, events] = synthesize(spec, seed);
  write_stream(out, blocks);
  if (!events_out.empty()) write_annotations_tsv(events_out, events);
  std::cout << "stream " << out << " (" << spec.channels << " ch, " << spec.rate_hz
            << " Hz, " << spec.duration_s << " s), " << events.size() << " events\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EpiSMART: label-efficient continual learning for rare-event "
               "detection on streaming signals"};
  app.require_subcommand(1);

  auto* pretrain = app.add_subcommand("pretrain", "train the subject-independent model");
  int subjects = 4;
  std::string pre_config, pre_out;
  std::uint64_t pre_seed = 1;
  pretrain->add_option("--subjects", subjects, "pool size (>= 2)");
  pretrain->add_option("--config", pre_config, "pretrain config json");
  pretrain->add_option("--seed", pre_seed, "seed");
  pretrain->add_option("--out", pre_out, "checkpoint path");

  auto* run = app.add_subcommand("run", "run one engine configuration");
  std::string run_config, run_tau_e, run_tau_u, run_strategy, run_seed, run_ckpt, run_out;
  int run_repeats = 1;
  run->add_option("--config", run_config, "run config json");
  run->add_option("--tau-e", run_tau_e, "entropy threshold override");
  run->add_option("--tau-u", run_tau_u, "update threshold override");
  run->add_option("--strategy", run_strategy, "strategy override");
  run->add_option("--seed", run_seed, "seed base override");
  run->add_option("--checkpoint", run_ckpt, "pretrained checkpoint");
  run->add_option("--out", run_out, "output directory");
  run->add_option("--repeats", run_repeats, "number of repeats");

  auto* swp = app.add_subcommand("sweep", "grid over (tau_E, tau_U)");
  std::string sweep_config, sweep_out;
  int sweep_jobs = 0;
  swp->add_option("--config", sweep_config, "sweep config json")->required();
  swp->add_option("--out", sweep_out, "output directory");
  swp->add_option("--jobs", sweep_jobs, "parallel runs (0 = hardware)");

  auto* rep = app.add_subcommand("report", "aggregate results.csv");
  std::string report_dir;
  rep->add_option("--dir", report_dir, "results directory");

  auto* synth = app.add_subcommand("synth", "emit a synthetic stream to files");
  std::string synth_config, synth_out, synth_events;
  std::uint64_t synth_seed = 1;
  double synth_duration = 0.0;
  synth->add_option("--config", synth_config, "stream config json");
  synth->add_option("--out", synth_out, "stream file (.csv or .bin)");
  synth->add_option("--events", synth_events, "annotation tsv path");
  synth->add_option("--seed", synth_seed, "seed");
  synth->add_option("--duration", synth_duration, "override duration (s)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain->parsed())
      return cmd_pretrain(subjects, pre_config, pre_seed, pre_out);
    if (run->parsed())
      return cmd_run(run_config, run_tau_e, run_tau_u, run_strategy, run_seed,
                     run_ckpt, run_out, run_repeats);
    if (swp->parsed()) return cmd_sweep(sweep_config, sweep_out, sweep_jobs);
    if (rep->parsed()) return cmd_report(report_dir);
    if (synth->parsed())
      return cmd_synth(synth_config, synth_out, synth_events, synth_seed,
                       synth_duration);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
