#include "epismart/serialize.hpp"

namespace epismart {

using nlohmann::json;

void to_json(json& j, const EventInterval& v) { j = json::array({v.start_s, v.end_s}); }

void from_json(const json& j, EventInterval& v) {
  v.start_s = j.at(0).get<double>();
  v.end_s = j.at(1).get<double>();
}

void to_json(json& j, const DriftSegment& v) {
  j = json{{"time_s", v.time_s}, {"gains", v.gains}, {"noise_scale", v.noise_scale}};
}

void from_json(const json& j, DriftSegment& v) {
  v.time_s = j.value("time_s", v.time_s);
  v.gains = j.value("gains", v.gains);
  v.noise_scale = j.value("noise_scale", v.noise_scale);
}

void to_json(json& j, const EventProcess& v) {
  j = json{{"mean_gap_s", v.mean_gap_s},
           {"min_duration_s", v.min_duration_s},
           {"max_duration_s", v.max_duration_s},
           {"band_lo_hz", v.band_lo_hz},
           {"band_hi_hz", v.band_hi_hz},
           {"first_event_latest_s", v.first_event_latest_s},
           {"amplitude_rms_ratio", v.amplitude_rms_ratio}};
}

void from_json(const json& j, EventProcess& v) {
  v.mean_gap_s = j.value("mean_gap_s", v.mean_gap_s);
  v.min_duration_s = j.value("min_duration_s", v.min_duration_s);
  v.max_duration_s = j.value("max_duration_s", v.max_duration_s);
  v.band_lo_hz = j.value("band_lo_hz", v.band_lo_hz);
  v.band_hi_hz = j.value("band_hi_hz", v.band_hi_hz);
  v.first_event_latest_s = j.value("first_event_latest_s", v.first_event_latest_s);
  v.amplitude_rms_ratio = j.value("amplitude_rms_ratio", v.amplitude_rms_ratio);
}

void to_json(json& j, const StreamSpec& v) {
  j = json{{"source", v.source == StreamSpec::Source::file ? "file" : "synthetic"},
           {"channels", v.channels},
           {"rate_hz", v.rate_hz},
           {"duration_s", v.duration_s},
           {"events", v.events},
           {"drift", v.drift},
           {"reference_events", v.reference_events}};
  if (!v.path.empty()) j["path"] = v.path;
  if (!v.annotations.empty()) j["annotations"] = v.annotations;
}

void from_json(const json& j, StreamSpec& v) {
  const std::string source = j.value("source", std::string("synthetic"));
  if (source == "file")
    v.source = StreamSpec::Source::file;
  else if (source == "synthetic")
    v.source = StreamSpec::Source::synthetic;
  else
    throw config_error("stream: source must be file|synthetic");
  v.path = j.value("path", v.path);
  v.annotations = j.value("annotations", v.annotations);
  v.channels = j.value("channels", v.channels);
  v.rate_hz = j.value("rate_hz", v.rate_hz);
  v.duration_s = j.value("duration_s", v.duration_s);
  v.events = j.value("events", v.events);
  v.drift = j.value("drift", v.drift);
  v.reference_events = j.value("reference_events", v.reference_events);
}

void to_json(json& j, const WindowingConfig& v) {
  j = json{{"duration_s", v.duration_s}, {"stride_s", v.stride_s}};
}

void from_json(const json& j, WindowingConfig& v) {
  v.duration_s = j.value("duration_s", v.duration_s);
  v.stride_s = j.value("stride_s", v.stride_s);
}

void to_json(json& j, const PreprocessConfig& v) {
  j = json{{"highpass_hz", v.highpass_hz},
           {"lowpass_hz", v.lowpass_hz},
           {"notch_hz", v.notch_hz},
           {"notch_bandwidth_hz", v.notch_bandwidth_hz},
           {"order", v.order},
           {"enable_highpass", v.enable_highpass},
           {"enable_lowpass", v.enable_lowpass},
           {"enable_notch", v.enable_notch}};
}

void from_json(const json& j, PreprocessConfig& v) {
  v.highpass_hz = j.value("highpass_hz", v.highpass_hz);
  v.lowpass_hz = j.value("lowpass_hz", v.lowpass_hz);
  v.notch_hz = j.value("notch_hz", v.notch_hz);
  v.notch_bandwidth_hz = j.value("notch_bandwidth_hz", v.notch_bandwidth_hz);
  v.order = j.value("order", v.order);
  v.enable_highpass = j.value("enable_highpass", v.enable_highpass);
  v.enable_lowpass = j.value("enable_lowpass", v.enable_lowpass);
  v.enable_notch = j.value("enable_notch", v.enable_notch);
}

void to_json(json& j, const TrainConfig& v) {
  j = json{{"max_epochs", v.max_epochs},
           {"early_stop_patience", v.early_stop_patience},
           {"lr0", v.lr0},
           {"plateau_patience", v.plateau_patience},
           {"lr_factor", v.lr_factor},
           {"batch_size", v.batch_size},
           {"val_fraction", v.val_fraction},
           {"seed", v.seed}};
}

void from_json(const json& j, TrainConfig& v) {
  v.max_epochs = j.value("max_epochs", v.max_epochs);
  v.early_stop_patience = j.value("early_stop_patience", v.early_stop_patience);
  v.lr0 = j.value("lr0", v.lr0);
  v.plateau_patience = j.value("plateau_patience", v.plateau_patience);
  v.lr_factor = j.value("lr_factor", v.lr_factor);
  v.batch_size = j.value("batch_size", v.batch_size);
  v.val_fraction = j.value("val_fraction", v.val_fraction);
  v.seed = j.value("seed", v.seed);
}

void to_json(json& j, const TrainReport& v) {
  j = json{{"epochs_run", v.epochs_run},
           {"best_epoch", v.best_epoch},
           {"best_val_loss", v.best_val_loss},
           {"final_lr", v.final_lr},
           {"train_loss", v.train_loss},
           {"val_loss", v.val_loss},
           {"wall_time_s", v.wall_time_s},
           {"skipped", v.skipped},
           {"diverged", v.diverged}};
}

void to_json(json& j, const EngineConfig& v) {
  j = json{{"strategy", to_string(v.strategy)},
           {"tau_e", v.tau_e},
           {"tau_u", v.tau_u},
           {"neighborhood_s", v.neighborhood_s},
           {"initial_adaptation_s", v.initial_adaptation_s},
           {"buffer_capacity", v.buffer_capacity},
           {"random_select_prob", v.random_select_prob},
           {"no_update_stage0", v.no_update_stage0},
           {"train", v.train},
           {"seed", v.seed}};
}

void from_json(const json& j, EngineConfig& v) {
  if (j.contains("strategy"))
    v.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  v.tau_e = j.value("tau_e", v.tau_e);
  v.tau_u = j.value("tau_u", v.tau_u);
  v.neighborhood_s = j.value("neighborhood_s", v.neighborhood_s);
  v.initial_adaptation_s = j.value("initial_adaptation_s", v.initial_adaptation_s);
  v.buffer_capacity = j.value("buffer_capacity", v.buffer_capacity);
  v.random_select_prob = j.value("random_select_prob", v.random_select_prob);
  v.no_update_stage0 = j.value("no_update_stage0", v.no_update_stage0);
  v.train = j.value("train", v.train);
  v.seed = j.value("seed", v.seed);
}

void to_json(json& j, const ScoringConfig& v) {
  j = json{{"smooth_len", v.smooth_len},
           {"decision_threshold", v.decision_threshold},
           {"pre_tolerance_s", v.pre_tolerance_s},
           {"post_tolerance_s", v.post_tolerance_s},
           {"merge_gap_s", v.merge_gap_s},
           {"min_event_s", v.min_event_s}};
}

void from_json(const json& j, ScoringConfig& v) {
  v.smooth_len = j.value("smooth_len", v.smooth_len);
  v.decision_threshold = j.value("decision_threshold", v.decision_threshold);
  v.pre_tolerance_s = j.value("pre_tolerance_s", v.pre_tolerance_s);
  v.post_tolerance_s = j.value("post_tolerance_s", v.post_tolerance_s);
  v.merge_gap_s = j.value("merge_gap_s", v.merge_gap_s);
  v.min_event_s = j.value("min_event_s", v.min_event_s);
}

void to_json(json& j, const MetricsReport& v) {
  j = json{{"tp", v.tp},
           {"fp", v.fp},
           {"fn", v.fn},
           {"precision", v.precision},
           {"recall", v.recall},
           {"f1", v.f1},
           {"far", v.far},
           {"labeling_cost", v.labeling_cost},
           {"labeling_cost_naive", v.labeling_cost_naive},
           {"update_cost", v.update_cost},
           {"stream_days", v.stream_days}};
}

json ledgers_to_json(const Ledgers& ledgers) {
  json j;
  j["selections"] = json::array();
  for (const auto& s : ledgers.selections)
    j["selections"].push_back(
        {{"index", s.index}, {"reason", to_string(s.reason)}, {"span", s.span}});
  j["labeled_intervals"] = ledgers.labeled_intervals;
  j["updates"] = json::array();
  for (const auto& u : ledgers.updates)
    j["updates"].push_back({{"trigger_index", u.trigger_index}, {"report", u.report}});
  j["incidents"] = json::array();
  for (const auto& i : ledgers.incidents)
    j["incidents"].push_back({{"trigger_index", i.trigger_index}, {"message", i.message}});
  j["pending_at_end"] = ledgers.pending_at_end;
  return j;
}

}  // namespace epismart
