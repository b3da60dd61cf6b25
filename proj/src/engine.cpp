#include "epismart/engine.hpp"

#include <algorithm>
#include <cmath>

namespace epismart {

namespace {
// Hourly baseline update period, in windows (1 s stride).
constexpr long kHourWindows = 3600;
}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::epismart: return "epismart";
    case Strategy::no_update: return "no_update";
    case Strategy::update_every_hour: return "update_every_hour";
    case Strategy::random_update: return "random_update";
    case Strategy::random_update_plus_seizure: return "random_update_plus_seizure";
    case Strategy::epismart_neighborhood: return "epismart_neighborhood";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& name) {
  for (Strategy s : {Strategy::epismart, Strategy::no_update,
                     Strategy::update_every_hour, Strategy::random_update,
                     Strategy::random_update_plus_seizure,
                     Strategy::epismart_neighborhood})
    if (name == to_string(s)) return s;
  throw config_error("unknown strategy: " + name);
}

const char* to_string(SelectReason r) {
  switch (r) {
    case SelectReason::entropy: return "entropy";
    case SelectReason::predicted_seizure: return "predicted_seizure";
    case SelectReason::random: return "random";
    case SelectReason::neighborhood: return "neighborhood";
  }
  return "?";
}

void validate(const EngineConfig& cfg) {
  if (cfg.tau_e < 0.0) throw config_error("engine: tau_e must be >= 0");
  if (cfg.tau_u < 1) throw config_error("engine: tau_u must be >= 1");
  if (cfg.neighborhood_s < 0.0)
    throw config_error("engine: neighborhood_s must be >= 0");
  if (cfg.initial_adaptation_s < 0.0)
    throw config_error("engine: initial_adaptation_s must be >= 0");
  if (cfg.random_select_prob < 0.0 || cfg.random_select_prob > 1.0)
    throw config_error("engine: random_select_prob must be in [0, 1]");
}

AnnotationOracle::AnnotationOracle(std::vector<EventInterval> reference,
                                   double overlap_fraction)
    : reference_(std::move(reference)), overlap_fraction_(overlap_fraction) {
  validate_events(reference_);
}

int AnnotationOracle::label(const Window& w) const {
  ++queries_;
  return window_label(w, reference_, overlap_fraction_);
}

Engine::Engine(ClassifierF model, EngineConfig cfg)
    : model_(std::move(model)),
      cfg_(std::move(cfg)),
      buffer_(cfg_.buffer_capacity, detail::mix_seed(cfg_.seed, 11)),
      select_rng_(detail::mix_seed(cfg_.seed, 12)) {
  validate(cfg_);
  model_.set_train(false);
}

void Engine::fine_tune_buffer(long trigger_index, bool stage0) {
  TrainConfig tc = cfg_.train;
  tc.seed = detail::mix_seed(cfg_.seed, 7000 + n_updates_ + (stage0 ? 0 : 1));
  TrainReport report = fine_tune(model_, buffer_.snapshot(), tc);
  if (report.diverged)
    result_.ledgers.incidents.push_back({trigger_index, "training diverged"});
  if (stage0) {
    result_.stage0_report = std::move(report);
  } else {
    result_.ledgers.updates.push_back({trigger_index, std::move(report)});
    ++n_updates_;
  }
}

void Engine::initial_adaptation(const std::vector<Window>& first_hour,
                                const AnnotationOracle& oracle) {
  if (stage0_done_) throw std::logic_error("initial_adaptation called twice");
  const long before = oracle.query_count();
  bool any_seizure = false;
  for (const auto& w : first_hour) {
    const int label = oracle.label(w);
    any_seizure |= label == 1;
    buffer_.insert({w, label, insert_step_++});
  }
  if (!any_seizure)
    throw config_error(
        "initial adaptation: no seizure in the first hour (stream violates setup)");
  fine_tune_buffer(first_hour.empty() ? -1 : first_hour.back().index, true);
  result_.stage0_windows = static_cast<long>(first_hour.size());
  result_.stage0_oracle_queries = oracle.query_count() - before;
  stage0_done_ = true;
}

void Engine::select(const Window& w, SelectReason reason, bool counted) {
  pending_.push_back({w, counted});
  pending_idx_.insert(w.index);
  if (counted) ++counter_;
  result_.ledgers.selections.push_back({w.index, reason, w.span()});
}

// Past side of a counted selection's neighborhood, from the rolling history;
// the future side is captured as those windows arrive (bounded memory, and
// still labeled no later than update time).
void Engine::capture_past_neighbors(const Window& selected) {
  for (const auto& h : history_) {
    if (h.index == selected.index ||
        std::abs(h.start_time_s - selected.start_time_s) > 0.5 * cfg_.neighborhood_s)
      continue;
    if (pending_idx_.count(h.index)) continue;
    select(h, SelectReason::neighborhood, false);
  }
  neighbor_watch_until_ =
      std::max(neighbor_watch_until_,
               selected.start_time_s + 0.5 * cfg_.neighborhood_s);
}

bool Engine::strategy_select(const Window& w, const Prediction<float>& pred) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  switch (cfg_.strategy) {
    case Strategy::epismart:
    case Strategy::epismart_neighborhood:
      if (pred.entropy > cfg_.tau_e) {
        select(w, SelectReason::entropy, true);
        return true;
      }
      if (pred.label == 1) {
        select(w, SelectReason::predicted_seizure, true);
        return true;
      }
      return false;
    case Strategy::random_update:
      if (coin(select_rng_) < cfg_.random_select_prob) {
        select(w, SelectReason::random, true);
        return true;
      }
      return false;
    case Strategy::random_update_plus_seizure:
      if (coin(select_rng_) < cfg_.random_select_prob) {
        select(w, SelectReason::random, true);
        return true;
      }
      if (pred.label == 1) {
        select(w, SelectReason::predicted_seizure, true);
        return true;
      }
      return false;
    case Strategy::no_update:
    case Strategy::update_every_hour:
      return false;
  }
  return false;
}

void Engine::step(const Window& w, const AnnotationOracle& oracle) {
  // Prequential: the prediction always comes from the pre-update model.
  const Prediction<float> pred = model_.predict(w);
  if (stepped_ == 0) {
    result_.first_step_index = w.index;
    result_.window_duration_s = w.duration_s;
    first_step_time_ = w.start_time_s;
  } else if (stepped_ == 1) {
    result_.stride_s = w.start_time_s - first_step_time_;
  }
  result_.p1.push_back(pred.probs[1]);
  ++stepped_;

  if (cfg_.strategy == Strategy::epismart_neighborhood) {
    history_.push_back(w);
    const double horizon = 0.5 * cfg_.neighborhood_s + w.duration_s + 1.0;
    while (!history_.empty() && history_.front().start_time_s < w.start_time_s - horizon)
      history_.pop_front();
  }

  if (cfg_.strategy == Strategy::update_every_hour) {
    pending_.push_back({w, false});
    if (stepped_ % kHourWindows == 0) do_update(w.index, oracle);
    return;
  }
  if (cfg_.strategy == Strategy::no_update) return;

  const bool counted = strategy_select(w, pred);
  if (cfg_.strategy == Strategy::epismart_neighborhood) {
    if (counted) {
      capture_past_neighbors(w);
    } else if (w.start_time_s <= neighbor_watch_until_ && !pending_idx_.count(w.index)) {
      select(w, SelectReason::neighborhood, false);
    }
  }
  if (counter_ >= cfg_.tau_u) do_update(w.index, oracle);
}

void Engine::do_update(long trigger_index, const AnnotationOracle& oracle) {
  std::sort(pending_.begin(), pending_.end(),
            [](const PendingWindow& a, const PendingWindow& b) {
              return a.window.index < b.window.index;
            });

  for (auto& p : pending_) {
    const int label = oracle.label(p.window);
    result_.ledgers.labeled_intervals.push_back(p.window.span());
    buffer_.insert({std::move(p.window), label, insert_step_++});
  }
  pending_.clear();
  pending_idx_.clear();
  neighbor_watch_until_ = -1.0;
  counter_ = 0;
  fine_tune_buffer(trigger_index, false);
}

RunResult Engine::take_result() {
  result_.ledgers.pending_at_end = counter_;
  return std::move(result_);
}

RunResult Engine::run(WindowSource& source, ClassifierF model,
                      const EngineConfig& cfg, const AnnotationOracle& oracle,
                      ClassifierF* final_model) {
  Engine engine(std::move(model), cfg);
  const bool wants_stage0 =
      cfg.strategy != Strategy::no_update || cfg.no_update_stage0;

  std::vector<Window> first_hour;
  while (auto w = source.next()) {
    if (wants_stage0 && !engine.stage0_done()) {
      if (w->end_time_s() <= cfg.initial_adaptation_s + 1e-9) {
        first_hour.push_back(std::move(*w));
        continue;
      }
      engine.initial_adaptation(first_hour, oracle);
      first_hour.clear();
      first_hour.shrink_to_fit();
    }
    engine.step(*w, oracle);
  }
  if (wants_stage0 && !engine.stage0_done())
    engine.initial_adaptation(first_hour, oracle);
  if (final_model) *final_model = engine.model_;
  return engine.take_result();
}

}  // namespace epismart
