#include "epismart/scoring.hpp"

#include <algorithm>

namespace epismart {

std::vector<std::uint8_t> smooth(const std::vector<std::uint8_t>& labels,
                                 const ScoringConfig& cfg) {
  if (cfg.smooth_len < 1) throw config_error("scoring: smooth_len must be >= 1");
  std::vector<std::uint8_t> decisions(labels.size());
  long running = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    running += labels[k];
    if (k >= static_cast<std::size_t>(cfg.smooth_len))
      running -= labels[k - static_cast<std::size_t>(cfg.smooth_len)];
    const auto len = std::min<std::size_t>(k + 1, static_cast<std::size_t>(cfg.smooth_len));
    decisions[k] =
        static_cast<double>(running) / static_cast<double>(len) >= cfg.decision_threshold;
  }
  return decisions;
}

std::vector<EventInterval> extract_events(const std::vector<std::uint8_t>& decisions,
                                          const WindowTiming& timing,
                                          const ScoringConfig& cfg) {
  std::vector<EventInterval> runs;
  std::size_t k = 0;
  while (k < decisions.size()) {
    if (!decisions[k]) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end + 1 < decisions.size() && decisions[end + 1]) ++end;
    runs.push_back({timing.start0_s + static_cast<double>(k) * timing.stride_s,
                    timing.start0_s + static_cast<double>(end) * timing.stride_s +
                        timing.duration_s});
    k = end + 1;
  }

  // Merge near-adjacent runs, then drop the short ones.
  std::vector<EventInterval> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && r.start_s - merged.back().end_s < cfg.merge_gap_s)
      merged.back().end_s = std::max(merged.back().end_s, r.end_s);
    else
      merged.push_back(r);
  }
  std::vector<EventInterval> events;
  for (const auto& ev : merged)
    if (ev.length_s() >= cfg.min_event_s) events.push_back(ev);
  return events;
}

MatchCounts match_events(const std::vector<EventInterval>& predicted,
                         const std::vector<EventInterval>& reference,
                         const ScoringConfig& cfg) {
  std::vector<EventInterval> extended;
  extended.reserve(reference.size());
  for (const auto& r : reference)
    extended.push_back({r.start_s - cfg.pre_tolerance_s, r.end_s + cfg.post_tolerance_s});

  MatchCounts counts;
  std::vector<bool> ref_hit(extended.size(), false);
  // Sorted two-pointer sweep; extensions may overlap each other, so advance
  // the reference cursor only past extensions that end before the prediction.
  std::size_t lo = 0;
  for (const auto& p : predicted) {
    while (lo < extended.size() && extended[lo].end_s <= p.start_s) ++lo;
    bool any = false;
    for (std::size_t j = lo; j < extended.size() && extended[j].start_s < p.end_s; ++j)
      if (overlaps(p, extended[j])) {
        any = true;
        ref_hit[j] = true;
      }
    if (!any) ++counts.fp;
  }
  for (const auto hit : ref_hit)
    hit ? ++counts.tp : ++counts.fn;
  return counts;
}

RateMetrics f1_far(long tp, long fp, long fn, double stream_days) {
  if (!(stream_days > 0.0)) throw config_error("scoring: stream_days must be > 0");
  RateMetrics m;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.far = static_cast<double>(fp) / stream_days;
  return m;
}

CostMetrics costs(const std::vector<EventInterval>& labeled_intervals,
                  long update_count, double stream_days,
                  double window_duration_s) {
  if (!(stream_days > 0.0)) throw config_error("scoring: stream_days must be > 0");
  CostMetrics c;
  c.labeling_min_per_day = union_length_s(labeled_intervals) / 60.0 / stream_days;
  c.labeling_naive_min_per_day = static_cast<double>(labeled_intervals.size()) *
                                 window_duration_s / 60.0 / stream_days;
  c.updates_per_day = static_cast<double>(update_count) / stream_days;
  return c;
}

}  // namespace epismart
