#pragma once

#include "epismart/signal.hpp"

#include <cstdint>
#include <vector>

namespace epismart {

struct ScoringConfig {
  int smooth_len = 10;              // trailing moving-average length, windows
  double decision_threshold = 0.5;  // vote fraction turning a window on
  double pre_tolerance_s = 30.0;    // reference extension before start
  double post_tolerance_s = 60.0;   // reference extension after end
  double merge_gap_s = 90.0;        // predicted events closer than this merge
  double min_event_s = 4.0;         // predicted events shorter than this drop
};

/// Timing of the decision sequence: window k spans
/// [start0_s + k*stride_s, start0_s + k*stride_s + duration_s).
struct WindowTiming {
  double start0_s = 0.0;
  double stride_s = 1.0;
  double duration_s = 4.0;
};

/// Trailing moving average over binary labels; decision is 1 when the vote
/// fraction reaches decision_threshold. Warm-up averages over the windows
/// available so far.
std::vector<std::uint8_t> smooth(const std::vector<std::uint8_t>& labels,
                                 const ScoringConfig& cfg);

/// Maximal runs of 1-decisions -> intervals; merge gaps < merge_gap_s; drop
/// intervals shorter than min_event_s.
std::vector<EventInterval> extract_events(const std::vector<std::uint8_t>& decisions,
                                          const WindowTiming& timing,
                                          const ScoringConfig& cfg);

struct MatchCounts {
  long tp = 0, fp = 0, fn = 0;
};

/// Event matching with tolerance: a reference extended by the pre/post
/// tolerances is TP when at least one predicted event overlaps it (counted
/// once), FN otherwise; a predicted event overlapping no extended reference
/// is FP. Predictions overlapping an already-matched reference are not FPs.
MatchCounts match_events(const std::vector<EventInterval>& predicted,
                         const std::vector<EventInterval>& reference,
                         const ScoringConfig& cfg);

struct RateMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0, far = 0.0;
};

/// Precision/recall/F1 plus false alarms per day, division-by-zero guarded.
RateMetrics f1_far(long tp, long fp, long fn, double stream_days);

struct CostMetrics {
  double labeling_min_per_day = 0.0;        // union of labeled intervals
  double labeling_naive_min_per_day = 0.0;  // count x window duration
  double updates_per_day = 0.0;
};

CostMetrics costs(const std::vector<EventInterval>& labeled_intervals,
                  long update_count, double stream_days,
                  double window_duration_s);

struct MetricsReport {
  long tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0, far = 0;
  double labeling_cost = 0;        // min/day, interval union
  double labeling_cost_naive = 0;  // min/day, count x duration
  double update_cost = 0;          // updates/day
  double stream_days = 0;
};

}  // namespace epismart
