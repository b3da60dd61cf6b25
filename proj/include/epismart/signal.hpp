#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace epismart {

/// Invalid configuration (bad cutoffs, malformed stream specs, ...). CLI maps
/// this to exit code 2.
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Time intervals
// ---------------------------------------------------------------------------

struct EventInterval {
  double start_s = 0.0;
  double end_s = 0.0;

  double length_s() const { return end_s - start_s; }
};

/// Positive-length intersection of two intervals (0 when disjoint).
inline double overlap_s(const EventInterval& a, const EventInterval& b) {
  const double lo = std::max(a.start_s, b.start_s);
  const double hi = std::min(a.end_s, b.end_s);
  return std::max(0.0, hi - lo);
}

inline bool overlaps(const EventInterval& a, const EventInterval& b) {
  return overlap_s(a, b) > 0.0;
}

/// Throws config_error unless intervals are sorted by start and pairwise
/// non-overlapping.
void validate_events(const std::vector<EventInterval>& events);

/// Merge overlapping/touching intervals; returns sorted disjoint intervals.
std::vector<EventInterval> merge_intervals(std::vector<EventInterval> intervals);

/// Total length of the union of (possibly overlapping) intervals, seconds.
double union_length_s(const std::vector<EventInterval>& intervals);

// ---------------------------------------------------------------------------
// Sample blocks and windows
// ---------------------------------------------------------------------------

/// A contiguous chunk of multichannel signal. Rows = channels, cols = ticks.
struct SampleBlock {
  Eigen::Index channels = 0;
  double rate_hz = 0.0;
  Eigen::MatrixXd data;  // channels x samples
  double start_time_s = 0.0;

  Eigen::Index samples() const { return data.cols(); }
  double duration_s() const { return rate_hz > 0 ? samples() / rate_hz : 0.0; }
};

/// Throws config_error on shape/rate/finiteness violations.
void validate_block(const SampleBlock& block);

/// The unit of inference, selection and labeling. Stored in the model's
/// runtime precision.
struct Window {
  Eigen::MatrixXf data;  // channels x (duration_s * rate_hz)
  double start_time_s = 0.0;
  double duration_s = 4.0;
  long index = 0;

  double end_time_s() const { return start_time_s + duration_s; }
  EventInterval span() const { return {start_time_s, end_time_s()}; }
};

struct WindowingConfig {
  double duration_s = 4.0;
  double stride_s = 1.0;
};

/// Incremental windowizer: feed contiguous blocks, pop windows as they
/// complete. Splitting the stream into blocks at any boundary yields the
/// same window sequence.
class Windowizer {
 public:
  Windowizer(Eigen::Index channels, double rate_hz, WindowingConfig cfg = {});

  void push(const SampleBlock& block);
  bool next(Window& out);

  Eigen::Index window_samples() const { return window_samples_; }
  Eigen::Index stride_samples() const { return stride_samples_; }

 private:
  Eigen::Index channels_;
  double rate_hz_;
  WindowingConfig cfg_;
  Eigen::Index window_samples_;
  Eigen::Index stride_samples_;
  Eigen::MatrixXd pending_;     // unconsumed tail, channels x n
  std::int64_t pending_base_ = 0;  // absolute sample index of pending_ col 0
  std::int64_t next_window_ = 0;   // next window ordinal to emit
  std::int64_t samples_seen_ = 0;
};

/// Batch convenience over Windowizer.
std::vector<Window> windowize(const std::vector<SampleBlock>& blocks,
                              WindowingConfig cfg = {});

/// 1 iff the window's span overlaps a reference event by more than
/// overlap_fraction of the window duration (default: any positive overlap).
int window_label(const Window& w, const std::vector<EventInterval>& reference,
                 double overlap_fraction = 0.0);

// ---------------------------------------------------------------------------
// Stream specification and synthesis
// ---------------------------------------------------------------------------

/// One regime of the non-stationarity schedule, active from time_s until the
/// next segment starts.
struct DriftSegment {
  double time_s = 0.0;
  std::vector<double> gains;  // per channel; empty = all 1
  double noise_scale = 1.0;
};

/// Random rare-event process for synthetic streams.
struct EventProcess {
  double mean_gap_s = 4.0 * 3600.0;
  double min_duration_s = 10.0;
  double max_duration_s = 25.0;
  double band_lo_hz = 4.0;
  double band_hi_hz = 16.0;
  double first_event_latest_s = 600.0;  // first event must start by here
  double amplitude_rms_ratio = 3.0;     // burst amplitude vs background RMS
};

struct StreamSpec {
  enum class Source { file, synthetic };

  Source source = Source::synthetic;
  std::string path;         // file source: .csv or .bin stream
  std::string annotations;  // file source: .tsv reference events

  int channels = 4;
  double rate_hz = 64.0;
  double duration_s = 48.0 * 3600.0;

  /// Explicit event schedule. For synthetic sources an empty list means
  /// "draw events from the event process".
  std::vector<EventInterval> reference_events;

  std::vector<DriftSegment> drift;  // empty = single unit regime
  EventProcess events;
};

/// Autoregressive background coefficient shared by generator and its RMS
/// oracle: stationary RMS = noise_scale / sqrt(1 - kAr1Coeff^2).
inline constexpr double kAr1Coeff = 0.95;

/// Streaming synthetic source: AR(1) background shaped by the drift schedule
/// plus band-limited oscillation bursts. Deterministic given (spec, seed) and
/// independent of the chunking used to pull blocks.
class Synthesizer {
 public:
  Synthesizer(StreamSpec spec, std::uint64_t seed);

  const std::vector<EventInterval>& reference_events() const { return events_; }

  /// Next block of at most max_chunk_s seconds; nullopt at end of stream.
  std::optional<SampleBlock> next_block(double max_chunk_s = 60.0);

 private:
  struct PlannedEvent {
    EventInterval span;
    double freq_hz = 0.0;
    double phase = 0.0;
    double amplitude = 0.0;  // per unit channel gain
  };

  const DriftSegment& regime_at(double t) const;

  StreamSpec spec_;
  std::vector<EventInterval> events_;
  std::vector<PlannedEvent> plan_;
  std::mt19937_64 noise_rng_;
  Eigen::VectorXd ar_state_;
  std::int64_t cursor_ = 0;  // samples produced so far
  std::int64_t total_samples_ = 0;
};

/// Materialize a whole synthetic stream (small streams / tests).
std::pair<std::vector<SampleBlock>, std::vector<EventInterval>> synthesize(
    const StreamSpec& spec, std::uint64_t seed, double chunk_s = 60.0);

// ---------------------------------------------------------------------------
// Stream files
// ---------------------------------------------------------------------------

/// `.csv`: header "channels,rate_hz", one row per tick, channel-major columns.
/// `.bin`: 16-byte header (u64le channels, u64le rate), then f32le samples
/// interleaved per tick. Format selected by extension.
void write_stream(const std::string& path, const std::vector<SampleBlock>& blocks);
SampleBlock read_stream(const std::string& path);

/// Chunked reader over the same formats, for streaming consumption.
class FileBlockReader {
 public:
  explicit FileBlockReader(const std::string& path);
  ~FileBlockReader();
  FileBlockReader(FileBlockReader&&) noexcept;
  FileBlockReader& operator=(FileBlockReader&&) noexcept;

  Eigen::Index channels() const { return channels_; }
  double rate_hz() const { return rate_hz_; }
  std::optional<SampleBlock> next_block(double max_chunk_s = 60.0);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Eigen::Index channels_ = 0;
  double rate_hz_ = 0.0;
  double cursor_s_ = 0.0;
};

/// TSV annotations: "start_s<TAB>end_s" per line, sorted.
void write_annotations_tsv(const std::string& path,
                           const std::vector<EventInterval>& events);
std::vector<EventInterval> read_annotations_tsv(const std::string& path);

}  // namespace epismart
