#include "epismart/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace epismart {

void validate_events(const std::vector<EventInterval>& events) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!(events[i].end_s > events[i].start_s))
      throw config_error("events: end_s must exceed start_s");
    if (i > 0 && events[i].start_s < events[i - 1].end_s)
      throw config_error("events: must be sorted and non-overlapping");
  }
}

std::vector<EventInterval> merge_intervals(std::vector<EventInterval> intervals) {
  std::sort(intervals.begin(), intervals.end(),
            [](const EventInterval& a, const EventInterval& b) {
              return a.start_s < b.start_s;
            });
  std::vector<EventInterval> merged;
  for (const auto& iv : intervals) {
    if (!merged.empty() && iv.start_s <= merged.back().end_s)
      merged.back().end_s = std::max(merged.back().end_s, iv.end_s);
    else
      merged.push_back(iv);
  }
  return merged;
}

double union_length_s(const std::vector<EventInterval>& intervals) {
  double total = 0.0;
  for (const auto& iv : merge_intervals(intervals)) total += iv.length_s();
  return total;
}

void validate_block(const SampleBlock& block) {
  if (block.rate_hz <= 0.0) throw config_error("block: rate_hz must be > 0");
  if (block.channels <= 0 || block.data.rows() != block.channels)
    throw config_error("block: channel/data shape mismatch");
  if (!block.data.allFinite())
    throw config_error("block: amplitudes must be finite");
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

namespace {

Eigen::Index seconds_to_samples(double seconds, double rate_hz,
                                const char* what) {
  const double raw = seconds * rate_hz;
  const double rounded = std::round(raw);
  if (rounded < 1.0 || std::abs(raw - rounded) > 1e-6)
    throw config_error(std::string(what) + " must be a positive whole number of samples");
  return static_cast<Eigen::Index>(rounded);
}

}  // namespace

Windowizer::Windowizer(Eigen::Index channels, double rate_hz, WindowingConfig cfg)
    : channels_(channels),
      rate_hz_(rate_hz),
      cfg_(cfg),
      window_samples_(seconds_to_samples(cfg.duration_s, rate_hz, "window duration")),
      stride_samples_(seconds_to_samples(cfg.stride_s, rate_hz, "window stride")),
      pending_(channels, 0) {
  if (channels <= 0 || rate_hz <= 0.0)
    throw config_error("windowizer: invalid channels/rate");
}

void Windowizer::push(const SampleBlock& block) {
  if (block.channels != channels_ || block.rate_hz != rate_hz_)
    throw config_error("windowizer: block shape/rate mismatch");
  const double expected_t = samples_seen_ / rate_hz_;
  if (samples_seen_ == 0) {
    if (std::abs(block.start_time_s) > 0.5 / rate_hz_)
      throw config_error("windowizer: stream must start at t=0");
  } else if (std::abs(block.start_time_s - expected_t) > 0.5 / rate_hz_) {
    throw config_error("windowizer: blocks must be contiguous");
  }

  const Eigen::Index old = pending_.cols();
  pending_.conservativeResize(Eigen::NoChange, old + block.samples());
  pending_.rightCols(block.samples()) = block.data;
  samples_seen_ += block.samples();
}

bool Windowizer::next(Window& out) {
  const std::int64_t start = next_window_ * stride_samples_;
  if (start + window_samples_ > samples_seen_) return false;

  const Eigen::Index local = static_cast<Eigen::Index>(start - pending_base_);
  out.data = pending_.middleCols(local, window_samples_).cast<float>();
  out.start_time_s = static_cast<double>(start) / rate_hz_;
  out.duration_s = cfg_.duration_s;
  out.index = static_cast<long>(next_window_);
  ++next_window_;

  // Drop samples no future window can reach.
  const std::int64_t keep_from = next_window_ * stride_samples_;
  if (keep_from > pending_base_) {
    const Eigen::Index drop = static_cast<Eigen::Index>(keep_from - pending_base_);
    const Eigen::Index remain = pending_.cols() - drop;
    pending_ = pending_.rightCols(remain).eval();
    pending_base_ = keep_from;
  }
  return true;
}

std::vector<Window> windowize(const std::vector<SampleBlock>& blocks,
                              WindowingConfig cfg) {
  std::vector<Window> out;
  if (blocks.empty()) return out;
  Windowizer w(blocks.front().channels, blocks.front().rate_hz, cfg);
  Window win;
  for (const auto& b : blocks) {
    w.push(b);
    while (w.next(win)) out.push_back(std::move(win));
  }
  return out;
}

int window_label(const Window& w, const std::vector<EventInterval>& reference,
                 double overlap_fraction) {
  const EventInterval span = w.span();
  const double need = overlap_fraction * w.duration_s;
  for (const auto& ev : reference) {
    if (ev.start_s >= span.end_s) break;
    if (overlap_s(span, ev) > need) return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

namespace {

std::vector<DriftSegment> normalize_drift(const StreamSpec& spec) {
  std::vector<DriftSegment> drift = spec.drift;
  std::sort(drift.begin(), drift.end(),
            [](const DriftSegment& a, const DriftSegment& b) {
              return a.time_s < b.time_s;
            });
  if (drift.empty() || drift.front().time_s > 0.0)
    drift.insert(drift.begin(), DriftSegment{});
  for (auto& seg : drift) {
    if (seg.gains.empty())
      seg.gains.assign(static_cast<std::size_t>(spec.channels), 1.0);
    if (static_cast<int>(seg.gains.size()) != spec.channels)
      throw config_error("drift segment: gains size must match channel count");
    if (seg.noise_scale <= 0.0)
      throw config_error("drift segment: noise_scale must be > 0");
  }
  return drift;
}

}  // namespace

Synthesizer::Synthesizer(StreamSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), noise_rng_(seed) {
  if (spec_.source != StreamSpec::Source::synthetic)
    throw config_error("synthesizer: spec is not synthetic");
  if (spec_.channels <= 0 || spec_.rate_hz <= 0.0 || spec_.duration_s <= 0.0)
    throw config_error("synthesizer: invalid channels/rate/duration");
  spec_.drift = normalize_drift(spec_);
  total_samples_ = static_cast<std::int64_t>(std::llround(spec_.duration_s * spec_.rate_hz));
  ar_state_ = Eigen::VectorXd::Zero(spec_.channels);

  // Event schedule: explicit list wins, otherwise draw from the process.
  std::mt19937_64 plan_rng(seed ^ 0x9E3779B97F4A7C15ull);
  const EventProcess& ep = spec_.events;
  if (!spec_.reference_events.empty()) {
    validate_events(spec_.reference_events);
    if (spec_.reference_events.back().end_s > spec_.duration_s)
      throw config_error("synthesizer: scheduled event past end of stream");
    if (spec_.reference_events.front().start_s >= std::min(3600.0, spec_.duration_s))
      throw config_error("synthesizer: first event must begin within the first hour");
    events_ = spec_.reference_events;
  } else if (ep.mean_gap_s > 0.0 && ep.max_duration_s > 0.0) {
    std::uniform_real_distribution<double> udur(ep.min_duration_s, ep.max_duration_s);
    std::uniform_real_distribution<double> ufirst(
        30.0, std::max(31.0, std::min(ep.first_event_latest_s,
                                      spec_.duration_s - ep.max_duration_s - 1.0)));
    double start = ufirst(plan_rng);
    while (true) {
      const double dur = udur(plan_rng);
      if (start + dur > spec_.duration_s - 1.0) break;
      events_.push_back({start, start + dur});
      std::uniform_real_distribution<double> ugap(0.5 * ep.mean_gap_s,
                                                  1.5 * ep.mean_gap_s);
      start = start + dur + ugap(plan_rng);
    }
  }

  const double stationary = 1.0 / std::sqrt(1.0 - kAr1Coeff * kAr1Coeff);
  std::uniform_real_distribution<double> ufreq(ep.band_lo_hz, ep.band_hi_hz);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
  for (const auto& ev : events_) {
    PlannedEvent pe;
    pe.span = ev;
    pe.freq_hz = ufreq(plan_rng);
    pe.phase = uphase(plan_rng);
    pe.amplitude = ep.amplitude_rms_ratio * regime_at(ev.start_s).noise_scale * stationary;
    plan_.push_back(pe);
  }
}

const DriftSegment& Synthesizer::regime_at(double t) const {
  const auto& drift = spec_.drift;
  std::size_t i = 0;
  while (i + 1 < drift.size() && drift[i + 1].time_s <= t) ++i;
  return drift[i];
}

std::optional<SampleBlock> Synthesizer::next_block(double max_chunk_s) {
  if (cursor_ >= total_samples_) return std::nullopt;
  const auto chunk = static_cast<std::int64_t>(std::llround(max_chunk_s * spec_.rate_hz));
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::min<std::int64_t>(chunk, total_samples_ - cursor_));

  SampleBlock block;
  block.channels = spec_.channels;
  block.rate_hz = spec_.rate_hz;
  block.start_time_s = static_cast<double>(cursor_) / spec_.rate_hz;
  block.data.resize(spec_.channels, n);

  std::normal_distribution<double> stdnormal(0.0, 1.0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double t = static_cast<double>(cursor_ + k) / spec_.rate_hz;
    const DriftSegment& seg = regime_at(t);
    for (Eigen::Index c = 0; c < spec_.channels; ++c) {
      ar_state_[c] = kAr1Coeff * ar_state_[c] + seg.noise_scale * stdnormal(noise_rng_);
      block.data(c, k) = seg.gains[static_cast<std::size_t>(c)] * ar_state_[c];
    }
  }

  const double t0 = block.start_time_s;
  const double t1 = t0 + static_cast<double>(n) / spec_.rate_hz;
  for (const auto& pe : plan_) {
    if (pe.span.end_s <= t0 || pe.span.start_s >= t1) continue;
    const double ramp = std::min(1.0, 0.25 * pe.span.length_s());
    const auto k_lo = static_cast<Eigen::Index>(
        std::max<std::int64_t>(0, std::llround(pe.span.start_s * spec_.rate_hz) - cursor_));
    const auto k_hi = static_cast<Eigen::Index>(std::min<std::int64_t>(
        n, std::llround(pe.span.end_s * spec_.rate_hz) - cursor_));
    for (Eigen::Index k = k_lo; k < k_hi; ++k) {
      const double t = static_cast<double>(cursor_ + k) / spec_.rate_hz;
      const double env =
          std::min({1.0, (t - pe.span.start_s) / ramp, (pe.span.end_s - t) / ramp});
      if (env <= 0.0) continue;
      const double osc =
          pe.amplitude * env *
          std::sin(2.0 * std::numbers::pi * pe.freq_hz * (t - pe.span.start_s) + pe.phase);
      const DriftSegment& seg = regime_at(t);
      for (Eigen::Index c = 0; c < spec_.channels; ++c)
        block.data(c, k) += seg.gains[static_cast<std::size_t>(c)] * osc;
    }
  }

  cursor_ += n;
  return block;
}

std::pair<std::vector<SampleBlock>, std::vector<EventInterval>> synthesize(
    const StreamSpec& spec, std::uint64_t seed, double chunk_s) {
  Synthesizer synth(spec, seed);
  std::vector<SampleBlock> blocks;
  while (auto b = synth.next_block(chunk_s)) blocks.push_back(std::move(*b));
  return {std::move(blocks), synth.reference_events()};
}

// ---------------------------------------------------------------------------
// Stream files
// ---------------------------------------------------------------------------

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_u64le(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

static_assert(std::endian::native == std::endian::little,
              "stream/checkpoint formats assume a little-endian host");

}  // namespace

void write_stream(const std::string& path, const std::vector<SampleBlock>& blocks) {
  if (blocks.empty()) throw config_error("write_stream: no blocks");
  const Eigen::Index channels = blocks.front().channels;
  const double rate = blocks.front().rate_hz;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_stream: cannot open " + path);

  if (has_suffix(path, ".csv")) {
    os << channels << "," << rate << "\n";
    char buf[64];
    for (const auto& b : blocks)
      for (Eigen::Index k = 0; k < b.samples(); ++k) {
        for (Eigen::Index c = 0; c < channels; ++c) {
          std::snprintf(buf, sizeof buf, "%.10g", b.data(c, k));
          if (c) os << ',';
          os << buf;
        }
        os << '\n';
      }
  } else if (has_suffix(path, ".bin")) {
    const double rate_int = std::round(rate);
    if (std::abs(rate - rate_int) > 1e-9)
      throw config_error("write_stream: .bin requires an integer rate_hz");
    write_u64le(os, static_cast<std::uint64_t>(channels));
    write_u64le(os, static_cast<std::uint64_t>(rate_int));
    std::vector<float> frame(static_cast<std::size_t>(channels));
    for (const auto& b : blocks)
      for (Eigen::Index k = 0; k < b.samples(); ++k) {
        for (Eigen::Index c = 0; c < channels; ++c)
          frame[static_cast<std::size_t>(c)] = static_cast<float>(b.data(c, k));
        os.write(reinterpret_cast<const char*>(frame.data()),
                 static_cast<std::streamsize>(frame.size() * sizeof(float)));
      }
  } else {
    throw config_error("write_stream: unknown extension (want .csv or .bin)");
  }
}

struct FileBlockReader::Impl {
  std::ifstream is;
  bool binary = false;
};

FileBlockReader::FileBlockReader(const std::string& path) : impl_(new Impl) {
  impl_->binary = has_suffix(path, ".bin");
  if (!impl_->binary && !has_suffix(path, ".csv"))
    throw config_error("read_stream: unknown extension (want .csv or .bin)");
  impl_->is.open(path, std::ios::binary);
  if (!impl_->is) throw std::runtime_error("read_stream: cannot open " + path);

  if (impl_->binary) {
    channels_ = static_cast<Eigen::Index>(read_u64le(impl_->is));
    rate_hz_ = static_cast<double>(read_u64le(impl_->is));
  } else {
    std::string header;
    std::getline(impl_->is, header);
    std::replace(header.begin(), header.end(), ',', ' ');
    std::istringstream hs(header);
    long long ch = 0;
    if (!(hs >> ch >> rate_hz_)) throw config_error("read_stream: bad csv header");
    channels_ = static_cast<Eigen::Index>(ch);
  }
  if (channels_ <= 0 || rate_hz_ <= 0)
    throw config_error("read_stream: bad header values");
}

FileBlockReader::~FileBlockReader() = default;
FileBlockReader::FileBlockReader(FileBlockReader&&) noexcept = default;
FileBlockReader& FileBlockReader::operator=(FileBlockReader&&) noexcept = default;

std::optional<SampleBlock> FileBlockReader::next_block(double max_chunk_s) {
  const auto want = static_cast<Eigen::Index>(std::llround(max_chunk_s * rate_hz_));
  SampleBlock block;
  block.channels = channels_;
  block.rate_hz = rate_hz_;
  block.start_time_s = cursor_s_;
  block.data.resize(channels_, want);

  Eigen::Index got = 0;
  if (impl_->binary) {
    std::vector<float> frame(static_cast<std::size_t>(channels_));
    while (got < want &&
           impl_->is.read(reinterpret_cast<char*>(frame.data()),
                          static_cast<std::streamsize>(frame.size() * sizeof(float)))) {
      for (Eigen::Index c = 0; c < channels_; ++c)
        block.data(c, got) = frame[static_cast<std::size_t>(c)];
      ++got;
    }
  } else {
    std::string line;
    while (got < want && std::getline(impl_->is, line)) {
      if (line.empty()) continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      for (Eigen::Index c = 0; c < channels_; ++c)
        if (!(ls >> block.data(c, got)))
          throw config_error("read_stream: short csv row");
      ++got;
    }
  }
  if (got == 0) return std::nullopt;
  block.data.conservativeResize(Eigen::NoChange, got);
  cursor_s_ += got / rate_hz_;
  return block;
}

SampleBlock read_stream(const std::string& path) {
  FileBlockReader reader(path);
  SampleBlock all;
  all.channels = reader.channels();
  all.rate_hz = reader.rate_hz();
  all.data.resize(reader.channels(), 0);
  while (auto b = reader.next_block(600.0)) {
    const Eigen::Index old = all.data.cols();
    all.data.conservativeResize(Eigen::NoChange, old + b->samples());
    all.data.rightCols(b->samples()) = b->data;
  }
  return all;
}

void write_annotations_tsv(const std::string& path,
                           const std::vector<EventInterval>& events) {
  validate_events(events);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_annotations: cannot open " + path);
  char buf[96];
  for (const auto& ev : events) {
    std::snprintf(buf, sizeof buf, "%.10g\t%.10g\n", ev.start_s, ev.end_s);
    os << buf;
  }
}

std::vector<EventInterval> read_annotations_tsv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_annotations: cannot open " + path);
  std::vector<EventInterval> events;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EventInterval ev;
    if (!(ls >> ev.start_s >> ev.end_s))
      throw config_error("read_annotations: bad line: " + line);
    events.push_back(ev);
  }
  validate_events(events);
  return events;
}

}  // namespace epismart
