#pragma once

#include "epismart/buffer.hpp"
#include "epismart/model.hpp"
#include "epismart/signal.hpp"
#include "epismart/trainer.hpp"

#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace epismart {

enum class Strategy {
  epismart,
  no_update,
  update_every_hour,
  random_update,
  random_update_plus_seizure,
  epismart_neighborhood,
};

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

enum class SelectReason { entropy, predicted_seizure, random, neighborhood };
const char* to_string(SelectReason r);

struct EngineConfig {
  Strategy strategy = Strategy::epismart;
  double tau_e = 1e-5;  // entropy threshold, nats; selection is strict >
  int tau_u = 15;       // counted selections per update
  double neighborhood_s = 60.0;
  double initial_adaptation_s = 3600.0;
  std::size_t buffer_capacity = 3600;
  double random_select_prob = 0.0;  // random_update strategies
  bool no_update_stage0 = false;    // stage-0-only no_update variant
  TrainConfig train;
  std::uint64_t seed = 0;
};

void validate(const EngineConfig& cfg);

/// Ground-truth stand-in for the expert annotator; counts its queries.
class AnnotationOracle {
 public:
  explicit AnnotationOracle(std::vector<EventInterval> reference,
                            double overlap_fraction = 0.0);

  int label(const Window& w) const;
  long query_count() const { return queries_; }
  const std::vector<EventInterval>& reference() const { return reference_; }

 private:
  std::vector<EventInterval> reference_;
  double overlap_fraction_;
  mutable long queries_ = 0;
};

struct SelectionRecord {
  long index = 0;
  SelectReason reason = SelectReason::entropy;
  EventInterval span;
};

struct UpdateRecord {
  long trigger_index = 0;
  TrainReport report;
};

struct IncidentRecord {
  long trigger_index = 0;
  std::string message;
};

struct Ledgers {
  std::vector<SelectionRecord> selections;
  std::vector<EventInterval> labeled_intervals;
  std::vector<UpdateRecord> updates;
  std::vector<IncidentRecord> incidents;
  long pending_at_end = 0;  // counted selections discarded at stream end
};

struct RunResult {
  std::vector<float> p1;       // per stepped window, stream order
  long first_step_index = -1;  // stream index of the first stepped window
  double stride_s = 1.0;
  double window_duration_s = 4.0;
  long stage0_windows = 0;
  long stage0_oracle_queries = 0;
  TrainReport stage0_report;
  Ledgers ledgers;
};

class WindowSource {
 public:
  virtual ~WindowSource() = default;
  virtual std::optional<Window> next() = 0;
};

class MemoryWindowSource : public WindowSource {
 public:
  explicit MemoryWindowSource(std::vector<Window> windows)
      : windows_(std::move(windows)) {}
  std::optional<Window> next() override {
    if (pos_ >= windows_.size()) return std::nullopt;
    return windows_[pos_++];
  }

 private:
  std::vector<Window> windows_;
  std::size_t pos_ = 0;
};

/// One engine per stream, strictly sequential. Inference for a window always
/// precedes any update that window triggers.
class Engine {
 public:
  Engine(ClassifierF model, EngineConfig cfg);

  /// Stage 0: label every first-hour window, insert into the buffer, one
  /// fine-tune. Excluded from the cost ledgers. Throws config_error when the
  /// first hour contains no seizure window.
  void initial_adaptation(const std::vector<Window>& first_hour,
                          const AnnotationOracle& oracle);
  bool stage0_done() const { return stage0_done_; }

  void step(const Window& w, const AnnotationOracle& oracle);

  RunResult take_result();

  const ClassifierF& model() const { return model_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  int counter() const { return counter_; }

  /// Folds initial adaptation (strategy-dependent) and step over a stream.
  /// When final_model is given it receives the end-of-stream model.
  static RunResult run(WindowSource& source, ClassifierF model,
                       const EngineConfig& cfg, const AnnotationOracle& oracle,
                       ClassifierF* final_model = nullptr);

 private:
  struct PendingWindow {
    Window window;
    bool counted = false;
  };

  bool strategy_select(const Window& w, const Prediction<float>& pred);
  void select(const Window& w, SelectReason reason, bool counted);
  void capture_past_neighbors(const Window& selected);
  void do_update(long trigger_index, const AnnotationOracle& oracle);
  void fine_tune_buffer(long trigger_index, bool stage0);

  ClassifierF model_;
  EngineConfig cfg_;
  ReplayBuffer buffer_;
  std::mt19937_64 select_rng_;
  std::vector<PendingWindow> pending_;
  std::set<long> pending_idx_;
  std::deque<Window> history_;  // neighborhood variant only
  double neighbor_watch_until_ = -1.0;
  RunResult result_;
  int counter_ = 0;
  long stepped_ = 0;
  long insert_step_ = 0;
  long n_updates_ = 0;
  double first_step_time_ = 0.0;
  bool stage0_done_ = false;
};

}  // namespace epismart
