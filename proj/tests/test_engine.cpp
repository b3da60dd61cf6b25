#include "epismart/engine.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace epismart;

namespace {

// Micro-stream geometry: 2 channels, 16 samples, 1-second windows at 1 Hz
// stride (16 Hz sample rate).
ArchSpec micro_arch() {
  ArchSpec arch;
  arch.in_channels = 2;
  arch.input_samples = 16;
  arch.blocks = {{4, 3, 1, 2}, {4, 3, 1, 2}};
  arch.head_channels = 4;
  return arch;
}

Window micro_window(long index, float value) {
  Window w;
  w.data = Eigen::MatrixXf::Constant(2, 16, value);
  w.start_time_s = static_cast<double>(index);
  w.duration_s = 1.0;
  w.index = index;
  return w;
}

/// n windows at value -0.5, except +0.5 at the given indices.
std::vector<Window> micro_stream(long n, const std::set<long>& positive) {
  std::vector<Window> windows;
  for (long i = 0; i < n; ++i)
    windows.push_back(micro_window(i, positive.count(i) ? 0.5f : -0.5f));
  return windows;
}

EngineConfig micro_config(Strategy strategy) {
  EngineConfig cfg;
  cfg.strategy = strategy;
  cfg.initial_adaptation_s = 8.0;  // first 8 windows are stage 0
  cfg.buffer_capacity = 64;
  cfg.tau_u = 3;
  cfg.train.max_epochs = 5;
  cfg.train.lr0 = 1e-3;
  cfg.seed = 42;
  return cfg;
}

ClassifierF zero_model() {
  ClassifierF model(micro_arch(), 0);
  model.params().setZero();
  return model;
}

/// Purely linear net (no batch-norm/ReLU), all-positive weights, zero
/// biases: logit1 = K * window value, logit0 = 0. Constant +/-0.5 windows
/// give huge margins, so the entropy is ~0 and the label follows the sign.
ClassifierF sign_model() {
  ArchSpec arch = micro_arch();
  arch.batch_norm = false;
  arch.relu = false;
  ClassifierF model(arch, 0);
  model.params().setZero();
  for (const auto& seg : model.param_layout()) {
    if (seg.name == "head2.W") {
      // Row 1 only: logit0 stays 0.
      Eigen::Map<Eigen::MatrixXf> w(model.params().data() + seg.offset, 2, 4);
      w.row(1).setConstant(0.5f);
    } else if (seg.name.ends_with(".W")) {
      model.params().segment(seg.offset, seg.size).setConstant(0.5f);
    }
  }
  return model;
}

/// Confidently predicts class 0 everywhere (entropy ~ 4e-8).
ClassifierF confident_negative_model() {
  ClassifierF model = zero_model();
  for (const auto& seg : model.param_layout())
    if (seg.name == "head2.b") model.params()[seg.offset] = 20.0f;
  return model;
}

}  // namespace

TEST_SUITE_BEGIN("engine");

TEST_CASE("config validation") {
  EngineConfig cfg;
  cfg.tau_e = -1.0;
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = {};
  cfg.tau_u = 0;
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = {};
  cfg.random_select_prob = 1.5;
  CHECK_THROWS_AS(validate(cfg), config_error);
}

TEST_CASE("initial adaptation labels, inserts and trains once") {
  const auto windows = micro_stream(8, {2, 3});
  AnnotationOracle oracle({{2.0, 4.0}});

  Engine engine(zero_model(), micro_config(Strategy::epismart));
  engine.initial_adaptation(windows, oracle);

  CHECK(engine.buffer().size() == 8);
  CHECK(engine.buffer().class_counts() ==
        std::pair<std::size_t, std::size_t>{6, 2});
  CHECK(oracle.query_count() == 8);

  const auto result = engine.take_result();
  CHECK(result.stage0_windows == 8);
  CHECK(result.stage0_oracle_queries == 8);
  // Stage 0 is excluded from the cost ledgers.
  CHECK(result.ledgers.labeled_intervals.empty());
  CHECK(result.ledgers.updates.empty());
  CHECK_FALSE(result.stage0_report.skipped);
}

TEST_CASE("initial adaptation requires a first-hour seizure") {
  const auto windows = micro_stream(8, {});
  AnnotationOracle oracle({{100.0, 104.0}});  // event outside stage 0
  Engine engine(zero_model(), micro_config(Strategy::epismart));
  CHECK_THROWS_AS(engine.initial_adaptation(windows, oracle), config_error);
}

TEST_CASE("zero network selects every window and updates every tau_U") {
  // Entropy ln 2 > tau_E at every window.
  auto windows = micro_stream(26, {2, 3});
  MemoryWindowSource source(std::move(windows));
  AnnotationOracle oracle({{2.0, 4.0}});
  const EngineConfig cfg = micro_config(Strategy::epismart);

  const RunResult rr = Engine::run(source, zero_model(), cfg, oracle);
  CHECK(rr.stage0_windows == 8);
  CHECK(rr.p1.size() == 18);  // windows 8..25
  CHECK(rr.first_step_index == 8);

  // 18 stepped windows, tau_U = 3: updates at the 3rd, 6th, ... selection.
  CHECK(rr.ledgers.updates.size() == 6);
  CHECK(rr.ledgers.selections.size() == 18);
  CHECK(rr.ledgers.updates[0].trigger_index == 10);
  CHECK(rr.ledgers.pending_at_end == 0);
  for (const auto& s : rr.ledgers.selections) CHECK(s.reason == SelectReason::entropy);
}

TEST_CASE("confident model selects nothing and never updates") {
  auto windows = micro_stream(40, {2, 3});
  MemoryWindowSource source(std::move(windows));
  AnnotationOracle oracle({{2.0, 4.0}});
  const EngineConfig cfg = micro_config(Strategy::epismart);  // tau_e 1e-5

  const RunResult rr = Engine::run(source, confident_negative_model(), cfg, oracle);
  CHECK(rr.ledgers.selections.empty());
  CHECK(rr.ledgers.updates.empty());
  CHECK(rr.ledgers.labeled_intervals.empty());
  // Oracle was consulted for stage 0 only.
  CHECK(oracle.query_count() == rr.stage0_windows);
}

TEST_CASE("counter semantics: update fires at the tau_U-th selection") {
  // Positive windows at 11, 14, 17, 21, ... are the only selections
  // (predicted seizure); everything else is confidently negative.
  auto windows = micro_stream(30, {2, 3, 11, 14, 17, 21, 29});
  MemoryWindowSource source(std::move(windows));
  AnnotationOracle oracle({{2.0, 4.0}});
  EngineConfig cfg = micro_config(Strategy::epismart);
  cfg.tau_e = 0.05;  // margins are huge, entropy never crosses this

  const RunResult rr = Engine::run(source, sign_model(), cfg, oracle);
  REQUIRE(!rr.ledgers.updates.empty());
  // Selections at 11, 14: C = 2; third selection at 17 triggers the update.
  CHECK(rr.ledgers.updates[0].trigger_index == 17);
  const auto& sel = rr.ledgers.selections;
  REQUIRE(sel.size() >= 3);
  CHECK(sel[0].index == 11);
  CHECK(sel[0].reason == SelectReason::predicted_seizure);
  CHECK(sel[1].index == 14);
  CHECK(sel[2].index == 17);
}

TEST_CASE("prequential integrity: the trigger window is scored pre-update") {
  // Twin runs sharing the same stage 0: the baseline never updates, so up to
  // and including the first update trigger the adaptive run must reproduce
  // its predictions exactly; afterwards the updated model diverges.
  auto w1 = micro_stream(20, {2, 3});
  auto w2 = micro_stream(20, {2, 3});
  MemoryWindowSource s1(std::move(w1)), s2(std::move(w2));
  AnnotationOracle oracle({{2.0, 4.0}});

  EngineConfig adaptive = micro_config(Strategy::epismart);
  adaptive.train.max_epochs = 20;
  adaptive.train.lr0 = 0.05;
  EngineConfig frozen = adaptive;
  frozen.strategy = Strategy::no_update;
  frozen.no_update_stage0 = true;

  const RunResult ra = Engine::run(s1, zero_model(), adaptive, oracle);
  const RunResult rf = Engine::run(s2, zero_model(), frozen, oracle);
  REQUIRE(ra.ledgers.updates.size() >= 1);
  REQUIRE(ra.p1.size() == rf.p1.size());

  const long first_trigger = ra.ledgers.updates[0].trigger_index;
  for (long i = ra.first_step_index; i <= first_trigger; ++i)
    CHECK(ra.p1[static_cast<std::size_t>(i - ra.first_step_index)] ==
          rf.p1[static_cast<std::size_t>(i - rf.first_step_index)]);
  CHECK(ra.p1 != rf.p1);
}

TEST_CASE("oracle parsimony: queries cover stage 0 plus labeled windows only") {
  auto windows = micro_stream(40, {2, 3, 12, 15, 18, 25, 28, 31});
  MemoryWindowSource source(std::move(windows));
  AnnotationOracle oracle({{2.0, 4.0}});
  EngineConfig cfg = micro_config(Strategy::epismart);
  cfg.tau_e = 0.05;

  const RunResult rr = Engine::run(source, sign_model(), cfg, oracle);
  CHECK(oracle.query_count() ==
        rr.stage0_windows + static_cast<long>(rr.ledgers.labeled_intervals.size()));
  // Selections still pending at stream end were never labeled.
  CHECK(rr.ledgers.pending_at_end ==
        static_cast<long>(rr.ledgers.selections.size()) -
            static_cast<long>(rr.ledgers.labeled_intervals.size()));
}

TEST_CASE("degenerate epismart equals no_update with identical stage 0") {
  // tau_E above ln 2 disables entropy selection; the model never predicts 1.
  auto w1 = micro_stream(60, {2, 3});
  auto w2 = micro_stream(60, {2, 3});
  MemoryWindowSource s1(std::move(w1)), s2(std::move(w2));
  AnnotationOracle oracle({{2.0, 4.0}});

  EngineConfig epis = micro_config(Strategy::epismart);
  epis.tau_e = 1.0;  // > ln 2
  EngineConfig noup = micro_config(Strategy::no_update);
  noup.no_update_stage0 = true;

  const RunResult r1 = Engine::run(s1, confident_negative_model(), epis, oracle);
  const RunResult r2 = Engine::run(s2, confident_negative_model(), noup, oracle);

  CHECK(r1.ledgers.updates.empty());
  CHECK(r2.ledgers.updates.empty());
  REQUIRE(r1.p1.size() == r2.p1.size());
  CHECK(r1.p1 == r2.p1);
}

TEST_CASE("no_update leaves the model untouched and the ledgers empty") {
  auto windows = micro_stream(30, {2, 3});
  MemoryWindowSource source(std::move(windows));
  AnnotationOracle oracle({{2.0, 4.0}});
  const EngineConfig cfg = micro_config(Strategy::no_update);

  ClassifierF model = confident_negative_model();
  const Eigen::VectorXf params_before = model.params();
  ClassifierF final_model = zero_model();
  const RunResult rr =
      Engine::run(source, std::move(model), cfg, oracle, &final_model);

  CHECK(rr.ledgers.selections.empty());
  CHECK(rr.ledgers.updates.empty());
  CHECK(rr.ledgers.labeled_intervals.empty());
  CHECK(final_model.params() == params_before);
  // Without stage 0 the whole stream is stepped.
  CHECK(rr.first_step_index == 0);
  CHECK(rr.p1.size() == 30);
  CHECK(oracle.query_count() == 0);
}

TEST_CASE("update_every_hour labels everything and updates 9 times on 10 hours") {
  // 36000 one-second windows; the first 3600 are stage 0.
  std::vector<Window> windows;
  for (long i = 0; i < 36000; ++i) windows.push_back(micro_window(i, -0.5f));
  for (long i = 100; i < 160; ++i) windows[i].data.setConstant(0.5f);
  MemoryWindowSource source(std::move(windows));
  AnnotationOracle oracle({{100.0, 160.0}});

  EngineConfig cfg = micro_config(Strategy::update_every_hour);
  cfg.initial_adaptation_s = 3600.0;
  cfg.buffer_capacity = 48;
  cfg.train.max_epochs = 2;

  const RunResult rr = Engine::run(source, sign_model(), cfg, oracle);
  CHECK(rr.stage0_windows == 3600);
  CHECK(rr.p1.size() == 32400);
  CHECK(rr.ledgers.updates.size() == 9);
  // Every stepped window was labeled; none were "selections".
  CHECK(rr.ledgers.labeled_intervals.size() == 32400);
  CHECK(rr.ledgers.selections.empty());
  CHECK(oracle.query_count() == 3600 + 32400);
}

TEST_CASE("random_update selection probabilities 0 and 1") {
  AnnotationOracle oracle({{2.0, 4.0}});

  auto w1 = micro_stream(30, {2, 3});
  MemoryWindowSource s1(std::move(w1));
  EngineConfig cfg = micro_config(Strategy::random_update);
  cfg.random_select_prob = 0.0;
  const RunResult none = Engine::run(s1, confident_negative_model(), cfg, oracle);
  CHECK(none.ledgers.selections.empty());

  auto w2 = micro_stream(30, {2, 3});
  MemoryWindowSource s2(std::move(w2));
  cfg.random_select_prob = 1.0;
  const RunResult all = Engine::run(s2, confident_negative_model(), cfg, oracle);
  CHECK(all.ledgers.selections.size() == all.p1.size());
  for (const auto& s : all.ledgers.selections) CHECK(s.reason == SelectReason::random);
}

TEST_CASE("random_update_plus_seizure also selects predicted seizures") {
  auto windows = micro_stream(30, {2, 3, 15, 20});
  MemoryWindowSource source(std::move(windows));
  AnnotationOracle oracle({{2.0, 4.0}});
  EngineConfig cfg = micro_config(Strategy::random_update_plus_seizure);
  cfg.random_select_prob = 0.0;
  cfg.tau_u = 10;  // keep both selections pending (no update churn)

  const RunResult rr = Engine::run(source, sign_model(), cfg, oracle);
  REQUIRE(rr.ledgers.selections.size() == 2);
  CHECK(rr.ledgers.selections[0].index == 15);
  CHECK(rr.ledgers.selections[0].reason == SelectReason::predicted_seizure);
  CHECK(rr.ledgers.selections[1].index == 20);
}

TEST_CASE("neighborhood co-labels nearby windows without counting them") {
  auto windows = micro_stream(40, {2, 3, 14, 20, 26});
  MemoryWindowSource source(std::move(windows));
  AnnotationOracle oracle({{2.0, 4.0}});
  EngineConfig cfg = micro_config(Strategy::epismart_neighborhood);
  cfg.tau_e = 0.05;
  cfg.tau_u = 3;
  cfg.neighborhood_s = 4.0;  // +/- 2 s around each counted selection

  const RunResult rr = Engine::run(source, sign_model(), cfg, oracle);
  REQUIRE(!rr.ledgers.updates.empty());
  // Update fires at the 3rd counted selection (window 26), despite the
  // neighbors that were also labeled.
  CHECK(rr.ledgers.updates[0].trigger_index == 26);

  long counted = 0, neighbors = 0;
  for (const auto& s : rr.ledgers.selections)
    s.reason == SelectReason::neighborhood ? ++neighbors : ++counted;
  CHECK(neighbors > 0);
  CHECK(rr.ledgers.labeled_intervals.size() ==
        static_cast<std::size_t>(counted + neighbors));
  // Neighbors of window 14: 12, 13, 15, 16 (2 s each side), minus pending dupes.
  std::set<long> labeled;
  for (const auto& s : rr.ledgers.selections) labeled.insert(s.index);
  for (long expect : {12L, 13L, 15L, 16L}) CHECK(labeled.count(expect) == 1);
}

TEST_CASE("run is deterministic") {
  auto make = [] {
    auto windows = micro_stream(40, {2, 3, 12, 18, 22, 30});
    return windows;
  };
  AnnotationOracle oracle({{2.0, 4.0}});
  EngineConfig cfg = micro_config(Strategy::epismart);
  cfg.tau_e = 0.05;

  auto w1 = make();
  auto w2 = make();
  MemoryWindowSource s1(std::move(w1)), s2(std::move(w2));
  const RunResult r1 = Engine::run(s1, sign_model(), cfg, oracle);
  const RunResult r2 = Engine::run(s2, sign_model(), cfg, oracle);

  CHECK(r1.p1 == r2.p1);
  REQUIRE(r1.ledgers.selections.size() == r2.ledgers.selections.size());
  for (std::size_t i = 0; i < r1.ledgers.selections.size(); ++i)
    CHECK(r1.ledgers.selections[i].index == r2.ledgers.selections[i].index);
  REQUIRE(r1.ledgers.updates.size() == r2.ledgers.updates.size());
  for (std::size_t i = 0; i < r1.ledgers.updates.size(); ++i)
    CHECK(r1.ledgers.updates[i].trigger_index == r2.ledgers.updates[i].trigger_index);
}

TEST_CASE("a diverged update is recorded and the stream continues") {
  // A NaN-poisoned stage-0 window forces a non-finite loss in every
  // fine-tune; the engine must keep the previous model and keep streaming.
  auto windows = micro_stream(20, {2, 3});
  windows[5].data.setConstant(std::numeric_limits<float>::quiet_NaN());
  MemoryWindowSource source(std::move(windows));
  AnnotationOracle oracle({{2.0, 4.0}});
  const EngineConfig cfg = micro_config(Strategy::epismart);

  const RunResult rr = Engine::run(source, zero_model(), cfg, oracle);
  CHECK(rr.p1.size() == 12);
  CHECK(rr.stage0_report.diverged);
  CHECK(!rr.ledgers.incidents.empty());
  // The pre-update model kept streaming: uniform predictions throughout.
  for (const auto p : rr.p1) CHECK(p == doctest::Approx(0.5));
}

TEST_SUITE_END();
