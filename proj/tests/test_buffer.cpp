#include "epismart/buffer.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <map>
#include <sstream>

using namespace epismart;

namespace {

BufferEntry entry(int label, long step) {
  BufferEntry e;
  e.window.data = Eigen::MatrixXf::Constant(1, 4, static_cast<float>(step));
  e.window.start_time_s = static_cast<double>(step);
  e.label = label;
  e.insert_step = step;
  return e;
}

}  // namespace

TEST_SUITE_BEGIN("buffer");

TEST_CASE("non-seizure inserts fill to capacity without eviction") {
  ReplayBuffer buf(4, 1);
  for (long i = 0; i < 4; ++i) CHECK(buf.insert(entry(0, i)).empty());
  CHECK(buf.size() == 4);
  CHECK(buf.class_counts() == std::pair<std::size_t, std::size_t>{4, 0});
}

TEST_CASE("a seizure entry displaces a random non-seizure entry when full") {
  ReplayBuffer buf(4, 2);
  for (long i = 0; i < 4; ++i) buf.insert(entry(0, i));
  const auto evicted = buf.insert(entry(1, 99));
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].label == 0);
  CHECK(buf.size() == 4);
  CHECK(buf.class_counts() == std::pair<std::size_t, std::size_t>{3, 1});
}

TEST_CASE("six seizure inserts into capacity four") {
  // Hand simulation: four inserts fill the buffer, the remaining two each
  // evict a random seizure entry, because only seizure entries remain.
  ReplayBuffer buf(4, 3);
  long evictions = 0;
  for (long i = 0; i < 6; ++i) {
    const auto ev = buf.insert(entry(1, i));
    for (const auto& e : ev) {
      CHECK(e.label == 1);
      ++evictions;
    }
  }
  CHECK(evictions == 2);
  CHECK(buf.size() == 4);
  CHECK(buf.class_counts() == std::pair<std::size_t, std::size_t>{0, 4});
}

TEST_CASE("snapshot copies entries and leaves the buffer unchanged") {
  ReplayBuffer buf(8, 4);
  CHECK(buf.snapshot().empty());
  for (long i = 0; i < 3; ++i) buf.insert(entry(0, i));
  buf.insert(entry(1, 3));

  const auto snap1 = buf.snapshot();
  const auto snap2 = buf.snapshot();
  CHECK(snap1.size() == 4);
  REQUIRE(snap1.size() == snap2.size());
  for (std::size_t i = 0; i < snap1.size(); ++i) {
    CHECK(snap1[i].insert_step == snap2[i].insert_step);
    CHECK(snap1[i].label == snap2[i].label);
  }
  CHECK(buf.class_counts() == std::pair<std::size_t, std::size_t>{3, 1});
}

TEST_CASE("class_counts examples") {
  ReplayBuffer buf(8, 5);
  CHECK(buf.class_counts() == std::pair<std::size_t, std::size_t>{0, 0});
  for (long i = 0; i < 3; ++i) buf.insert(entry(0, i));
  buf.insert(entry(1, 3));
  CHECK(buf.class_counts() == std::pair<std::size_t, std::size_t>{3, 1});
}

TEST_CASE("size never exceeds capacity under random insert sequences") {
  std::mt19937_64 rng(6);
  std::bernoulli_distribution seizure(0.3);
  ReplayBuffer buf(16, 7);
  for (long i = 0; i < 500; ++i) {
    buf.insert(entry(seizure(rng) ? 1 : 0, i));
    CHECK(buf.size() <= 16);
  }
}

TEST_CASE("a seizure entry is never evicted while non-seizure entries exist") {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution seizure(0.45);
  ReplayBuffer buf(12, 9);
  for (long i = 0; i < 2000; ++i) {
    const auto [pre_non, pre_seiz] = buf.class_counts();
    const auto evicted = buf.insert(entry(seizure(rng) ? 1 : 0, i));
    for (const auto& e : evicted)
      if (e.label == 1)
        // Seizure eviction is legal only when nothing non-seizure was present.
        CHECK(pre_non == 0);
  }
}

TEST_CASE("eviction is uniform over resident non-seizure entries") {
  // 10^4 single-eviction trials over a full buffer of 100 entries; the
  // evicted slot should be uniform. Chi-square upper critical value at
  // p = 0.01 with df = 99 via the Wilson-Hilferty oracle (~134.6).
  constexpr int kCapacity = 100;
  constexpr int kTrials = 10000;
  std::map<long, int> evicted_count;
  for (int trial = 0; trial < kTrials; ++trial) {
    ReplayBuffer buf(kCapacity, static_cast<std::uint64_t>(trial));
    for (long i = 0; i < kCapacity; ++i) buf.insert(entry(0, i));
    const auto evicted = buf.insert(entry(0, 1000));
    REQUIRE(evicted.size() == 1);
    ++evicted_count[evicted[0].insert_step];
  }
  const double expected = static_cast<double>(kTrials) / kCapacity;
  double chi2 = 0.0;
  for (long i = 0; i < kCapacity; ++i) {
    const double observed = evicted_count.count(i) ? evicted_count[i] : 0.0;
    chi2 += (observed - expected) * (observed - expected) / expected;
  }
  CHECK(chi2 < oracles::chi2_quantile(kCapacity - 1, 2.3263478740));
}

TEST_CASE("identical insert sequence and seed give identical contents") {
  std::mt19937_64 rng(10);
  std::bernoulli_distribution seizure(0.2);
  std::vector<int> labels;
  for (int i = 0; i < 300; ++i) labels.push_back(seizure(rng) ? 1 : 0);

  auto run = [&labels] {
    ReplayBuffer buf(32, 11);
    for (std::size_t i = 0; i < labels.size(); ++i)
      buf.insert(entry(labels[i], static_cast<long>(i)));
    return buf.snapshot();
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].insert_step == b[i].insert_step);
    CHECK(a[i].label == b[i].label);
  }
}

TEST_CASE("jsonl dump lists one entry per line") {
  ReplayBuffer buf(8, 12);
  buf.insert(entry(0, 0));
  buf.insert(entry(1, 1));
  std::ostringstream os;
  buf.dump_jsonl(os);
  std::istringstream is(os.str());
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    CHECK(line.find("insert_step") != std::string::npos);
    CHECK(line.find("data") == std::string::npos);  // payload elided by default
    ++lines;
  }
  CHECK(lines == 2);

  std::ostringstream with_payload;
  buf.dump_jsonl(with_payload, true);
  CHECK(with_payload.str().find("data") != std::string::npos);
}

TEST_SUITE_END();
