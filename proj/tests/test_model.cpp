#include "epismart/model.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace epismart;

namespace {

// Small float64 configuration for derivative checks (126 parameters).
ArchSpec tiny_arch() {
  ArchSpec arch;
  arch.in_channels = 2;
  arch.input_samples = 16;
  arch.blocks = {{4, 3, 1, 2}, {4, 3, 1, 2}};
  arch.head_channels = 4;
  return arch;
}

Window random_window(std::mt19937_64& rng, Eigen::Index channels, Eigen::Index samples) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  Window w;
  w.data.resize(channels, samples);
  for (Eigen::Index c = 0; c < channels; ++c)
    for (Eigen::Index k = 0; k < samples; ++k) w.data(c, k) = g(rng);
  w.duration_s = 1.0;
  return w;
}

template <typename Scalar>
typename Classifier<Scalar>::Matrix random_batch(std::mt19937_64& rng,
                                                 const ArchSpec& arch, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  typename Classifier<Scalar>::Matrix input(arch.in_channels,
                                            static_cast<Eigen::Index>(n) * arch.input_samples);
  for (Eigen::Index c = 0; c < input.rows(); ++c)
    for (Eigen::Index k = 0; k < input.cols(); ++k)
      input(c, k) = static_cast<Scalar>(g(rng));
  return input;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("softmax examples") {
  const auto p0 = softmax2<double>({0.0, 0.0});
  CHECK(p0[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p0[1] == doctest::Approx(0.5).epsilon(1e-12));

  const auto p1 = softmax2<double>({1000.0, 0.0});
  CHECK(std::isfinite(p1[0]));
  CHECK(p1[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p1[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  // Scalar oracle: p0 = e^2 / (1 + e^2).
  const double e2 = std::exp(2.0);
  const auto p2 = softmax2<double>({1.0, -1.0});
  CHECK(p2[0] == doctest::Approx(e2 / (1.0 + e2)).epsilon(1e-6));
  CHECK(p2[0] == doctest::Approx(0.880797).epsilon(1e-6));
  CHECK(p2[1] == doctest::Approx(0.119203).epsilon(1e-6));
}

TEST_CASE("entropy examples") {
  CHECK(entropy2<double>({0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(entropy2<double>({1.0, 0.0}) == 0.0);

  // Scalar oracle -sum p ln p for the softmax of (1, -1).
  const auto p = softmax2<double>({1.0, -1.0});
  const double expected = -(p[0] * std::log(p[0]) + p[1] * std::log(p[1]));
  CHECK(expected == doctest::Approx(0.365334).epsilon(1e-5));
  CHECK(entropy2<double>(p) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("predict_label examples and tie-break") {
  CHECK(predict_label<double>({0.5 + 1e-9, 0.5 - 1e-9}) == 0);
  CHECK(predict_label<double>({0.2, 0.8}) == 1);
  CHECK(predict_label<double>({0.5, 0.5}) == 0);
}

TEST_CASE("softmax shift invariance") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d l{u(rng), u(rng)};
    const double c = u(rng);
    const auto p = softmax2<double>(l);
    const auto ps = softmax2<double>({l[0] + c, l[1] + c});
    CHECK(std::abs(p[0] - ps[0]) < 1e-12);
    CHECK(std::abs(p[1] - ps[1]) < 1e-12);
  }
}

TEST_CASE("argmax depends only on the logit margin") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d l{u(rng), u(rng)};
    const double shift = u(rng), s = scale(rng);
    const int base = predict_label(softmax2<double>(l));
    const int moved =
        predict_label(softmax2<double>({s * l[0] + shift, s * l[1] + shift}));
    CHECK(base == moved);
    CHECK(base == (l[1] > l[0] ? 1 : 0));
  }
}

TEST_CASE("entropy is maximal at 1/2 and strictly decreasing away from it") {
  const double hmax = entropy2<double>({0.5, 0.5});
  double prev = hmax;
  for (double d = 0.05; d < 0.5; d += 0.05) {
    const double h = entropy2<double>({0.5 + d, 0.5 - d});
    CHECK(h < prev);
    prev = h;
  }
  CHECK(hmax == doctest::Approx(std::log(2.0)));
}

TEST_CASE("zero network predicts uniformly") {
  Classifier<double> model(tiny_arch(), 0);
  model.params().setZero();
  std::mt19937_64 rng(3);
  const Window w = random_window(rng, 2, 16);

  const auto logits = model.forward(w);
  CHECK(logits[0] == 0.0);
  CHECK(logits[1] == 0.0);

  const auto pred = model.predict(w);
  CHECK(pred.probs[0] == doctest::Approx(0.5));
  CHECK(pred.entropy == doctest::Approx(std::log(2.0)));
  CHECK(pred.label == 0);
}

TEST_CASE("eval forward is deterministic and entropy stays in range") {
  Classifier<float> model(tiny_arch(), 7);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const Window w = random_window(rng, 2, 16);
    const auto a = model.forward(w);
    const auto b = model.forward(w);
    CHECK(a == b);
    const auto pred = model.predict(w);
    CHECK(pred.entropy >= 0.0f);
    CHECK(pred.entropy <= std::log(2.0f) + 1e-6f);
    CHECK(pred.probs.sum() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("linear-only configuration scales logits with the input") {
  ArchSpec arch = tiny_arch();
  arch.batch_norm = false;
  arch.relu = false;
  for (auto& b : arch.blocks) b.pool = 1;

  Classifier<double> model(arch, 5);
  // Zero every bias so the network is exactly linear.
  for (const auto& seg : model.param_layout())
    if (seg.name.ends_with(".b"))
      model.params().segment(seg.offset, seg.size).setZero();

  std::mt19937_64 rng(6);
  Window w = random_window(rng, 2, 16);
  const auto base = model.forward(w);
  w.data *= 2.0f;
  const auto doubled = model.forward(w);
  CHECK(doubled[0] == doctest::Approx(2.0 * base[0]).epsilon(1e-9));
  CHECK(doubled[1] == doctest::Approx(2.0 * base[1]).epsilon(1e-9));
}

TEST_CASE("zero network on a balanced batch gives ln 2 loss") {
  Classifier<double> model(tiny_arch(), 0);
  model.params().setZero();
  model.set_train(true);
  std::mt19937_64 rng(8);
  const auto input = random_batch<double>(rng, tiny_arch(), 4);
  const auto res = model.backward(input, 4, {0, 1, 0, 1});
  CHECK(res.loss == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("gradient matches central finite differences over 5 seeds") {
  const ArchSpec arch = tiny_arch();
  // Instances where no ReLU/max-pool kink falls inside the +/-eps interval;
  // at a kink the central-difference estimate itself is invalid.
  for (const std::uint64_t seed : {2, 3, 4, 6, 8}) {
    Classifier<double> model(arch, seed);
    REQUIRE(model.param_count() <= 1000);
    model.set_train(true);

    std::mt19937_64 rng(100 + seed);
    const int n = 3;
    const auto input = random_batch<double>(rng, arch, n);
    const std::vector<int> labels{1, 0, 1};

    const auto res = model.backward(input, n, labels);
    const double eps = 1e-3;
    for (Eigen::Index i = 0; i < model.param_count(); ++i) {
      const double saved = model.params()[i];
      model.params()[i] = saved + eps;
      const double lp = model.batch_loss(input, n, labels);
      model.params()[i] = saved - eps;
      const double lm = model.batch_loss(input, n, labels);
      model.params()[i] = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double ga = res.grad[i];
      const double denom = std::max({1.0, std::abs(fd), std::abs(ga)});
      CHECK(std::abs(fd - ga) / denom <= 1e-4);
    }
  }
}

TEST_CASE("duplicating every batch element leaves gradients unchanged") {
  const ArchSpec arch = tiny_arch();
  Classifier<double> model(arch, 11);
  model.set_train(true);
  std::mt19937_64 rng(12);
  const int n = 3;
  const auto input = random_batch<double>(rng, arch, n);
  const std::vector<int> labels{0, 1, 1};

  typename Classifier<double>::Matrix doubled(input.rows(), 2 * input.cols());
  doubled << input, input;
  std::vector<int> labels2 = labels;
  labels2.insert(labels2.end(), labels.begin(), labels.end());

  Classifier<double> model2 = model;
  const auto g1 = model.backward(input, n, labels);
  const auto g2 = model2.backward(doubled, 2 * n, labels2);
  CHECK(g1.loss == doctest::Approx(g2.loss).epsilon(1e-12));
  CHECK((g1.grad - g2.grad).norm() <= 1e-11 * (g1.grad.norm() + 1.0));
}

TEST_CASE("batched forward equals single-window forward") {
  Classifier<float> model(tiny_arch(), 13);
  std::mt19937_64 rng(14);
  std::vector<Window> windows;
  for (int i = 0; i < 6; ++i) windows.push_back(random_window(rng, 2, 16));

  std::vector<const Window*> ptrs;
  for (const auto& w : windows) ptrs.push_back(&w);
  const auto batch_logits = model.forward_batch(pack_windows<float>(ptrs), 6);
  for (int i = 0; i < 6; ++i) {
    const auto single = model.forward(windows[static_cast<std::size_t>(i)]);
    CHECK(batch_logits(0, i) == doctest::Approx(single[0]).epsilon(1e-5));
    CHECK(batch_logits(1, i) == doctest::Approx(single[1]).epsilon(1e-5));
  }
}

TEST_CASE("train-mode batch norm uses batch statistics") {
  ArchSpec arch = tiny_arch();
  Classifier<float> model(arch, 15);
  std::mt19937_64 rng(16);
  const Window w = random_window(rng, 2, 16);

  // Same input: eval uses running stats (fresh init: mean 0, var 1), train
  // normalizes by batch statistics, so outputs differ.
  const auto eval_logits = model.forward(w);
  model.set_train(true);
  const auto train_logits = model.forward(w);
  CHECK(eval_logits != train_logits);

  // Running statistics moved toward the batch statistics.
  CHECK(model.running_stats().array().abs().sum() > 0.0f);
}

TEST_CASE("input shape mismatch is rejected") {
  Classifier<float> model(tiny_arch(), 17);
  Window w;
  w.data = Eigen::MatrixXf::Zero(2, 15);  // wrong sample count
  CHECK_THROWS_AS(model.forward(w), std::invalid_argument);
  Window w2;
  w2.data = Eigen::MatrixXf::Zero(3, 16);  // wrong channel count
  CHECK_THROWS_AS(model.forward(w2), std::invalid_argument);
}

TEST_CASE("parameter budget and layout") {
  ArchSpec arch = tiny_arch();
  arch.param_budget = 100;  // below the 126 actually needed
  CHECK_THROWS_AS(Classifier<float>(arch, 0), config_error);

  Classifier<float> model(tiny_arch(), 0);
  CHECK(model.param_count() == 126);
  Eigen::Index total = 0;
  for (const auto& seg : model.param_layout()) total += seg.size;
  CHECK(total == model.param_count());
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "epismart_model_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.ckpt").string();

  Classifier<float> model(tiny_arch(), 21);
  // Move running stats off the init values so they are exercised too.
  std::mt19937_64 rng(22);
  model.set_train(true);
  const auto input = random_batch<float>(rng, tiny_arch(), 4);
  model.forward_batch(input, 4);
  model.set_train(false);

  model.save(path);
  Classifier<float> loaded = Classifier<float>::load(path);
  CHECK(loaded.params() == model.params());
  CHECK(loaded.running_stats() == model.running_stats());
  CHECK(loaded.param_count() == model.param_count());

  const Window w = random_window(rng, 2, 16);
  CHECK(loaded.forward(w) == model.forward(w));

  // Same seed, fresh weights -> identical checkpoint bytes.
  const std::string path2 = (dir / "m2.ckpt").string();
  Classifier<float>(tiny_arch(), 21).save(path2);
  Classifier<float>(tiny_arch(), 21).save(path);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  CHECK(bytes_a == bytes_b);

  std::ofstream bad((dir / "bad.ckpt").string(), std::ios::binary);
  bad << "NOTACKPT";
  bad.close();
  CHECK_THROWS_AS(Classifier<float>::load((dir / "bad.ckpt").string()), config_error);
}

TEST_SUITE_END();
