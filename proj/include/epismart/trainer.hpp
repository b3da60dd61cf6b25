#pragma once

#include "epismart/buffer.hpp"
#include "epismart/model.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace epismart {

struct TrainConfig {
  int max_epochs = 100;
  int early_stop_patience = 15;
  double lr0 = 1e-4;
  int plateau_patience = 10;
  double lr_factor = 10.0;
  int batch_size = 32;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;  // 1-based
  double best_val_loss = std::numeric_limits<double>::infinity();
  double final_lr = 0.0;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  double wall_time_s = 0.0;
  bool skipped = false;
  bool diverged = false;
};

struct AugmentResult {
  std::vector<BufferEntry> entries;
  bool warning = false;  // set when a class is missing (no-op)
};

/// Oversample the seizure class up to the non-seizure count: circular
/// 1/8-second time shifts of each seizure window first (k = 1..7), plain
/// repetition once shift variants are exhausted. Never deletes entries or
/// changes labels.
AugmentResult augment(std::vector<BufferEntry> entries);

/// Per-class shuffled split; returns (train indices, val indices).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<BufferEntry>& entries, double val_fraction,
    std::uint64_t seed);

template <typename Scalar>
class AdamOptimizer {
 public:
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

  AdamOptimizer(Eigen::Index n, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  void step(Vector& params, const Vector& grad) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(beta1_);
    const Scalar b2 = static_cast<Scalar>(beta2_);
    m_ = b1 * m_ + (Scalar(1) - b1) * grad;
    v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseProduct(grad);
    const Scalar c1 = Scalar(1) / static_cast<Scalar>(1.0 - std::pow(beta1_, t_));
    const Scalar c2 = Scalar(1) / static_cast<Scalar>(1.0 - std::pow(beta2_, t_));
    params.array() -= static_cast<Scalar>(lr_) * (c1 * m_.array()) /
                      ((c2 * v_.array()).sqrt() + static_cast<Scalar>(eps_));
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Vector m_, v_;
};

namespace detail {

/// splitmix64: decorrelate derived RNG streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

template <typename Scalar>
std::pair<typename Classifier<Scalar>::Matrix, std::vector<int>> pack_entries(
    const std::vector<const BufferEntry*>& batch) {
  std::vector<const Window*> windows;
  std::vector<int> labels;
  windows.reserve(batch.size());
  labels.reserve(batch.size());
  for (const auto* e : batch) {
    windows.push_back(&e->window);
    labels.push_back(e->label);
  }
  return {pack_windows<Scalar>(windows), std::move(labels)};
}

template <typename Scalar>
double eval_loss(Classifier<Scalar>& model, const std::vector<const BufferEntry*>& set,
                 Eigen::Index chunk = 256) {
  double total = 0.0;
  Eigen::Index done = 0;
  while (done < static_cast<Eigen::Index>(set.size())) {
    const Eigen::Index n =
        std::min(chunk, static_cast<Eigen::Index>(set.size()) - done);
    std::vector<const BufferEntry*> part(set.begin() + done, set.begin() + done + n);
    auto [input, labels] = pack_entries<Scalar>(part);
    total += static_cast<double>(model.batch_loss(input, n, labels)) * n;
    done += n;
  }
  return total / static_cast<double>(set.size());
}

}  // namespace detail

/// Fine-tune in place: stratified train/val split, seizure-balancing
/// augmentation of the train split, Adam on mean cross-entropy, early
/// stopping and reduce-on-plateau, returning the best-validation-loss
/// parameters. Adam state is reset on every call. On divergence the input
/// model is restored untouched.
template <typename Scalar>
TrainReport fine_tune(Classifier<Scalar>& model,
                      const std::vector<BufferEntry>& entries,
                      const TrainConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  TrainReport report;
  report.final_lr = cfg.lr0;

  std::size_t n_seiz = 0;
  for (const auto& e : entries) n_seiz += e.label == 1;
  if (entries.empty() || n_seiz == 0 || n_seiz == entries.size()) {
    report.skipped = true;
    return report;
  }

  auto [train_idx, val_idx] =
      stratified_split(entries, cfg.val_fraction, detail::mix_seed(cfg.seed, 1));

  std::vector<BufferEntry> train_set;
  train_set.reserve(train_idx.size());
  for (auto i : train_idx) train_set.push_back(entries[i]);
  train_set = augment(std::move(train_set)).entries;

  std::vector<const BufferEntry*> val_set;
  for (auto i : val_idx) val_set.push_back(&entries[i]);
  if (val_set.empty())  // degenerate tiny input: validate on the train split
    for (const auto& e : train_set) val_set.push_back(&e);

  const typename Classifier<Scalar>::Vector backup_params = model.params();
  const typename Classifier<Scalar>::Vector backup_stats = model.running_stats();
  auto restore = [&] {
    model.params() = backup_params;
    model.running_stats() = backup_stats;
    model.set_train(false);
  };

  typename Classifier<Scalar>::Vector best_params = model.params();
  typename Classifier<Scalar>::Vector best_stats = model.running_stats();

  AdamOptimizer<Scalar> adam(model.param_count(), cfg.lr0);
  std::mt19937_64 shuffle_rng(detail::mix_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  int bad_early = 0;
  int bad_plateau = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    model.set_train(true);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    try {
      for (std::size_t b = 0; b < order.size();
           b += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t nb =
            std::min<std::size_t>(cfg.batch_size, order.size() - b);
        std::vector<const BufferEntry*> batch;
        batch.reserve(nb);
        for (std::size_t i = 0; i < nb; ++i)
          batch.push_back(&train_set[order[b + i]]);
        auto [input, labels] = detail::pack_entries<Scalar>(batch);
        auto res = model.backward(input, static_cast<Eigen::Index>(nb), labels);
        adam.step(model.params(), res.grad);
        epoch_loss += static_cast<double>(res.loss) * static_cast<double>(nb);
      }
    } catch (const std::runtime_error&) {
      restore();
      report.diverged = true;
      report.final_lr = adam.lr();
      report.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      return report;
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(train_set.size()));

    model.set_train(false);
    const double val = detail::eval_loss(model, val_set);
    report.val_loss.push_back(val);
    report.epochs_run = epoch;
    if (!std::isfinite(val)) {
      restore();
      report.diverged = true;
      report.final_lr = adam.lr();
      report.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      return report;
    }

    if (val < report.best_val_loss) {
      report.best_val_loss = val;
      report.best_epoch = epoch;
      best_params = model.params();
      best_stats = model.running_stats();
      bad_early = 0;
      bad_plateau = 0;
    } else {
      ++bad_early;
      ++bad_plateau;
    }

    if (bad_plateau >= cfg.plateau_patience) {
      adam.set_lr(adam.lr() / cfg.lr_factor);
      bad_plateau = 0;
    }
    if (bad_early >= cfg.early_stop_patience) break;
  }

  model.params() = best_params;
  model.running_stats() = best_stats;
  model.set_train(false);
  report.final_lr = adam.lr();
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace epismart
