#include "epismart/trainer.hpp"

namespace epismart {

namespace {

Window circular_shift(const Window& w, Eigen::Index shift) {
  Window out = w;
  const Eigen::Index t = w.data.cols();
  shift = ((shift % t) + t) % t;
  if (shift == 0) return out;
  out.data.leftCols(t - shift) = w.data.rightCols(t - shift);
  out.data.rightCols(shift) = w.data.leftCols(shift);
  return out;
}

}  // namespace

AugmentResult augment(std::vector<BufferEntry> entries) {
  AugmentResult result;
  std::vector<std::size_t> seizure_idx;
  std::size_t n_non = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].label == 1)
      seizure_idx.push_back(i);
    else
      ++n_non;
  }
  result.entries = std::move(entries);
  if (seizure_idx.empty() || n_non == 0) {
    result.warning = true;
    return result;
  }

  std::size_t n_seiz = seizure_idx.size();
  // Time-shift variants: k/8 s for k = 1..7, cycling originals.
  for (int k = 1; k <= 7 && n_seiz < n_non; ++k) {
    for (std::size_t s = 0; s < seizure_idx.size() && n_seiz < n_non; ++s) {
      const BufferEntry& src = result.entries[seizure_idx[s]];
      const double rate = src.window.data.cols() / src.window.duration_s;
      const auto shift = static_cast<Eigen::Index>(std::lround(k * 0.125 * rate));
      BufferEntry copy = src;
      copy.window = circular_shift(src.window, shift);
      result.entries.push_back(std::move(copy));
      ++n_seiz;
    }
  }
  // Plain repetition once shifts are exhausted.
  for (std::size_t s = 0; n_seiz < n_non; s = (s + 1) % seizure_idx.size()) {
    result.entries.push_back(result.entries[seizure_idx[s]]);
    ++n_seiz;
  }
  return result;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<BufferEntry>& entries, double val_fraction,
    std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw config_error("split: val_fraction must be in (0, 1)");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train, val;
  for (int label = 0; label < 2; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].label == label) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(
        val_fraction * static_cast<double>(idx.size()));
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  return {std::move(train), std::move(val)};
}

}  // namespace epismart
