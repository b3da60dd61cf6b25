// Test-only oracles, independent of the library implementation paths they
// check.
#pragma once

#include "epismart/scoring.hpp"
#include "epismart/signal.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracles {

/// Single-bin DFT amplitude of a real tone at freq_hz (window should hold an
/// integer number of cycles).
inline double dft_amplitude(const Eigen::VectorXd& x, double freq_hz, double rate_hz) {
  std::complex<double> acc(0.0, 0.0);
  const double w = 2.0 * std::numbers::pi * freq_hz / rate_hz;
  for (Eigen::Index n = 0; n < x.size(); ++n)
    acc += x[n] * std::polar(1.0, -w * static_cast<double>(n));
  return 2.0 * std::abs(acc) / static_cast<double>(x.size());
}

inline Eigen::VectorXd sine_wave(double freq_hz, double rate_hz, double duration_s,
                                 double amplitude = 1.0) {
  const auto n = static_cast<Eigen::Index>(std::llround(duration_s * rate_hz));
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x[i] = amplitude *
           std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate_hz);
  return x;
}

/// Steady-state amplitude of the filtered tone, measured over the trailing
/// tail_s seconds via the DFT bin at the tone frequency.
inline double steady_state_amplitude(const Eigen::VectorXd& filtered, double freq_hz,
                                     double rate_hz, double tail_s) {
  const auto tail = static_cast<Eigen::Index>(std::llround(tail_s * rate_hz));
  return dft_amplitude(filtered.tail(tail), freq_hz, rate_hz);
}

/// Naive O(n*m) event matcher: the stated brute-force overlap oracle.
inline epismart::MatchCounts naive_match(const std::vector<epismart::EventInterval>& predicted,
                                         const std::vector<epismart::EventInterval>& reference,
                                         const epismart::ScoringConfig& cfg) {
  epismart::MatchCounts counts;
  std::vector<bool> hit(reference.size(), false);
  for (const auto& p : predicted) {
    bool any = false;
    for (std::size_t j = 0; j < reference.size(); ++j) {
      const epismart::EventInterval ext{reference[j].start_s - cfg.pre_tolerance_s,
                                        reference[j].end_s + cfg.post_tolerance_s};
      if (epismart::overlaps(p, ext)) {
        any = true;
        hit[j] = true;
      }
    }
    if (!any) ++counts.fp;
  }
  for (const auto h : hit) h ? ++counts.tp : ++counts.fn;
  return counts;
}

/// Upper chi-square quantile via the Wilson-Hilferty approximation.
inline double chi2_quantile(double df, double z_upper) {
  const double a = 2.0 / (9.0 * df);
  const double c = 1.0 - a + z_upper * std::sqrt(a);
  return df * c * c * c;
}

}  // namespace oracles
