#include "epismart/filters.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace epismart {

namespace {

using Complex = std::complex<double>;

struct ZpkDesign {
  std::vector<Complex> zeros;
  std::vector<Complex> poles;
};

// Analog Butterworth lowpass prototype, unit cutoff: poles on the left-half
// unit circle, no finite zeros.
std::vector<Complex> prototype_poles(int order) {
  std::vector<Complex> poles(order);
  for (int k = 0; k < order; ++k) {
    const double angle =
        std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
    poles[k] = std::polar(1.0, angle);
  }
  return poles;
}

ZpkDesign lowpass_transform(std::vector<Complex> poles, double wc) {
  ZpkDesign d;
  for (auto& p : poles) d.poles.push_back(p * wc);
  return d;
}

ZpkDesign highpass_transform(std::vector<Complex> poles, double wc) {
  ZpkDesign d;
  for (auto& p : poles) d.poles.push_back(wc / p);
  // Zeros at the origin, one per pole.
  d.zeros.assign(poles.size(), Complex(0.0, 0.0));
  return d;
}

ZpkDesign bandstop_transform(std::vector<Complex> poles, double w0, double bw) {
  ZpkDesign d;
  for (auto& p : poles) {
    const Complex t = 0.5 * bw / p;
    const Complex r = std::sqrt(t * t - w0 * w0);
    d.poles.push_back(t + r);
    d.poles.push_back(t - r);
    d.zeros.emplace_back(0.0, w0);
    d.zeros.emplace_back(0.0, -w0);
  }
  return d;
}

// Analog -> digital; zeros at infinity map to z = -1.
ZpkDesign bilinear(const ZpkDesign& analog, double rate_hz) {
  const double fs2 = 2.0 * rate_hz;
  ZpkDesign d;
  for (const auto& z : analog.zeros) d.zeros.push_back((fs2 + z) / (fs2 - z));
  for (const auto& p : analog.poles) d.poles.push_back((fs2 + p) / (fs2 - p));
  const auto degree = analog.poles.size() - analog.zeros.size();
  for (std::size_t i = 0; i < degree; ++i) d.zeros.emplace_back(-1.0, 0.0);
  return d;
}

// Group roots of a real polynomial into conjugate (or real) pairs.
std::vector<std::pair<Complex, Complex>> conjugate_pairs(
    std::vector<Complex> roots) {
  constexpr double kImagTol = 1e-10;
  std::vector<std::pair<Complex, Complex>> pairs;
  while (!roots.empty()) {
    const Complex r = roots.front();
    roots.erase(roots.begin());
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < roots.size(); ++j) {
      const bool both_real = std::abs(r.imag()) <= kImagTol &&
                             std::abs(roots[j].imag()) <= kImagTol;
      const double dist = both_real ? std::abs(roots[j].real() - r.real())
                                    : std::abs(roots[j] - std::conj(r));
      if ((std::abs(r.imag()) <= kImagTol) == both_real && dist < best_dist) {
        best_dist = dist;
        best = j;
      }
    }
    if (roots.empty() || !std::isfinite(best_dist))
      throw config_error("filter design: unpaired root");
    pairs.emplace_back(r, roots[best]);
    roots.erase(roots.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return pairs;
}

std::vector<BiquadSection> zpk_to_sos(const ZpkDesign& digital, Complex ref_z) {
  if (digital.zeros.size() != digital.poles.size() || digital.poles.empty() ||
      digital.poles.size() % 2 != 0)
    throw config_error("filter design: expected even matched zero/pole count");

  auto zpairs = conjugate_pairs(digital.zeros);
  auto ppairs = conjugate_pairs(digital.poles);

  auto by_radius = [](const auto& a, const auto& b) {
    return std::abs(a.first) < std::abs(b.first);
  };
  std::sort(zpairs.begin(), zpairs.end(), by_radius);
  std::sort(ppairs.begin(), ppairs.end(), by_radius);

  std::vector<BiquadSection> sos(ppairs.size());
  for (std::size_t i = 0; i < ppairs.size(); ++i) {
    const auto& [z1, z2] = zpairs[i];
    const auto& [p1, p2] = ppairs[i];
    sos[i].b0 = 1.0;
    sos[i].b1 = -(z1 + z2).real();
    sos[i].b2 = (z1 * z2).real();
    sos[i].a1 = -(p1 + p2).real();
    sos[i].a2 = (p1 * p2).real();
  }

  // Scale the first section so the cascade has unit gain at the reference
  // frequency (DC for lowpass/bandstop, Nyquist for highpass).
  Complex h(1.0, 0.0);
  for (const auto& s : sos) {
    const Complex num = s.b0 * ref_z * ref_z + s.b1 * ref_z + s.b2;
    const Complex den = ref_z * ref_z + s.a1 * ref_z + s.a2;
    h *= num / den;
  }
  const double gain = h.real();
  if (!(std::abs(gain) > 0.0))
    throw config_error("filter design: degenerate reference gain");
  sos[0].b0 /= gain;
  sos[0].b1 /= gain;
  sos[0].b2 /= gain;
  return sos;
}

double prewarp(double f_hz, double rate_hz) {
  return 2.0 * rate_hz * std::tan(std::numbers::pi * f_hz / rate_hz);
}

}  // namespace

std::vector<BiquadSection> design_butterworth(FilterKind kind, double cutoff_hz,
                                              double rate_hz, int order,
                                              double notch_bandwidth_hz) {
  if (rate_hz <= 0.0) throw config_error("filter design: rate_hz must be > 0");
  if (order < 2 || order % 2 != 0)
    throw config_error("filter design: order must be even and >= 2");
  const double nyquist = 0.5 * rate_hz;

  ZpkDesign analog;
  Complex ref_z;
  switch (kind) {
    case FilterKind::lowpass:
    case FilterKind::highpass: {
      if (cutoff_hz <= 0.0 || cutoff_hz >= nyquist)
        throw config_error("filter design: cutoff must satisfy 0 < f < rate/2");
      const double wc = prewarp(cutoff_hz, rate_hz);
      analog = kind == FilterKind::lowpass
                   ? lowpass_transform(prototype_poles(order), wc)
                   : highpass_transform(prototype_poles(order), wc);
      ref_z = kind == FilterKind::lowpass ? Complex(1, 0) : Complex(-1, 0);
      break;
    }
    case FilterKind::notch: {
      const double lo = cutoff_hz - 0.5 * notch_bandwidth_hz;
      const double hi = cutoff_hz + 0.5 * notch_bandwidth_hz;
      if (lo <= 0.0 || hi >= nyquist)
        throw config_error("filter design: notch band must lie in (0, rate/2)");
      const double w1 = prewarp(lo, rate_hz);
      const double w2 = prewarp(hi, rate_hz);
      analog = bandstop_transform(prototype_poles(order / 2),
                                  std::sqrt(w1 * w2), w2 - w1);
      ref_z = Complex(1, 0);
      break;
    }
  }
  return zpk_to_sos(bilinear(analog, rate_hz), ref_z);
}

FilterCascade::FilterCascade(std::vector<BiquadSection> sections,
                             Eigen::Index channels)
    : sections_(std::move(sections)),
      state_(Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(sections_.size()),
                                   channels)) {}

void FilterCascade::reset() { state_.setZero(); }

void FilterCascade::process_inplace(Eigen::Ref<Eigen::MatrixXd> x) {
  const Eigen::Index channels = x.rows();
  const Eigen::Index n = x.cols();
  if (channels != state_.cols())
    throw config_error("filter: channel count mismatch");

  for (Eigen::Index c = 0; c < channels; ++c) {
    for (std::size_t s = 0; s < sections_.size(); ++s) {
      const BiquadSection& q = sections_[s];
      double z1 = state_(2 * static_cast<Eigen::Index>(s), c);
      double z2 = state_(2 * static_cast<Eigen::Index>(s) + 1, c);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double in = x(c, k);
        const double out = q.b0 * in + z1;
        z1 = q.b1 * in - q.a1 * out + z2;
        z2 = q.b2 * in - q.a2 * out;
        x(c, k) = out;
      }
      state_(2 * static_cast<Eigen::Index>(s), c) = z1;
      state_(2 * static_cast<Eigen::Index>(s) + 1, c) = z2;
    }
  }
}

SampleBlock butterworth_filter(const SampleBlock& block, FilterKind kind,
                               double cutoff_hz, int order,
                               double notch_bandwidth_hz) {
  validate_block(block);
  FilterCascade cascade(
      design_butterworth(kind, cutoff_hz, block.rate_hz, order, notch_bandwidth_hz),
      block.channels);
  SampleBlock out = block;
  cascade.process_inplace(out.data);
  return out;
}

Preprocessor::Preprocessor(const PreprocessConfig& cfg, Eigen::Index channels,
                           double rate_hz) {
  if (cfg.enable_highpass)
    stages_.emplace_back(design_butterworth(FilterKind::highpass, cfg.highpass_hz,
                                            rate_hz, cfg.order),
                         channels);
  if (cfg.enable_lowpass)
    stages_.emplace_back(design_butterworth(FilterKind::lowpass, cfg.lowpass_hz,
                                            rate_hz, cfg.order),
                         channels);
  if (cfg.enable_notch)
    stages_.emplace_back(design_butterworth(FilterKind::notch, cfg.notch_hz,
                                            rate_hz, cfg.order,
                                            cfg.notch_bandwidth_hz),
                         channels);
}

void Preprocessor::process_inplace(SampleBlock& block) {
  for (auto& stage : stages_) stage.process_inplace(block.data);
}

SampleBlock preprocess(const SampleBlock& block, const PreprocessConfig& cfg) {
  validate_block(block);
  Preprocessor bank(cfg, block.channels, block.rate_hz);
  SampleBlock out = block;
  bank.process_inplace(out);
  return out;
}

}  // namespace epismart
