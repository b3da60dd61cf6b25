#pragma once

#include "epismart/signal.hpp"

#include <Eigen/Dense>

#include <vector>

namespace epismart {

enum class FilterKind { highpass, lowpass, notch };

/// One second-order section, direct-form II transposed, a0 normalized to 1.
struct BiquadSection {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

/// Butterworth design via analog prototype + bilinear transform, returned as
/// cascaded biquads. `order` is the overall filter order (even). For a notch,
/// `cutoff_hz` is the center frequency of a bandstop of the given bandwidth.
/// Throws config_error when the band touches DC or Nyquist or order is odd.
std::vector<BiquadSection> design_butterworth(FilterKind kind, double cutoff_hz,
                                              double rate_hz, int order = 4,
                                              double notch_bandwidth_hz = 2.0);

/// Causal single-pass cascade with per-channel state, so a stream can be
/// filtered block by block.
class FilterCascade {
 public:
  FilterCascade(std::vector<BiquadSection> sections, Eigen::Index channels);

  void process_inplace(Eigen::Ref<Eigen::MatrixXd> x);  // channels x samples
  void reset();

  const std::vector<BiquadSection>& sections() const { return sections_; }

 private:
  std::vector<BiquadSection> sections_;
  Eigen::MatrixXd state_;  // (2 * nsections) x channels
};

/// Zero-state single pass over one block.
SampleBlock butterworth_filter(const SampleBlock& block, FilterKind kind,
                               double cutoff_hz, int order = 4,
                               double notch_bandwidth_hz = 2.0);

struct PreprocessConfig {
  double highpass_hz = 0.5;
  double lowpass_hz = 60.0;
  double notch_hz = 50.0;
  double notch_bandwidth_hz = 2.0;
  int order = 4;
  bool enable_highpass = true;
  bool enable_lowpass = true;  // disable for low-rate synthetic streams
  bool enable_notch = true;
};

/// Stateful highpass -> lowpass -> notch bank for streaming use.
class Preprocessor {
 public:
  Preprocessor(const PreprocessConfig& cfg, Eigen::Index channels, double rate_hz);

  void process_inplace(SampleBlock& block);

 private:
  std::vector<FilterCascade> stages_;
};

/// Zero-state preprocess of one block.
SampleBlock preprocess(const SampleBlock& block, const PreprocessConfig& cfg = {});

}  // namespace epismart
