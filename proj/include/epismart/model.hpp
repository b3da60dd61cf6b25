#pragma once

#include "epismart/signal.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace epismart {

// ---------------------------------------------------------------------------
// Architecture descriptor
// ---------------------------------------------------------------------------

struct ConvBlockSpec {
  int out_channels = 8;
  int kernel = 5;
  int stride = 1;
  int pool = 2;  // 1 = no pooling
};

/// 1-D fully convolutional net: conv blocks (conv + batch-norm + ReLU +
/// max-pool) followed by two 1x1 conv layers and a global average producing
/// 2 logits. batch_norm/relu switches exist so tests can configure a purely
/// linear network.
struct ArchSpec {
  int in_channels = 4;
  int input_samples = 256;
  std::vector<ConvBlockSpec> blocks = {{8, 5, 1, 2}, {16, 5, 1, 2}, {16, 5, 1, 2}};
  int head_channels = 16;
  bool batch_norm = true;
  bool relu = true;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;
  long param_budget = 500000;
};

std::string arch_to_json(const ArchSpec& arch);
ArchSpec arch_from_json(const std::string& text);

struct ParamSegment {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

// ---------------------------------------------------------------------------
// Pointwise prediction math
// ---------------------------------------------------------------------------

template <typename Scalar>
Eigen::Vector2<Scalar> softmax2(const Eigen::Vector2<Scalar>& logits) {
  const Scalar m = logits.maxCoeff();
  Eigen::Vector2<Scalar> e{std::exp(logits[0] - m), std::exp(logits[1] - m)};
  return e / e.sum();
}

/// Shannon entropy in nats, with 0 ln 0 := 0. Maximal (ln 2) at p = (1/2, 1/2).
template <typename Scalar>
Scalar entropy2(const Eigen::Vector2<Scalar>& probs) {
  Scalar h = 0;
  for (int i = 0; i < 2; ++i)
    if (probs[i] > Scalar(0)) h -= probs[i] * std::log(probs[i]);
  return h;
}

/// Argmax with ties resolved to class 0.
template <typename Scalar>
int predict_label(const Eigen::Vector2<Scalar>& probs) {
  return probs[1] > probs[0] ? 1 : 0;
}

template <typename Scalar>
struct Prediction {
  Eigen::Vector2<Scalar> logits{0, 0};
  Eigen::Vector2<Scalar> probs{Scalar(0.5), Scalar(0.5)};
  Scalar entropy = 0;
  int label = 0;
};

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

template <typename Scalar>
class Classifier {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

  explicit Classifier(ArchSpec arch, std::uint64_t seed = 0) : arch_(std::move(arch)) {
    plan();
    init_params(seed);
  }

  const ArchSpec& arch() const { return arch_; }
  Eigen::Index param_count() const { return params_.size(); }
  const std::vector<ParamSegment>& param_layout() const { return layout_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  Vector& running_stats() { return running_stats_; }
  const Vector& running_stats() const { return running_stats_; }

  void set_train(bool train) { train_ = train; }
  bool training() const { return train_; }

  /// Batched forward. `input` holds n windows side by side as a
  /// (in_channels x n*input_samples) matrix; returns (2 x n) logits.
  Matrix forward_batch(const Matrix& input, Eigen::Index n) {
    return forward_impl(input, n, nullptr);
  }

  Eigen::Vector2<Scalar> forward(const Window& w) {
    const Matrix input = w.data.template cast<Scalar>();
    return forward_impl(input, 1, nullptr).col(0);
  }

  /// Eval-mode composition forward -> softmax -> entropy -> argmax.
  Prediction<Scalar> predict(const Window& w) {
    if (train_) throw std::logic_error("predict requires eval mode");
    Prediction<Scalar> p;
    p.logits = forward(w);
    p.probs = softmax2(p.logits);
    p.entropy = entropy2(p.probs);
    p.label = predict_label(p.probs);
    return p;
  }

  /// Mean cross-entropy of a batch (no gradients).
  Scalar batch_loss(const Matrix& input, Eigen::Index n, const std::vector<int>& labels) {
    const Matrix logits = forward_impl(input, n, nullptr);
    return cross_entropy(logits, labels, nullptr);
  }

  struct BackwardResult {
    Scalar loss = 0;
    Vector grad;
  };

  /// Gradient of the mean cross-entropy over the batch w.r.t. every
  /// parameter. Train mode (batch-norm uses batch statistics).
  BackwardResult backward(const Matrix& input, Eigen::Index n,
                          const std::vector<int>& labels);

  // Checkpoint: magic, length-prefixed arch JSON, f32le params, f32le
  // running stats.
  void save(const std::string& path) const;
  static Classifier load(const std::string& path);

 private:
  struct BlockPlan {
    int in_channels = 0, out_channels = 0, kernel = 0, stride = 1, pool = 1;
    Eigen::Index t_in = 0, t_conv = 0, t_out = 0;
    Eigen::Index w_off = 0, b_off = 0, gamma_off = 0, beta_off = 0, rs_off = 0;
  };
  struct HeadPlan {
    int in_channels = 0, hidden = 0;
    Eigen::Index t = 0;
    Eigen::Index w1_off = 0, b1_off = 0, w2_off = 0, b2_off = 0;
  };
  struct BlockCache {
    Matrix xcol;   // (Cin*K) x (n*t_conv)
    Matrix xhat;   // normalized activations (batch-norm only)
    Vector inv_std;
    Matrix act;    // post-(bn,relu), pre-pool
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> argmax;
  };
  struct Tape {
    std::vector<BlockCache> blocks;
    Matrix head_in;
    Matrix a1;
    Matrix logits;
  };

  void plan();
  void init_params(std::uint64_t seed);
  Matrix forward_impl(const Matrix& input, Eigen::Index n, Tape* tape);
  Scalar cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                       Matrix* dlogits) const;

  ArchSpec arch_;
  std::vector<BlockPlan> blocks_;
  HeadPlan head_;
  std::vector<ParamSegment> layout_;
  Vector params_;
  Vector running_stats_;  // per block: mean[out], var[out]
  bool train_ = false;
};

using ClassifierF = Classifier<float>;

// ---------------------------------------------------------------------------
// Implementation
// ---------------------------------------------------------------------------

template <typename Scalar>
void Classifier<Scalar>::plan() {
  if (arch_.in_channels <= 0 || arch_.input_samples <= 0 || arch_.head_channels <= 0)
    throw config_error("arch: channels/samples must be positive");

  Eigen::Index offset = 0;
  Eigen::Index rs_offset = 0;
  auto add_segment = [&](const std::string& name, Eigen::Index size) {
    layout_.push_back({name, offset, size});
    offset += size;
  };

  int c = arch_.in_channels;
  Eigen::Index t = arch_.input_samples;
  for (std::size_t i = 0; i < arch_.blocks.size(); ++i) {
    const ConvBlockSpec& spec = arch_.blocks[i];
    if (spec.out_channels <= 0 || spec.kernel <= 0 || spec.stride <= 0 || spec.pool <= 0)
      throw config_error("arch: bad conv block");
    BlockPlan bp;
    bp.in_channels = c;
    bp.out_channels = spec.out_channels;
    bp.kernel = spec.kernel;
    bp.stride = spec.stride;
    bp.pool = spec.pool;
    bp.t_in = t;
    if (t < spec.kernel) throw config_error("arch: input too short for kernel");
    bp.t_conv = (t - spec.kernel) / spec.stride + 1;
    bp.t_out = bp.t_conv / spec.pool;
    if (bp.t_out < 1) throw config_error("arch: input too short for pooling");

    const std::string tag = "block" + std::to_string(i);
    bp.w_off = offset;
    add_segment(tag + ".W", static_cast<Eigen::Index>(spec.out_channels) * c * spec.kernel);
    bp.b_off = offset;
    add_segment(tag + ".b", spec.out_channels);
    if (arch_.batch_norm) {
      bp.gamma_off = offset;
      add_segment(tag + ".gamma", spec.out_channels);
      bp.beta_off = offset;
      add_segment(tag + ".beta", spec.out_channels);
      bp.rs_off = rs_offset;
      rs_offset += 2 * spec.out_channels;
    }
    blocks_.push_back(bp);
    c = spec.out_channels;
    t = bp.t_out;
  }

  head_.in_channels = c;
  head_.hidden = arch_.head_channels;
  head_.t = t;
  head_.w1_off = offset;
  add_segment("head1.W", static_cast<Eigen::Index>(arch_.head_channels) * c);
  head_.b1_off = offset;
  add_segment("head1.b", arch_.head_channels);
  head_.w2_off = offset;
  add_segment("head2.W", 2 * static_cast<Eigen::Index>(arch_.head_channels));
  head_.b2_off = offset;
  add_segment("head2.b", 2);

  params_ = Vector::Zero(offset);
  running_stats_ = Vector::Zero(rs_offset);
  if (param_count() > arch_.param_budget)
    throw config_error("arch: parameter count exceeds budget");
}

template <typename Scalar>
void Classifier<Scalar>::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](Eigen::Index off, Eigen::Index size, double fan_in) {
    const double s = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> u(-s, s);
    for (Eigen::Index i = 0; i < size; ++i)
      params_[off + i] = static_cast<Scalar>(u(rng));
  };
  for (const auto& bp : blocks_) {
    const double fan_in = static_cast<double>(bp.in_channels) * bp.kernel;
    fill_uniform(bp.w_off, static_cast<Eigen::Index>(bp.out_channels) * bp.in_channels * bp.kernel, fan_in);
    fill_uniform(bp.b_off, bp.out_channels, fan_in);
    if (arch_.batch_norm) {
      params_.segment(bp.gamma_off, bp.out_channels).setOnes();
      params_.segment(bp.beta_off, bp.out_channels).setZero();
      running_stats_.segment(bp.rs_off, bp.out_channels).setZero();
      running_stats_.segment(bp.rs_off + bp.out_channels, bp.out_channels).setOnes();
    }
  }
  fill_uniform(head_.w1_off, static_cast<Eigen::Index>(head_.hidden) * head_.in_channels,
               head_.in_channels);
  fill_uniform(head_.b1_off, head_.hidden, head_.in_channels);
  fill_uniform(head_.w2_off, 2 * static_cast<Eigen::Index>(head_.hidden), head_.hidden);
  fill_uniform(head_.b2_off, 2, head_.hidden);
}

template <typename Scalar>
typename Classifier<Scalar>::Matrix Classifier<Scalar>::forward_impl(
    const Matrix& input, Eigen::Index n, Tape* tape) {
  if (n < 1 || input.rows() != arch_.in_channels ||
      input.cols() != n * static_cast<Eigen::Index>(arch_.input_samples))
    throw std::invalid_argument("forward: input shape mismatch");

  if (tape) tape->blocks.resize(blocks_.size());
  Matrix x = input;

  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const BlockPlan& bp = blocks_[bi];
    BlockCache* cache = tape ? &tape->blocks[bi] : nullptr;

    // im2col + one GEMM per layer.
    Matrix xcol(static_cast<Eigen::Index>(bp.in_channels) * bp.kernel, n * bp.t_conv);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int kk = 0; kk < bp.kernel; ++kk)
        for (int ci = 0; ci < bp.in_channels; ++ci) {
          auto dst = xcol.row(static_cast<Eigen::Index>(ci) * bp.kernel + kk)
                         .segment(i * bp.t_conv, bp.t_conv);
          if (bp.stride == 1) {
            dst = x.row(ci).segment(i * bp.t_in + kk, bp.t_conv);
          } else {
            for (Eigen::Index j = 0; j < bp.t_conv; ++j)
              dst[j] = x(ci, i * bp.t_in + j * bp.stride + kk);
          }
        }

    Eigen::Map<const Matrix> w(params_.data() + bp.w_off, bp.out_channels,
                               static_cast<Eigen::Index>(bp.in_channels) * bp.kernel);
    Eigen::Map<const Vector> bias(params_.data() + bp.b_off, bp.out_channels);
    Matrix y = w * xcol;
    y.colwise() += bias;

    if (arch_.batch_norm) {
      const Eigen::Index m = y.cols();
      Vector mean(bp.out_channels), var(bp.out_channels);
      if (train_) {
        mean = y.rowwise().mean();
        var = (y.colwise() - mean).array().square().rowwise().mean();
        auto rmean = running_stats_.segment(bp.rs_off, bp.out_channels);
        auto rvar = running_stats_.segment(bp.rs_off + bp.out_channels, bp.out_channels);
        const Scalar mom = static_cast<Scalar>(arch_.bn_momentum);
        const Scalar unbias = m > 1 ? static_cast<Scalar>(m) / static_cast<Scalar>(m - 1)
                                    : Scalar(1);
        rmean = (Scalar(1) - mom) * rmean + mom * mean;
        rvar = (Scalar(1) - mom) * rvar + mom * (unbias * var);
      } else {
        mean = running_stats_.segment(bp.rs_off, bp.out_channels);
        var = running_stats_.segment(bp.rs_off + bp.out_channels, bp.out_channels);
      }
      const Vector inv_std =
          (var.array() + static_cast<Scalar>(arch_.bn_epsilon)).rsqrt();
      Matrix xhat = (y.colwise() - mean).array().colwise() * inv_std.array();
      Eigen::Map<const Vector> gamma(params_.data() + bp.gamma_off, bp.out_channels);
      Eigen::Map<const Vector> beta(params_.data() + bp.beta_off, bp.out_channels);
      y = xhat.array().colwise() * gamma.array();
      y.colwise() += beta;
      if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = inv_std;
      }
    }

    if (arch_.relu) y = y.cwiseMax(Scalar(0));

    if (cache) {
      cache->xcol = std::move(xcol);
      cache->act = y;
    }

    if (bp.pool > 1) {
      Matrix pooled(bp.out_channels, n * bp.t_out);
      Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> argmax;
      if (cache) argmax.resize(bp.out_channels, n * bp.t_out);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < bp.t_out; ++j) {
          const Eigen::Index base = i * bp.t_conv + j * bp.pool;
          for (int ci = 0; ci < bp.out_channels; ++ci) {
            Eigen::Index best = base;
            Scalar best_v = y(ci, base);
            for (int u = 1; u < bp.pool; ++u)
              if (y(ci, base + u) > best_v) {
                best_v = y(ci, base + u);
                best = base + u;
              }
            pooled(ci, i * bp.t_out + j) = best_v;
            if (cache) argmax(ci, i * bp.t_out + j) = best;
          }
        }
      if (cache) cache->argmax = std::move(argmax);
      x = std::move(pooled);
    } else {
      x = std::move(y);
    }
  }

  // Head: two 1x1 convolutions, then global average over time.
  Eigen::Map<const Matrix> w1(params_.data() + head_.w1_off, head_.hidden, head_.in_channels);
  Eigen::Map<const Vector> b1(params_.data() + head_.b1_off, head_.hidden);
  Eigen::Map<const Matrix> w2(params_.data() + head_.w2_off, 2, head_.hidden);
  Eigen::Map<const Vector> b2(params_.data() + head_.b2_off, 2);

  Matrix a1 = w1 * x;
  a1.colwise() += b1;
  if (arch_.relu) a1 = a1.cwiseMax(Scalar(0));
  Matrix y2 = w2 * a1;
  y2.colwise() += b2;

  Matrix logits(2, n);
  for (Eigen::Index i = 0; i < n; ++i)
    logits.col(i) = y2.middleCols(i * head_.t, head_.t).rowwise().mean();

  if (tape) {
    tape->head_in = std::move(x);
    tape->a1 = std::move(a1);
    tape->logits = logits;
  }
  return logits;
}

template <typename Scalar>
Scalar Classifier<Scalar>::cross_entropy(const Matrix& logits,
                                         const std::vector<int>& labels,
                                         Matrix* dlogits) const {
  const Eigen::Index n = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  if (dlogits) dlogits->resize(2, n);
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2<Scalar> p = softmax2<Scalar>(logits.col(i));
    const int y = labels[static_cast<std::size_t>(i)];
    const Scalar m = logits.col(i).maxCoeff();
    const Scalar lse =
        m + std::log(std::exp(logits(0, i) - m) + std::exp(logits(1, i) - m));
    loss += lse - logits(y, i);
    if (dlogits) {
      dlogits->col(i) = p;
      (*dlogits)(y, i) -= Scalar(1);
    }
  }
  loss /= static_cast<Scalar>(n);
  if (dlogits) *dlogits /= static_cast<Scalar>(n);
  return loss;
}

template <typename Scalar>
typename Classifier<Scalar>::BackwardResult Classifier<Scalar>::backward(
    const Matrix& input, Eigen::Index n, const std::vector<int>& labels) {
  Tape tape;
  forward_impl(input, n, &tape);

  BackwardResult result;
  result.grad = Vector::Zero(params_.size());
  Matrix dlogits;
  result.loss = cross_entropy(tape.logits, labels, &dlogits);
  if (!std::isfinite(static_cast<double>(result.loss)))
    throw std::runtime_error("training diverged: non-finite loss");

  auto gseg = [&](Eigen::Index off, Eigen::Index size) {
    return result.grad.segment(off, size);
  };

  // Head backward.
  Eigen::Map<const Matrix> w1(params_.data() + head_.w1_off, head_.hidden, head_.in_channels);
  Eigen::Map<const Matrix> w2(params_.data() + head_.w2_off, 2, head_.hidden);

  Matrix dy2(2, n * head_.t);
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(head_.t);
  for (Eigen::Index i = 0; i < n; ++i)
    dy2.middleCols(i * head_.t, head_.t).colwise() = (dlogits.col(i) * inv_t).eval();

  Eigen::Map<Matrix>(gseg(head_.w2_off, 2 * head_.hidden).data(), 2, head_.hidden) =
      dy2 * tape.a1.transpose();
  gseg(head_.b2_off, 2) = dy2.rowwise().sum();

  Matrix da1 = w2.transpose() * dy2;
  if (arch_.relu)
    da1 = (tape.a1.array() > Scalar(0)).select(da1, Matrix::Zero(da1.rows(), da1.cols()));

  Eigen::Map<Matrix>(gseg(head_.w1_off, head_.hidden * head_.in_channels).data(),
                     head_.hidden, head_.in_channels) = da1 * tape.head_in.transpose();
  gseg(head_.b1_off, head_.hidden) = da1.rowwise().sum();

  Matrix dx = w1.transpose() * da1;

  // Blocks in reverse.
  for (std::size_t r = blocks_.size(); r-- > 0;) {
    const BlockPlan& bp = blocks_[r];
    BlockCache& cache = tape.blocks[r];

    Matrix dact;
    if (bp.pool > 1) {
      dact = Matrix::Zero(bp.out_channels, n * bp.t_conv);
      for (Eigen::Index col = 0; col < dx.cols(); ++col)
        for (int ci = 0; ci < bp.out_channels; ++ci)
          dact(ci, cache.argmax(ci, col)) += dx(ci, col);
    } else {
      dact = std::move(dx);
    }

    if (arch_.relu)
      dact = (cache.act.array() > Scalar(0))
                 .select(dact, Matrix::Zero(dact.rows(), dact.cols()));

    Matrix dconv;
    if (arch_.batch_norm) {
      Eigen::Map<const Vector> gamma(params_.data() + bp.gamma_off, bp.out_channels);
      const Eigen::Index m = dact.cols();
      gseg(bp.gamma_off, bp.out_channels) =
          (dact.array() * cache.xhat.array()).rowwise().sum();
      gseg(bp.beta_off, bp.out_channels) = dact.rowwise().sum();

      const Vector mean_d = dact.rowwise().mean();
      const Vector mean_dx =
          (dact.array() * cache.xhat.array()).rowwise().mean();
      dconv = dact;
      dconv.colwise() -= mean_d;
      dconv -= (cache.xhat.array().colwise() * mean_dx.array()).matrix();
      dconv.array().colwise() *= (gamma.array() * cache.inv_std.array());
      (void)m;
    } else {
      dconv = std::move(dact);
    }

    Eigen::Map<const Matrix> w(params_.data() + bp.w_off, bp.out_channels,
                               static_cast<Eigen::Index>(bp.in_channels) * bp.kernel);
    Eigen::Map<Matrix>(
        gseg(bp.w_off, static_cast<Eigen::Index>(bp.out_channels) * bp.in_channels * bp.kernel)
            .data(),
        bp.out_channels, static_cast<Eigen::Index>(bp.in_channels) * bp.kernel) =
        dconv * cache.xcol.transpose();
    gseg(bp.b_off, bp.out_channels) = dconv.rowwise().sum();

    if (r > 0) {
      const Matrix dxcol = w.transpose() * dconv;
      dx = Matrix::Zero(bp.in_channels, n * bp.t_in);
      for (Eigen::Index i = 0; i < n; ++i)
        for (int kk = 0; kk < bp.kernel; ++kk)
          for (int ci = 0; ci < bp.in_channels; ++ci) {
            auto src = dxcol.row(static_cast<Eigen::Index>(ci) * bp.kernel + kk)
                           .segment(i * bp.t_conv, bp.t_conv);
            if (bp.stride == 1) {
              dx.row(ci).segment(i * bp.t_in + kk, bp.t_conv) += src;
            } else {
              for (Eigen::Index j = 0; j < bp.t_conv; ++j)
                dx(ci, i * bp.t_in + j * bp.stride + kk) += src[j];
            }
          }
    }
  }

  return result;
}

namespace detail {
inline constexpr char kCheckpointMagic[8] = {'E', 'S', 'M', 'C', 'K', 'P', 'T', '1'};
}

template <typename Scalar>
void Classifier<Scalar>::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write(detail::kCheckpointMagic, 8);

  const std::string json = arch_to_json(arch_);
  const auto len = static_cast<std::uint32_t>(json.size());
  unsigned char lb[4];
  for (int i = 0; i < 4; ++i) lb[i] = static_cast<unsigned char>(len >> (8 * i));
  os.write(reinterpret_cast<const char*>(lb), 4);
  os.write(json.data(), static_cast<std::streamsize>(json.size()));

  auto write_f32 = [&](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const float f = static_cast<float>(v[i]);
      os.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
  };
  write_f32(params_);
  write_f32(running_stats_);
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

template <typename Scalar>
Classifier<Scalar> Classifier<Scalar>::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(detail::kCheckpointMagic, 8))
    throw config_error("checkpoint: bad magic in " + path);

  unsigned char lb[4];
  is.read(reinterpret_cast<char*>(lb), 4);
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(lb[i]) << (8 * i);
  std::string json(len, '\0');
  is.read(json.data(), len);
  if (!is) throw config_error("checkpoint: truncated descriptor in " + path);

  Classifier model(arch_from_json(json));
  auto read_f32 = [&](Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      float f = 0;
      is.read(reinterpret_cast<char*>(&f), sizeof(float));
      v[i] = static_cast<Scalar>(f);
    }
  };
  read_f32(model.params_);
  read_f32(model.running_stats_);
  if (!is) throw config_error("checkpoint: truncated arrays in " + path);
  return model;
}

/// Pack windows into the (channels x n*samples) batch layout.
template <typename Scalar>
typename Classifier<Scalar>::Matrix pack_windows(
    const std::vector<const Window*>& windows) {
  if (windows.empty()) throw std::invalid_argument("pack_windows: empty batch");
  const Eigen::Index c = windows.front()->data.rows();
  const Eigen::Index t = windows.front()->data.cols();
  typename Classifier<Scalar>::Matrix out(c, static_cast<Eigen::Index>(windows.size()) * t);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i]->data.rows() != c || windows[i]->data.cols() != t)
      throw std::invalid_argument("pack_windows: inconsistent window shapes");
    out.middleCols(static_cast<Eigen::Index>(i) * t, t) =
        windows[i]->data.template cast<Scalar>();
  }
  return out;
}

}  // namespace epismart
