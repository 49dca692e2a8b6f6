#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/types.hpp"

namespace noisetensor {

// Batch-mean statistics. Samples are assigned to a fixed number of batches by
// sample index (never by thread), so the estimate and its standard error are
// reproducible for a given seed regardless of how work is scheduled.
// std_error = sd(batch means) / sqrt(B).

class BatchStats {
 public:
  explicit BatchStats(int n_batches)
      : sums_(static_cast<std::size_t>(n_batches), 0.0),
        counts_(static_cast<std::size_t>(n_batches), 0) {
    if (n_batches < 2) throw std::invalid_argument("need at least 2 batches");
  }

  void add(int batch, double v) {
    sums_.at(static_cast<std::size_t>(batch)) += v;
    counts_[static_cast<std::size_t>(batch)] += 1;
  }

  long long count() const {
    long long n = 0;
    for (const auto c : counts_) n += c;
    return n;
  }

  int n_batches() const { return static_cast<int>(sums_.size()); }

  // Mean of one batch; the building block for error estimates on quantities
  // derived from correlated series (differences, finite-difference slopes).
  double batch_mean(int batch) const {
    const auto b = static_cast<std::size_t>(batch);
    if (counts_.at(b) == 0) throw std::logic_error("empty batch");
    return sums_[b] / static_cast<double>(counts_[b]);
  }

  double mean() const {
    double s = 0.0;
    for (const auto v : sums_) s += v;
    return s / static_cast<double>(count());
  }

  double std_error() const {
    const std::size_t b = sums_.size();
    double m = 0.0;
    std::vector<double> bm(b);
    for (std::size_t i = 0; i < b; ++i) {
      if (counts_[i] == 0) throw std::logic_error("empty batch");
      bm[i] = sums_[i] / static_cast<double>(counts_[i]);
      m += bm[i];
    }
    m /= static_cast<double>(b);
    double ss = 0.0;
    for (std::size_t i = 0; i < b; ++i) ss += (bm[i] - m) * (bm[i] - m);
    const double var = ss / static_cast<double>(b - 1);
    return std::sqrt(var / static_cast<double>(b));
  }

 private:
  std::vector<double> sums_;
  std::vector<long long> counts_;
};

// Entrywise batch statistics for complex vectors (flattened tensors). Real
// and imaginary parts get independent standard errors.
class BatchVectorStats {
 public:
  BatchVectorStats(int n_batches, Eigen::Index size)
      : size_(size),
        sums_(static_cast<std::size_t>(n_batches), Vector::Zero(size)),
        counts_(static_cast<std::size_t>(n_batches), 0) {
    if (n_batches < 2) throw std::invalid_argument("need at least 2 batches");
  }

  int n_batches() const { return static_cast<int>(sums_.size()); }
  Eigen::Index size() const { return size_; }

  // The engine guarantees each batch index is touched by exactly one thread,
  // so no locking is needed here.
  void add(int batch, const Vector& v) {
    sums_.at(static_cast<std::size_t>(batch)) += v;
    counts_[static_cast<std::size_t>(batch)] += 1;
  }

  long long count() const {
    long long n = 0;
    for (const auto c : counts_) n += c;
    return n;
  }

  Vector mean() const {
    Vector s = Vector::Zero(size_);
    for (const auto& v : sums_) s += v;
    return s / static_cast<double>(count());
  }

  // std_error(k) = complex(se_re, se_im) for entry k.
  Vector std_error() const {
    const std::size_t b = sums_.size();
    std::vector<Vector> bm(b);
    Vector m = Vector::Zero(size_);
    for (std::size_t i = 0; i < b; ++i) {
      if (counts_[i] == 0) throw std::logic_error("empty batch");
      bm[i] = sums_[i] / static_cast<double>(counts_[i]);
      m += bm[i];
    }
    m /= static_cast<double>(b);
    RealVector ss_re = RealVector::Zero(size_);
    RealVector ss_im = RealVector::Zero(size_);
    for (std::size_t i = 0; i < b; ++i) {
      ss_re += (bm[i] - m).real().cwiseAbs2().matrix();
      ss_im += (bm[i] - m).imag().cwiseAbs2().matrix();
    }
    const double denom = static_cast<double>(b - 1) * static_cast<double>(b);
    Vector se(size_);
    for (Eigen::Index k = 0; k < size_; ++k) {
      se(k) = Cx(std::sqrt(ss_re(k) / denom), std::sqrt(ss_im(k) / denom));
    }
    return se;
  }

 private:
  Eigen::Index size_;
  std::vector<Vector> sums_;
  std::vector<long long> counts_;
};

// True when |a - b| <= k * se componentwise (se holds per-component standard
// errors in its real and imaginary parts). The absolute floor covers
// components whose sampling variance is identically zero, where the reference
// value may still carry roundoff.
inline bool within_k_se(Cx a, Cx b, double k, Cx se, double atol = 1e-12) {
  return std::abs(a.real() - b.real()) <= k * se.real() + atol &&
         std::abs(a.imag() - b.imag()) <= k * se.imag() + atol;
}

// A tensor estimate with entrywise standard errors, flat layout matching
// PairTensor storage.
struct TensorEstimate {
  PairTensor mean;
  Vector std_error;  // per flat entry: complex(se_re, se_im)
};

// Largest number of standard errors separating two estimates entrywise, with
// real and imaginary parts compared against their own error bars. Errors add
// in quadrature; entries where both bars vanish must agree to 1e-12.
inline double max_sigma_distance(const TensorEstimate& a, const TensorEstimate& b) {
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("size mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.mean.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double se_re = std::hypot(a.std_error(i).real(), b.std_error(i).real());
    const double se_im = std::hypot(a.std_error(i).imag(), b.std_error(i).imag());
    const double d_re = std::abs(a.mean[k].real() - b.mean[k].real());
    const double d_im = std::abs(a.mean[k].imag() - b.mean[k].imag());
    worst = std::max(worst, se_re > 0.0 ? d_re / se_re : (d_re > 1e-12 ? 1e300 : 0.0));
    worst = std::max(worst, se_im > 0.0 ? d_im / se_im : (d_im > 1e-12 ? 1e300 : 0.0));
  }
  return worst;
}

}  // namespace noisetensor
