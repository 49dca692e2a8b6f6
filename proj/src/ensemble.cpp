#include "noisetensor/ensemble.hpp"

#include <cmath>
#include <stdexcept>

namespace noisetensor {

namespace {

constexpr double kNormTol = 1e-12;
constexpr double kWeightSumTol = 1e-9;

}  // namespace

WeightedEnsemble::WeightedEnsemble(int dim, std::vector<EnsembleMember> members)
    : dim_(dim), members_(std::move(members)) {
  if (dim_ < 1) throw std::invalid_argument("ensemble dim must be >= 1");
  if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
  double total = 0.0;
  for (const auto& m : members_) {
    if (m.psi.size() != dim_) {
      throw std::invalid_argument("ensemble member dimension mismatch");
    }
    if (!(m.w >= 0.0)) throw std::invalid_argument("ensemble weights must be >= 0");
    if (std::abs(m.psi.norm() - 1.0) > kNormTol) {
      throw std::invalid_argument("ensemble members must be normalized");
    }
    total += m.w;
  }
  if (std::abs(total - 1.0) > kWeightSumTol) {
    throw std::invalid_argument("ensemble weights must sum to 1 within 1e-9");
  }
  for (auto& m : members_) m.w /= total;
}

PairTensor density_tensor(const WeightedEnsemble& ens, int order) {
  const int d = ens.dim();
  PairTensor out(order, d, Flavor::classical);
  Matrix rho(d, d);
  for (const auto& m : ens.members()) {
    rho.noalias() = m.psi * m.psi.adjoint();
    detail::for_each_multi_index(2 * order, d, [&](std::span<const int> idx, std::size_t flat) {
      Cx p = m.w;
      for (int l = 0; l < order; ++l) {
        p *= rho(idx[static_cast<std::size_t>(2 * l)], idx[static_cast<std::size_t>(2 * l + 1)]);
      }
      out[flat] += p;
    });
  }
  return out;
}

Cx generating_function(const WeightedEnsemble& ens, const Matrix& a) {
  const int d = ens.dim();
  if (a.rows() != d || a.cols() != d) {
    throw std::invalid_argument("source matrix must be dim x dim");
  }
  Cx g = 0.0;
  for (const auto& m : ens.members()) {
    const Matrix rho = m.psi * m.psi.adjoint();
    g += m.w * std::exp(rho.cwiseProduct(a).sum());
  }
  return g;
}

Cx pair_expectation(const WeightedEnsemble& ens, const Matrix& r, const Matrix& s) {
  const int d = ens.dim();
  if (r.rows() != d || r.cols() != d || s.rows() != d || s.cols() != d) {
    throw std::invalid_argument("observables must be dim x dim");
  }
  const PairTensor t2 = density_tensor(ens, 2);
  Cx acc = 0.0;
  for (int i1 = 0; i1 < d; ++i1) {
    for (int j1 = 0; j1 < d; ++j1) {
      for (int i2 = 0; i2 < d; ++i2) {
        for (int j2 = 0; j2 < d; ++j2) {
          acc += t2.at({i1, j1, i2, j2}) * r(j1, i1) * s(j2, i2);
        }
      }
    }
  }
  return acc;
}

VarianceSplit variance_decomposition(const WeightedEnsemble& ens, const Matrix& r) {
  const int d = ens.dim();
  if (r.rows() != d || r.cols() != d) {
    throw std::invalid_argument("observable must be dim x dim");
  }
  if (hermiticity_defect(r) > 1e-12) {
    throw std::invalid_argument("observable must be Hermitian");
  }
  const PairTensor t1 = density_tensor(ens, 1);
  Matrix rho1(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) rho1(i, j) = t1.at({i, j});
  }
  const double mean_sq = (rho1 * r * r).trace().real();
  const double mean = (rho1 * r).trace().real();
  const double pair = pair_expectation(ens, r, r).real();
  VarianceSplit split;
  split.var = mean_sq - mean * mean;
  split.var1 = mean_sq - pair;
  split.var2 = pair - mean * mean;
  return split;
}

}  // namespace noisetensor
