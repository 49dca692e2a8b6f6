#include "noisetensor/ito.hpp"

#include <iostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace noisetensor::ito {

namespace {

// Centered fluctuation blocks P_k = (c_k - <c_k>) rho for normalized psi.
std::vector<Matrix> fluctuation_blocks(const LindbladModel& model, const Vector& psi) {
  const Matrix rho = pure_density(psi);
  std::vector<Matrix> out;
  out.reserve(model.lindblads.size());
  for (const auto& c : model.lindblads) {
    const Cx mean = (psi.adjoint() * c * psi)(0);
    out.push_back((c - mean * Matrix::Identity(c.rows(), c.cols())) * rho);
  }
  return out;
}

void check_state(const LindbladModel& model, const Vector& psi) {
  if (psi.size() != model.H.rows()) throw std::invalid_argument("state dimension mismatch");
}

}  // namespace

WienerSampler::WienerSampler(const Matrix& u) : channels_(static_cast<int>(u.rows())) {
  if (u.rows() != u.cols()) throw std::invalid_argument("u must be square");
  const int k = channels_;
  if (k == 0) {
    transform_.resize(0, 0);
    return;
  }
  // Symmetrize away validation-tolerance asymmetry so the covariance below is
  // exactly symmetric.
  const Matrix us = 0.5 * (u + u.transpose());
  RealMatrix cov(2 * k, 2 * k);
  const RealMatrix re = us.real();
  const RealMatrix im = us.imag();
  const RealMatrix eye = RealMatrix::Identity(k, k);
  cov.topLeftCorner(k, k) = 0.5 * (eye + re);
  cov.topRightCorner(k, k) = 0.5 * im;
  cov.bottomLeftCorner(k, k) = 0.5 * im;
  cov.bottomRightCorner(k, k) = 0.5 * (eye - re);
  Eigen::SelfAdjointEigenSolver<RealMatrix> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("covariance eigendecomposition failed");
  RealVector lam = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-10)
      throw std::invalid_argument("u does not define a positive semidefinite noise covariance");
    lam(i) = std::max(lam(i), 0.0);
  }
  transform_ = eig.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

void WienerSampler::sample(RngStream& rng, double dt, Vector& out) const {
  const int k = channels_;
  out.resize(k);
  if (k == 0) return;
  RealVector z(2 * k);
  for (Eigen::Index i = 0; i < 2 * k; ++i) z(i) = rng.normal();
  const RealVector w = std::sqrt(dt) * (transform_ * z);
  for (int j = 0; j < k; ++j) out(j) = Cx(w(j), w(k + j));
}

Vector step_trajectory(const LindbladModel& model, const WienerSampler& noise,
                       const Vector& psi, double dt, RngStream& rng, bool renormalize) {
  check_state(model, psi);
  Vector dxi;
  noise.sample(rng, dt, dxi);

  Vector dpsi = Cx(0, -1) * (model.H * psi) * dt;
  for (std::size_t k = 0; k < model.lindblads.size(); ++k) {
    const Matrix& c = model.lindblads[k];
    const Vector cpsi = c * psi;
    const Cx mean = psi.dot(cpsi);
    dpsi += -0.5 * dt *
            (c.adjoint() * cpsi - 2.0 * std::conj(mean) * cpsi + std::norm(mean) * psi);
    dpsi += (cpsi - mean * psi) * std::conj(dxi(static_cast<Eigen::Index>(k)));
  }
  Vector next = psi + dpsi;
  if (renormalize) next /= next.norm();
  return next;
}

PairTensor c_coefficient(const LindbladModel& model, const Vector& psi) {
  check_state(model, psi);
  const int d = model.dim();
  const auto p = fluctuation_blocks(model, psi);
  const auto k_n = p.size();
  PairTensor out(2, d, Flavor::classical);
  // Delta-correlated part: P_k (x) P_k^dag + P_k^dag (x) P_k.
  for (std::size_t k = 0; k < k_n; ++k) {
    const Matrix pd = p[k].adjoint();
    for (int m = 0; m < d; ++m)
      for (int r = 0; r < d; ++r)
        for (int pp = 0; pp < d; ++pp)
          for (int q = 0; q < d; ++q)
            out.at({m, r, pp, q}) += p[k](m, r) * pd(pp, q) + pd(m, r) * p[k](pp, q);
  }
  // u-correlated part: u*_kl P_k (x) P_l + u_kl P_k^dag (x) P_l^dag.
  for (std::size_t k = 0; k < k_n; ++k) {
    for (std::size_t l = 0; l < k_n; ++l) {
      const Cx u = model.u(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      if (u == Cx(0, 0)) continue;
      const Matrix pkd = p[k].adjoint();
      const Matrix pld = p[l].adjoint();
      for (int m = 0; m < d; ++m)
        for (int r = 0; r < d; ++r)
          for (int pp = 0; pp < d; ++pp)
            for (int q = 0; q < d; ++q)
              out.at({m, r, pp, q}) += std::conj(u) * p[k](m, r) * p[l](pp, q) +
                                       u * pkd(m, r) * pld(pp, q);
    }
  }
  return out;
}

PairTensor c_coefficient_from_rate(const LindbladModel& model, const Vector& psi) {
  check_state(model, psi);
  const int d = model.dim();
  const Matrix rho = pure_density(psi);
  const Matrix w = transition_rate_operator(model, psi);
  const auto p = fluctuation_blocks(model, psi);
  const auto k_n = p.size();
  PairTensor out(2, d, Flavor::classical);
  for (int m = 0; m < d; ++m)
    for (int r = 0; r < d; ++r)
      for (int pp = 0; pp < d; ++pp)
        for (int q = 0; q < d; ++q)
          out.at({m, r, pp, q}) = w(m, q) * rho(pp, r) + w(pp, r) * rho(m, q);
  for (std::size_t k = 0; k < k_n; ++k) {
    for (std::size_t l = 0; l < k_n; ++l) {
      const Cx u = model.u(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      if (u == Cx(0, 0)) continue;
      const Matrix pkd = p[k].adjoint();
      const Matrix pld = p[l].adjoint();
      for (int m = 0; m < d; ++m)
        for (int r = 0; r < d; ++r)
          for (int pp = 0; pp < d; ++pp)
            for (int q = 0; q < d; ++q)
              out.at({m, r, pp, q}) += std::conj(u) * p[k](m, q) * p[l](pp, r) +
                                       u * pkd(pp, r) * pld(m, q);
    }
  }
  return out;
}

PairTensor hierarchy_drift(const LindbladModel& model, const Vector& psi, int order) {
  check_state(model, psi);
  if (order < 1) throw std::invalid_argument("order must be at least 1");
  const int d = model.dim();
  const Matrix rho = pure_density(psi);
  const Matrix lrho = lindblad_rhs(model, rho);
  const PairTensor c = order >= 2 ? c_coefficient(model, psi) : PairTensor(2, d, Flavor::classical);

  PairTensor out(order, d, Flavor::classical);
  const int width = 2 * order;
  detail::for_each_multi_index(width, d, [&](std::span<const int> idx, std::size_t flat) {
    Cx total(0, 0);
    // Product over all slots of rho, with one or two factors swapped out.
    // Recomputed per swap; order and d are small where this is used.
    for (int l = 0; l < order; ++l) {
      Cx term = lrho(idx[2 * l], idx[2 * l + 1]);
      for (int j = 0; j < order; ++j)
        if (j != l) term *= rho(idx[2 * j], idx[2 * j + 1]);
      total += term;
    }
    for (int l = 0; l < order; ++l) {
      for (int m = l + 1; m < order; ++m) {
        Cx term = c.at({idx[2 * l], idx[2 * l + 1], idx[2 * m], idx[2 * m + 1]});
        for (int j = 0; j < order; ++j)
          if (j != l && j != m) term *= rho(idx[2 * j], idx[2 * j + 1]);
        total += term;
      }
    }
    out[flat] = total;
  });
  return out;
}

Cx dg_drift_integrand(const LindbladModel& model, const Vector& psi, const Matrix& a) {
  check_state(model, psi);
  if (a.rows() != model.H.rows() || a.cols() != model.H.cols())
    throw std::invalid_argument("source dimension mismatch");
  const int d = model.dim();
  const Matrix rho = pure_density(psi);
  const Matrix lrho = lindblad_rhs(model, rho);
  const PairTensor c = c_coefficient(model, psi);
  Cx linear = a.cwiseProduct(lrho).sum();
  Cx quad(0, 0);
  for (int m = 0; m < d; ++m)
    for (int r = 0; r < d; ++r)
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) quad += a(m, r) * a(p, q) * c.at({m, r, p, q});
  return (linear + 0.5 * quad) * std::exp(rho.cwiseProduct(a).sum());
}

HierarchySeries run_ensemble(const LindbladModel& model, const Vector& psi0,
                             const SdeConfig& cfg, int max_order, int n_threads) {
  check_state(model, psi0);
  double rate_bound = 0.0;
  for (const auto& c : model.lindblads) rate_bound += c.squaredNorm();
  if (rate_bound * cfg.dt > 0.1)
    std::cerr << "warning: rate bound * dt = " << rate_bound * cfg.dt
              << " exceeds 0.1; consider a smaller time step\n";

  const WienerSampler sampler(model.u);
  return run_hierarchy(psi0, cfg, max_order, n_threads, "ito-traj",
                       [&](const Vector& psi, std::size_t, RngStream& rng) {
                         return step_trajectory(model, sampler, psi, cfg.dt, rng,
                                                cfg.renormalize);
                       });
}

}  // namespace noisetensor::ito
