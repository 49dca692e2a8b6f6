#include "noisetensor/jump.hpp"

#include <cmath>
#include <stdexcept>

namespace noisetensor::jump {

namespace {

void validate(const JumpModel& m) {
  const auto d = m.H.rows();
  if (d == 0 || m.H.cols() != d) throw std::invalid_argument("H must be square and nonempty");
  if (hermiticity_defect(m.H) > 1e-12) throw std::invalid_argument("H must be Hermitian");
  for (const auto& c : m.lindblads) {
    if (c.rows() != d || c.cols() != d)
      throw std::invalid_argument("collapse operator dimension mismatch");
  }
  if (!m.orthogonal && m.offsets.size() != m.lindblads.size())
    throw std::invalid_argument("need one offset per collapse operator");
}

void check_state(const JumpModel& model, const Vector& psi) {
  if (psi.size() != model.H.rows()) throw std::invalid_argument("state dimension mismatch");
}

}  // namespace

JumpModel::JumpModel(Matrix h, std::vector<Matrix> cs, std::vector<Cx> ks)
    : H(std::move(h)), lindblads(std::move(cs)), offsets(std::move(ks)), orthogonal(false) {
  validate(*this);
}

JumpModel::JumpModel(Matrix h, std::vector<Matrix> cs)
    : H(std::move(h)), lindblads(std::move(cs)), orthogonal(true) {
  validate(*this);
}

std::vector<Cx> offsets_at(const JumpModel& model, const Vector& psi) {
  check_state(model, psi);
  if (!model.orthogonal) return model.offsets;
  std::vector<Cx> out;
  out.reserve(model.lindblads.size());
  for (const auto& c : model.lindblads) out.push_back(psi.dot(c * psi));
  return out;
}

std::vector<double> jump_rates(const JumpModel& model, const Vector& psi) {
  const auto ks = offsets_at(model, psi);
  std::vector<double> out;
  out.reserve(model.lindblads.size());
  for (std::size_t k = 0; k < model.lindblads.size(); ++k) {
    const Vector shifted = model.lindblads[k] * psi - ks[k] * psi;
    out.push_back(shifted.squaredNorm());
  }
  return out;
}

std::vector<JumpChannel> jump_operators(const JumpModel& model, const Vector& psi) {
  const auto ks = offsets_at(model, psi);
  const Matrix rho = pure_density(psi);
  const Matrix eye = Matrix::Identity(model.H.rows(), model.H.cols());
  std::vector<JumpChannel> out(model.lindblads.size());
  for (std::size_t k = 0; k < model.lindblads.size(); ++k) {
    const Matrix shifted = model.lindblads[k] - ks[k] * eye;
    const double v = (shifted * psi).squaredNorm();
    out[k].rate = v;
    if (v <= 0.0) continue;
    out[k].active = true;
    out[k].b = shifted / std::sqrt(v) - eye;
    out[k].q = out[k].b * rho + rho * out[k].b.adjoint() + out[k].b * rho * out[k].b.adjoint();
  }
  return out;
}

Matrix drift_operator(const JumpModel& model, const Vector& psi) {
  const auto ks = offsets_at(model, psi);
  const Matrix eye = Matrix::Identity(model.H.rows(), model.H.cols());
  Matrix a = Cx(0, -1) * model.H;
  for (std::size_t k = 0; k < model.lindblads.size(); ++k) {
    const Matrix& c = model.lindblads[k];
    const Vector cpsi = c * psi;
    const Cx mean_c = psi.dot(cpsi);
    const double mean_cdc = cpsi.squaredNorm();
    a += -0.5 * (c.adjoint() * c) + 0.5 * mean_cdc * eye + std::conj(ks[k]) * c -
         0.5 * (mean_c * std::conj(ks[k]) + std::conj(mean_c) * ks[k]) * eye;
  }
  return a;
}

Vector step_trajectory(const JumpModel& model, const Vector& psi, double dt, RngStream& rng,
                       bool renormalize) {
  check_state(model, psi);
  const auto rates = jump_rates(model, psi);
  double total = 0.0;
  for (const double v : rates) total += v;
  if (total * dt >= 1.0)
    throw std::runtime_error("total jump probability per step is at least 1; reduce dt");

  const double roll = rng.uniform();
  double edge = 0.0;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    edge += rates[k] * dt;
    if (roll < edge) {
      const auto ks = offsets_at(model, psi);
      const Vector shifted = model.lindblads[k] * psi - ks[k] * psi;
      // (1 + B_k) psi = (c_k - K_k) psi / sqrt(v_k), already unit norm.
      Vector next = shifted / std::sqrt(rates[k]);
      if (renormalize) next /= next.norm();
      return next;
    }
  }
  Vector next = psi + dt * (drift_operator(model, psi) * psi);
  if (renormalize) next /= next.norm();
  return next;
}

PairTensor hierarchy_drift(const JumpModel& model, const Vector& psi, int order) {
  check_state(model, psi);
  if (order < 1) throw std::invalid_argument("order must be at least 1");
  if (order > 16) throw std::invalid_argument("order too large");
  const int d = model.dim();
  const Matrix rho = pure_density(psi);
  const Matrix lrho = lindblad_rhs(model.lindblad(), rho);
  const auto channels = jump_operators(model, psi);

  PairTensor out(order, d, Flavor::classical);
  const int width = 2 * order;
  const unsigned full = 1u << order;
  detail::for_each_multi_index(width, d, [&](std::span<const int> idx, std::size_t flat) {
    Cx total(0, 0);
    for (int l = 0; l < order; ++l) {
      Cx term = lrho(idx[2 * l], idx[2 * l + 1]);
      for (int j = 0; j < order; ++j)
        if (j != l) term *= rho(idx[2 * j], idx[2 * j + 1]);
      total += term;
    }
    // Subsets of slots receiving Q_k factors; a jump fires in all of them at
    // once, so every subset size >= 2 contributes at first order in dt.
    for (unsigned mask = 0; mask < full; ++mask) {
      const int bits = __builtin_popcount(mask);
      if (bits < 2) continue;
      Cx rho_part(1, 0);
      for (int j = 0; j < order; ++j)
        if (!(mask & (1u << j))) rho_part *= rho(idx[2 * j], idx[2 * j + 1]);
      Cx q_sum(0, 0);
      for (const auto& ch : channels) {
        if (!ch.active) continue;
        Cx q_prod(ch.rate, 0);
        for (int j = 0; j < order; ++j)
          if (mask & (1u << j)) q_prod *= ch.q(idx[2 * j], idx[2 * j + 1]);
        q_sum += q_prod;
      }
      total += rho_part * q_sum;
    }
    out[flat] = total;
  });
  return out;
}

Cx dg_drift_integrand(const JumpModel& model, const Vector& psi, const Matrix& a) {
  check_state(model, psi);
  if (a.rows() != model.H.rows() || a.cols() != model.H.cols())
    throw std::invalid_argument("source dimension mismatch");
  const Matrix rho = pure_density(psi);
  const Matrix lrho = lindblad_rhs(model.lindblad(), rho);
  Cx total = a.cwiseProduct(lrho).sum();
  for (const auto& ch : jump_operators(model, psi)) {
    if (!ch.active) continue;
    const Cx aq = a.cwiseProduct(ch.q).sum();
    total += ch.rate * (std::exp(aq) - Cx(1, 0) - aq);
  }
  return total * std::exp(rho.cwiseProduct(a).sum());
}

HierarchySeries run_ensemble(const JumpModel& model, const Vector& psi0, const SdeConfig& cfg,
                             int max_order, int n_threads) {
  check_state(model, psi0);
  const auto rates = jump_rates(model, psi0);
  double total = 0.0;
  for (const double v : rates) total += v;
  if (total * cfg.dt > 0.1)
    throw std::invalid_argument("initial total jump probability per step exceeds 0.1; reduce dt");

  return run_hierarchy(psi0, cfg, max_order, n_threads, "jump-traj",
                       [&](const Vector& psi, std::size_t, RngStream& rng) {
                         return step_trajectory(model, psi, cfg.dt, rng, cfg.renormalize);
                       });
}

}  // namespace noisetensor::jump
