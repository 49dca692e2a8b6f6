#include "noisetensor/bipartite.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <utility>

#include "noisetensor/budget.hpp"

namespace noisetensor::qt {

namespace {

constexpr double kStateTol = 1e-10;

}  // namespace

BipartiteState::BipartiteState(int d_env, int d_sys, Matrix density, bool is_pure)
    : d_E(d_env), d_S(d_sys), rho(std::move(density)), pure(is_pure) {
  if (d_E < 1 || d_S < 1) throw std::invalid_argument("factor dimensions must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(d_E) * d_S;
  if (rho.rows() != n || rho.cols() != n)
    throw std::invalid_argument("density matrix shape does not match d_E * d_S");
  if (hermiticity_defect(rho) > kStateTol)
    throw std::invalid_argument("density matrix must be Hermitian");
  if (std::abs(rho.trace() - Cx(1, 0)) > kStateTol)
    throw std::invalid_argument("density matrix must have unit trace");
  const Eigen::SelfAdjointEigenSolver<Matrix> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kStateTol)
    throw std::invalid_argument("density matrix must be positive semidefinite");
  if (pure && std::abs((rho * rho).trace() - Cx(1, 0)) > kStateTol)
    throw std::invalid_argument("state flagged pure but Tr rho^2 != 1");
}

BipartiteState product_state(const Matrix& rho_env, const Matrix& rho_sys) {
  return BipartiteState(static_cast<int>(rho_env.rows()), static_cast<int>(rho_sys.rows()),
                        env_major_kron(rho_env, rho_sys),
                        std::abs((rho_env * rho_env).trace() * (rho_sys * rho_sys).trace() -
                                 Cx(1, 0)) < kStateTol);
}

BipartiteState pure_bipartite(int d_env, int d_sys, const Vector& psi) {
  if (psi.size() != static_cast<Eigen::Index>(d_env) * d_sys)
    throw std::invalid_argument("state vector length does not match d_E * d_S");
  if (std::abs(psi.norm() - 1.0) > kStateTol)
    throw std::invalid_argument("state vector must be normalized");
  return BipartiteState(d_env, d_sys, pure_density(psi), true);
}

WeightedStateFamily::WeightedStateFamily(std::vector<Member> ms) : members(std::move(ms)) {
  if (members.empty()) throw std::invalid_argument("state family must not be empty");
  double total = 0.0;
  for (const auto& m : members) {
    if (m.w < -1e-12) throw std::invalid_argument("member weights must be nonnegative");
    if (m.state.d_E != members.front().state.d_E || m.state.d_S != members.front().state.d_S)
      throw std::invalid_argument("family members must share factor dimensions");
    total += m.w;
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw std::invalid_argument("member weights must sum to one");
}

Matrix env_major_kron(const Matrix& env_op, const Matrix& sys_op) {
  const Eigen::Index de = env_op.rows(), ds = sys_op.rows();
  Matrix out(de * ds, de * ds);
  for (Eigen::Index e1 = 0; e1 < de; ++e1)
    for (Eigen::Index e2 = 0; e2 < de; ++e2)
      out.block(e1 * ds, e2 * ds, ds, ds) = env_op(e1, e2) * sys_op;
  return out;
}

Matrix system_block(const BipartiteState& s, int i, int j) {
  if (i < 0 || i >= s.d_S || j < 0 || j >= s.d_S)
    throw std::out_of_range("system index out of range");
  Matrix block(s.d_E, s.d_E);
  for (int e1 = 0; e1 < s.d_E; ++e1)
    for (int e2 = 0; e2 < s.d_E; ++e2)
      block(e1, e2) = s.rho(static_cast<Eigen::Index>(e1) * s.d_S + i,
                            static_cast<Eigen::Index>(e2) * s.d_S + j);
  return block;
}

Matrix reduced_system(const BipartiteState& s) {
  Matrix r = Matrix::Zero(s.d_S, s.d_S);
  for (int e = 0; e < s.d_E; ++e)
    r += s.rho.block(static_cast<Eigen::Index>(e) * s.d_S,
                     static_cast<Eigen::Index>(e) * s.d_S, s.d_S, s.d_S);
  return r;
}

Matrix reduced_environment(const BipartiteState& s) {
  Matrix r(s.d_E, s.d_E);
  for (int e1 = 0; e1 < s.d_E; ++e1)
    for (int e2 = 0; e2 < s.d_E; ++e2) {
      Cx acc = 0.0;
      for (int i = 0; i < s.d_S; ++i)
        acc += s.rho(static_cast<Eigen::Index>(e1) * s.d_S + i,
                     static_cast<Eigen::Index>(e2) * s.d_S + i);
      r(e1, e2) = acc;
    }
  return r;
}

PairTensor trace_tensor(const BipartiteState& s, int order) {
  if (order < 1) throw std::invalid_argument("tensor order must be at least 1");
  double work = static_cast<double>(s.d_E) * s.d_E;
  for (int l = 0; l < order; ++l) work *= static_cast<double>(s.d_S) * s.d_S;
  require_budget(static_cast<std::size_t>(work * sizeof(Cx)), "bipartite trace tensor");

  std::vector<Matrix> blocks(static_cast<std::size_t>(s.d_S) * s.d_S);
  for (int i = 0; i < s.d_S; ++i)
    for (int j = 0; j < s.d_S; ++j)
      blocks[static_cast<std::size_t>(i) * s.d_S + j] = system_block(s, i, j);

  PairTensor t(order, s.d_S, Flavor::quantum);
  detail::for_each_multi_index(2 * order, s.d_S, [&](std::span<const int> idx, std::size_t flat) {
    Matrix prod = blocks[static_cast<std::size_t>(idx[0]) * s.d_S + idx[1]];
    for (int l = 1; l < order; ++l)
      prod *= blocks[static_cast<std::size_t>(idx[2 * l]) * s.d_S + idx[2 * l + 1]];
    t[flat] = prod.trace();
  });
  return t;
}

PairTensor mixed_trace_tensor(const WeightedStateFamily& f, int order) {
  PairTensor t(order, f.members.front().state.d_S, Flavor::quantum);
  for (const auto& m : f.members) {
    PairTensor part = trace_tensor(m.state, order);
    part *= Cx(m.w, 0);
    t += part;
  }
  return t;
}

PairTensor classical_variant(const WeightedStateFamily& f, int order) {
  if (order < 1) throw std::invalid_argument("tensor order must be at least 1");
  const int d = f.members.front().state.d_S;
  PairTensor t(order, d, Flavor::classical);
  for (const auto& m : f.members) {
    const Matrix r1 = reduced_system(m.state);
    detail::for_each_multi_index(2 * order, d, [&](std::span<const int> idx, std::size_t flat) {
      Cx prod = m.w;
      for (int l = 0; l < order; ++l) prod *= r1(idx[2 * l], idx[2 * l + 1]);
      t[flat] += prod;
    });
  }
  return t;
}

double environment_fluctuation(const BipartiteState& s, const Matrix& a_sys) {
  if (a_sys.rows() != s.d_S || a_sys.cols() != s.d_S)
    throw std::invalid_argument("observable must act on the system factor");
  if (!s.pure)
    std::cerr << "warning: environment fluctuation of a mixed state; the order-3 "
                 "tensor identity does not apply\n";
  const Matrix rho_env = reduced_environment(s);

  // A_E = Tr_S rho A_S, assembled from the system blocks.
  Matrix a_env = Matrix::Zero(s.d_E, s.d_E);
  for (int i = 0; i < s.d_S; ++i)
    for (int j = 0; j < s.d_S; ++j) a_env += a_sys(j, i) * system_block(s, i, j);

  const Cx mean = (rho_env * a_env).trace();
  const Cx second = (rho_env * a_env * a_env).trace();
  return (second - mean * mean).real();
}

double pointer_variance_rate(const BipartiteState& s, const Matrix& h_sys,
                             const Matrix& h_env, const Matrix& h_int, const Matrix& a) {
  if (h_sys.rows() != s.d_S || a.rows() != s.d_S || h_env.rows() != s.d_E)
    throw std::invalid_argument("operator dimensions do not match the state");
  if (h_int.rows() != s.rho.rows() || h_int.cols() != s.rho.cols())
    throw std::invalid_argument("interaction must act on the composite space");

  const Matrix a_full = env_major_kron(Matrix::Identity(s.d_E, s.d_E), a);
  const Matrix he_full = env_major_kron(h_env, Matrix::Identity(s.d_S, s.d_S));
  if (max_abs(commutator(a_full, he_full)) > 1e-10)
    throw std::invalid_argument("pointer observable must commute with the environment term");
  if (max_abs(commutator(a_full, h_int)) > 1e-10)
    throw std::invalid_argument("pointer observable must commute with the interaction");

  const Matrix r1 = reduced_system(s);
  const Cx rate = Cx(0, 1) * (r1 * commutator(h_sys, a * a)).trace() -
                  Cx(0, 2) * (r1 * a).trace() * (r1 * commutator(h_sys, a)).trace();
  return rate.real();
}

}  // namespace noisetensor::qt
