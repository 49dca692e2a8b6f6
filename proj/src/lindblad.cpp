#include "noisetensor/lindblad.hpp"

#include <stdexcept>

#include <Eigen/SVD>

namespace noisetensor {

namespace {

constexpr double kModelTol = 1e-12;

void validate(const LindbladModel& m) {
  const auto d = m.H.rows();
  if (d == 0 || m.H.cols() != d) throw std::invalid_argument("H must be square and nonempty");
  if (hermiticity_defect(m.H) > kModelTol) throw std::invalid_argument("H must be Hermitian");
  for (const auto& c : m.lindblads) {
    if (c.rows() != d || c.cols() != d)
      throw std::invalid_argument("collapse operator dimension mismatch");
  }
  const auto k = static_cast<Eigen::Index>(m.lindblads.size());
  if (m.u.rows() != k || m.u.cols() != k)
    throw std::invalid_argument("u must be K x K for K collapse operators");
  if (k > 0) {
    if (max_abs(Matrix(m.u - m.u.transpose())) > kModelTol)
      throw std::invalid_argument("u must be symmetric");
    Eigen::JacobiSVD<Matrix> svd(m.u);
    if (svd.singularValues()(0) > 1.0 + kModelTol)
      throw std::invalid_argument("u must have operator norm at most 1");
  }
}

}  // namespace

LindbladModel::LindbladModel(Matrix h, std::vector<Matrix> cs, Matrix u_matrix)
    : H(std::move(h)), lindblads(std::move(cs)), u(std::move(u_matrix)) {
  validate(*this);
}

LindbladModel::LindbladModel(Matrix h) : LindbladModel(std::move(h), {}, Matrix(0, 0)) {}

LindbladModel::LindbladModel(Matrix h, std::vector<Matrix> cs)
    : H(std::move(h)), lindblads(std::move(cs)) {
  const auto k = static_cast<Eigen::Index>(lindblads.size());
  u = Matrix::Identity(k, k);
  validate(*this);
}

Matrix lindblad_rhs(const LindbladModel& model, const Matrix& rho) {
  if (rho.rows() != model.H.rows() || rho.cols() != model.H.cols())
    throw std::invalid_argument("state dimension mismatch");
  Matrix out = Cx(0, -1) * commutator(model.H, rho);
  for (const auto& c : model.lindblads) {
    const Matrix cdc = c.adjoint() * c;
    out += c * rho * c.adjoint() - 0.5 * anticommutator(cdc, rho);
  }
  return out;
}

Matrix transition_rate_operator(const LindbladModel& model, const Vector& psi) {
  const Matrix rho = pure_density(psi);
  Matrix w = Matrix::Zero(model.H.rows(), model.H.cols());
  for (const auto& c : model.lindblads) {
    const Cx mean = (psi.adjoint() * c * psi)(0);
    const Matrix f = c - mean * Matrix::Identity(c.rows(), c.cols());
    w += f * rho * f.adjoint();
  }
  return w;
}

}  // namespace noisetensor
