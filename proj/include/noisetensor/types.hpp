#pragma once

#include <Eigen/Dense>
#include <complex>

namespace noisetensor {

using Cx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

// Default tolerance for exact algebraic identities (contractions, symmetry,
// conservation laws). Statistical checks carry their own gates.
constexpr double kDefaultTol = 1e-10;

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const Matrix& m) {
  return max_abs(Matrix(m - m.adjoint()));
}

// |psi><psi| for a (not necessarily normalized) column vector.
inline Matrix pure_density(const Vector& psi) { return psi * psi.adjoint(); }

inline Matrix commutator(const Matrix& a, const Matrix& b) {
  return a * b - b * a;
}

inline Matrix anticommutator(const Matrix& a, const Matrix& b) {
  return a * b + b * a;
}

}  // namespace noisetensor
