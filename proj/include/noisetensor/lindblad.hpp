#pragma once

#include <vector>

#include "noisetensor/types.hpp"

namespace noisetensor {

// Open-system model: Hamiltonian H, collapse operators c_k, and the complex
// symmetric matrix u of second moments of the driving noises,
//   E[dxi_j dxi_k^*] = dt delta_jk,   E[dxi_j dxi_k] = dt u_jk.
// u is what distinguishes unravelings that share the same mean evolution.
struct LindbladModel {
  Matrix H;
  std::vector<Matrix> lindblads;
  Matrix u;

  // Validates: H Hermitian within 1e-12, all operators square of equal
  // dimension, u K x K symmetric within 1e-12 with operator norm <= 1 + 1e-12.
  LindbladModel(Matrix h, std::vector<Matrix> cs, Matrix u_matrix);

  // Hamiltonian-only model (K = 0).
  explicit LindbladModel(Matrix h);

  // Identity u, the most common case.
  LindbladModel(Matrix h, std::vector<Matrix> cs);

  int dim() const { return static_cast<int>(H.rows()); }
  int channels() const { return static_cast<int>(lindblads.size()); }
};

// -i[H, rho] + sum_k (c_k rho c_k^dag - (1/2){c_k^dag c_k, rho}).
// Trace-free and Hermiticity-preserving.
Matrix lindblad_rhs(const LindbladModel& model, const Matrix& rho);

// W = sum_k (c_k - <c_k>) rho (c_k - <c_k>)^dag at rho = psi psi^dag,
// equal to L rho - {rho, L rho} + rho Tr(rho L rho) for normalized psi.
// Hermitian positive semidefinite.
Matrix transition_rate_operator(const LindbladModel& model, const Vector& psi);

}  // namespace noisetensor
