#pragma once

// Density tensors built from explicit system-plus-environment states. The
// composite Hilbert space is indexed environment-major: basis vector |e, i>
// lives at flat index e*d_S + i. The order-n tensor traces a cyclic product
// of system-indexed environment blocks,
//   T_{i1 j1,...,in jn} = Tr_E rho_{i1 j1} rho_{i2 j2} ... rho_{in jn},
// with (rho_{ij})_{e1 e2} = <e1 i| rho |e2 j>. Only cyclic pair symmetry and
// adjacent chain contraction survive in this setting; single-pair trace
// contraction inserts Tr_S rho instead of removing a factor.

#include <vector>

#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/types.hpp"

namespace noisetensor::qt {

struct BipartiteState {
  int d_E = 0;
  int d_S = 0;
  Matrix rho;  // (d_E*d_S) x (d_E*d_S), Hermitian, unit trace, PSD
  bool pure = false;

  // Validates shape, Hermiticity, trace, positivity (smallest eigenvalue
  // >= -1e-10), and Tr rho^2 = 1 when flagged pure.
  BipartiteState(int d_env, int d_sys, Matrix density, bool is_pure);

  int total_dim() const { return d_E * d_S; }
};

// Convenience constructors. product() forms rho_E (x) rho_S; pure_state()
// wraps |psi><psi| for a unit vector on the composite space.
BipartiteState product_state(const Matrix& rho_env, const Matrix& rho_sys);
BipartiteState pure_bipartite(int d_env, int d_sys, const Vector& psi);

struct WeightedStateFamily {
  struct Member {
    double w;
    BipartiteState state;
  };
  std::vector<Member> members;  // weights nonnegative, summing to one

  explicit WeightedStateFamily(std::vector<Member> ms);
};

// Environment-space block (rho_{ij})_{e1 e2} = <e1 i| rho |e2 j>; summing the
// diagonal blocks over i gives Tr_S rho.
Matrix system_block(const BipartiteState& s, int i, int j);

// Reduced matrices of the two factors.
Matrix reduced_system(const BipartiteState& s);       // Tr_E rho, d_S x d_S
Matrix reduced_environment(const BipartiteState& s);  // Tr_S rho, d_E x d_E

// Order-n density tensor Tr_E rho_{i1 j1} ... rho_{in jn} (quantum flavor).
// Work scales as d_S^{2n} block products of size d_E.
PairTensor trace_tensor(const BipartiteState& s, int order);

// Weighted sum of member tensors: sum_a w_a Tr_E rho_{a;i1 j1}...rho_{a;in jn}.
PairTensor mixed_trace_tensor(const WeightedStateFamily& f, int order);

// Classical-style tensor sum_a w_a prod_l (Tr_E rho_a)_{il jl}; keeps only the
// fluctuations of the weights, so it is fully permutation symmetric and
// coincides with mixed_trace_tensor at order 1.
PairTensor classical_variant(const WeightedStateFamily& f, int order);

// Mean squared fluctuation over the environment of A_E = Tr_S rho A_S:
//   Tr_E rho_E A_E^2 - (Tr_E rho_E A_E)^2,  rho_E = Tr_S rho.
// Nonnegative. For pure states it equals a contraction of the order-3 and
// order-2 tensors; mixed input is accepted with a warning since the identity
// then fails.
double environment_fluctuation(const BipartiteState& s, const Matrix& a_sys);

// Growth rate of Var(A) under the composite Hamiltonian H_E + H_S + H_int for
// a pointer observable A ([A, H_E] = [A, H_int] = 0 on the composite space):
//   dV/dt = i Tr_S r1 [H_S, A^2] - 2i (Tr_S r1 A)(Tr_S r1 [H_S, A]),
// with r1 the reduced system matrix. Only r1 enters, never the higher
// tensors. Throws if a commutator precondition fails.
double pointer_variance_rate(const BipartiteState& s, const Matrix& h_sys,
                             const Matrix& h_env, const Matrix& h_int,
                             const Matrix& a);

// kron(E, S) under the environment-major index convention.
Matrix env_major_kron(const Matrix& env_op, const Matrix& sys_op);

}  // namespace noisetensor::qt
