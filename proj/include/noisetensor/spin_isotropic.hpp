#pragma once

#include <cstdint>
#include <vector>

#include "noisetensor/ensemble.hpp"
#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/stats.hpp"
#include "noisetensor/types.hpp"

namespace noisetensor::spin {

// Closed forms for the uniform (isotropic) ensemble of spin-1/2 pure states
// rho(v) = (1 + v.sigma)/2 with v uniform on the unit sphere, where
// E[v_s v_t] = delta_st / 3.

const std::array<Matrix, 3>& paulis();

// (1 + v.sigma)/2 for a unit Bloch vector.
Matrix bloch_density(const Eigen::Vector3d& v);

// Spinor with bloch_density(v) == psi psi^dag.
Vector bloch_state(const Eigen::Vector3d& v);

// Moment tensors of the isotropic ensemble, orders 1..3:
//   order 1: delta/2
//   order 2: (delta delta + (1/3) sigma.sigma)/4
//   order 3: (delta delta delta + (1/3) [three delta (sigma.sigma) pairings])/8
PairTensor analytic_tensor(int order);

// G[a] = exp(tr a / 2) * sinh|A|/|A| with A_r = (1/2) sum_ij sigma^r_ij a_ij.
// |A| is complex; the function is entire in A.A, evaluated by series near 0.
Cx analytic_generating(const Matrix& a);

namespace detail {
// Both branches of f(x) = sinh(sqrt x)/sqrt x, exposed for branch-consistency
// tests. f is entire: f(x) = sum_k x^k / (2k+1)!.
Cx sinhc_sqrt_series(Cx x);
Cx sinhc_sqrt_closed(Cx x);
}  // namespace detail

// Residual |x f'' + (3/2) f' - f/4| of the radial equation satisfied by
// f(x) = sinh(sqrt x)/sqrt x, evaluated with exact derivatives of the closed
// form (series derivatives near x = 0).
double radial_ode_residual(double x);

// Uniform unit vectors via normalized Gaussian triples. Sample k depends only
// on (seed, k), so the set is bit-identical across runs and schedulers.
std::vector<Eigen::Vector3d> sample_sphere(std::uint64_t seed, std::size_t n);

// Equal-weight ensemble of bloch_state(v) over sample_sphere(seed, n).
WeightedEnsemble sphere_ensemble(std::uint64_t seed, std::size_t n);

// Monte Carlo moment tensors of the isotropic ensemble for orders 1..max_order
// from one shared sample set, with batch-mean standard errors.
std::vector<TensorEstimate> mc_tensors(std::uint64_t seed, std::size_t n_samples,
                                       int max_order, int n_batches = 20);

}  // namespace noisetensor::spin
