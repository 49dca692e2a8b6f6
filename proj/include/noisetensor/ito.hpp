#pragma once

#include <cstdint>
#include <vector>

#include "noisetensor/hierarchy_series.hpp"
#include "noisetensor/lindblad.hpp"
#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/rng.hpp"
#include "noisetensor/stats.hpp"
#include "noisetensor/types.hpp"

namespace noisetensor::ito {

using noisetensor::HierarchySeries;
using noisetensor::SdeConfig;

// Draws the K complex Wiener increments for a fixed second-moment matrix u.
// The stacked real vector (Re dxi, Im dxi) is Gaussian with covariance
//   dt/2 * [[I + Re u, Im u], [Im u, I - Re u]],
// the unique real covariance reproducing E[dxi_j dxi_k^*] = dt delta_jk and
// E[dxi_j dxi_k] = dt u_jk. Sampling goes through a symmetric
// eigendecomposition computed once; eigenvalues below -1e-10 are rejected,
// small negatives are clamped to zero.
class WienerSampler {
 public:
  explicit WienerSampler(const Matrix& u);

  int channels() const { return channels_; }

  // Fills out (resized to K) with increments scaled to time step dt.
  // Consumes 2K normal draws from rng.
  void sample(RngStream& rng, double dt, Vector& out) const;

 private:
  int channels_;
  RealMatrix transform_;  // 2K x 2K, V sqrt(Lambda)
};

// One Euler-Maruyama step of the stochastic Schrodinger equation
//   d psi = -i H_psi psi dt + sum_k (c_k - <c_k>) psi dxi_k^*,
//   -i H_psi = -i H - (1/2) sum_k (c_k^dag c_k - 2 <c_k>^* c_k + |<c_k>|^2),
// optionally followed by exact renormalization. The drift is norm-preserving
// in mean, so without renormalization the norm drifts at O(dt^2) per step.
Vector step_trajectory(const LindbladModel& model, const WienerSampler& noise,
                       const Vector& psi, double dt, RngStream& rng,
                       bool renormalize = true);

// Second-moment coefficient C_{mr,pq} = E[d rho_mr d rho_pq]/dt at
// rho = psi psi^dag, built from the centered fluctuation blocks
// (c_k - <c_k>) rho. Symmetric under (mr) <-> (pq); every delta-contraction
// vanishes. Stored as an order-2 PairTensor with pairs (m,r) and (p,q).
PairTensor c_coefficient(const LindbladModel& model, const Vector& psi);

// The same coefficient assembled from the transition rate operator and
// crossed projections, valid for idempotent rho. Agrees with c_coefficient
// to roundoff at every normalized psi.
PairTensor c_coefficient_from_rate(const LindbladModel& model, const Vector& psi);

// Per-state integrand of the order-n tensor drift:
//   sum_l (rho ... rho)_l (L rho)_l + sum_{l<m} (rho ... rho)_{lm} C_{lm}.
// For n = 1 this is exactly lindblad_rhs, independent of u.
PairTensor hierarchy_drift(const LindbladModel& model, const Vector& psi, int order);

// Per-state drift integrand of the generating function,
//   (a . L rho + (1/2) a a . C) exp(rho . a),
// with rho . a = sum_ij rho_ij a_ij. Satisfies both descent identities in a.
Cx dg_drift_integrand(const LindbladModel& model, const Vector& psi, const Matrix& a);

// Evolves cfg.n_traj trajectories from psi0 and records batch-mean estimates
// of rho^(1..max_order) every cfg.record_every steps (t = 0 and the final
// step included). Estimates are trajectory averages of the outer powers of
// psi psi^dag, so descent contractions hold exactly per recorded time.
// Results are independent of n_threads.
HierarchySeries run_ensemble(const LindbladModel& model, const Vector& psi0,
                             const SdeConfig& cfg, int max_order, int n_threads = 1);

}  // namespace noisetensor::ito
