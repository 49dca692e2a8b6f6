#pragma once

#include <vector>

#include "noisetensor/hierarchy_series.hpp"
#include "noisetensor/lindblad.hpp"
#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/rng.hpp"
#include "noisetensor/types.hpp"

namespace noisetensor::jump {

using noisetensor::HierarchySeries;
using noisetensor::SdeConfig;

// Piecewise deterministic (jump) unraveling of the same mean evolution as the
// diffusive one. The offsets K_k select the unraveling: fixed complex
// constants (K_k = 0 is the standard quantum jump process) or the
// state-dependent orthogonal choice K_k = <c_k>, recomputed every step.
struct JumpModel {
  Matrix H;
  std::vector<Matrix> lindblads;
  std::vector<Cx> offsets;  // ignored when orthogonal
  bool orthogonal = false;

  // Fixed offsets, one per collapse operator.
  JumpModel(Matrix h, std::vector<Matrix> cs, std::vector<Cx> ks);
  // Orthogonal-jump choice K_k = <c_k>.
  JumpModel(Matrix h, std::vector<Matrix> cs);

  int dim() const { return static_cast<int>(H.rows()); }
  int channels() const { return static_cast<int>(lindblads.size()); }

  // The shared mean-evolution target.
  LindbladModel lindblad() const { return LindbladModel(H, lindblads); }
};

// Offset values at the current state: the stored constants, or <c_k>.
std::vector<Cx> offsets_at(const JumpModel& model, const Vector& psi);

// v_k = <(c_k - K_k)^dag (c_k - K_k)>, the per-channel jump rates.
std::vector<double> jump_rates(const JumpModel& model, const Vector& psi);

// Per-channel jump data at the current state. Channels with v_k = 0 cannot
// jump and carry no operators (active = false).
struct JumpChannel {
  double rate = 0.0;
  bool active = false;
  Matrix b;  // B_k = (c_k - K_k)/sqrt(v_k) - 1
  Matrix q;  // Q_k = B_k rho + rho B_k^dag + B_k rho B_k^dag, traceless
};
std::vector<JumpChannel> jump_operators(const JumpModel& model, const Vector& psi);

// Drift operator of the deterministic segments,
//   A = -i H - (1/2) c_k^dag c_k + (1/2) <c_k^dag c_k> + c_k K_k^*
//       - (1/2)(<c_k> K_k^* + <c_k>^* K_k),
// summed over k; <A + A^dag> = 0 so the segment preserves the norm in mean.
Matrix drift_operator(const JumpModel& model, const Vector& psi);

// One fixed-dt step: with probability v_k dt (mutually exclusive channels)
// apply the jump map psi -> (1 + B_k) psi; otherwise Euler-step the
// deterministic drift. Renormalizes either way when requested. Throws when
// sum_k v_k dt >= 1; one uniform draw per step.
Vector step_trajectory(const JumpModel& model, const Vector& psi, double dt, RngStream& rng,
                       bool renormalize = true);

// Per-state integrand of the order-n tensor drift,
//   sum_l (rho...rho)_l (L rho)_l
//   + sum_{S subset of slots, |S| >= 2} (rho...rho)_S sum_k v_k prod_{l in S} (Q_k)_l.
// All factor counts up to n appear because a jump indicator equals its square.
PairTensor hierarchy_drift(const JumpModel& model, const Vector& psi, int order);

// Per-state drift integrand of the generating function,
//   (a . L rho + sum_k v_k (exp(a . Q_k) - 1 - a . Q_k)) exp(a . rho).
Cx dg_drift_integrand(const JumpModel& model, const Vector& psi, const Matrix& a);

// Ensemble estimates of rho^(1..max_order); engine and determinism guarantees
// as in the diffusive module. Validates sum_k v_k(psi0) dt <= 0.1.
HierarchySeries run_ensemble(const JumpModel& model, const Vector& psi0, const SdeConfig& cfg,
                             int max_order, int n_threads = 1);

}  // namespace noisetensor::jump
