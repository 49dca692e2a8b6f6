#pragma once

#include <cstddef>
#include <vector>

#include "noisetensor/hierarchy_series.hpp"
#include "noisetensor/lindblad.hpp"
#include "noisetensor/types.hpp"

namespace noisetensor::reduction {

using noisetensor::SdeConfig;

// Two unravelings of the same dephasing Lindblad equation
//   d E[rho]/dt = -1/2 [A, [A, E[rho]]].
// The reducing variant drives each trajectory toward an eigenstate of A
// (real multiplicative noise, centered Hermitian coupling); the nonreducing
// variant only scrambles phases (anti-Hermitian coupling) and leaves the
// variance of A untouched on average. The first-order density tensor cannot
// distinguish them; the second-order tensor can.
enum class Variant { reducing, nonreducing };

struct ReductionExperiment {
  Matrix a;          // observable being concentrated, Hermitian
  Variant variant;
  Vector psi0;       // normalized initial state
  SdeConfig sde;

  ReductionExperiment(Matrix a_in, Variant v, Vector psi0_in, const SdeConfig& cfg);

  int dim() const { return static_cast<int>(a.rows()); }
};

// The equivalent one-channel unraveling model: H = 0, real unit-variance
// noise, coupling A (reducing) or iA (nonreducing). Feeding this to the
// stochastic engines reproduces the two trajectory laws exactly; the
// anti-Hermitian case differs from the textbook linear form only by a
// stochastic global phase, which no density tensor sees.
LindbladModel reduction_model(const ReductionExperiment& exp);

struct VariancePoint {
  double time = 0.0;
  double mean_v = 0.0;   // E[Var(A)]
  double se_v = 0.0;
  double mean_a = 0.0;   // E[<A>], a martingale for both variants
  double se_a = 0.0;
  // Trajectory average of the variance drift -(Tr([rho,[rho,A]] A))^2, which
  // for normalized pure states equals -4 Var(A)^2. Identically zero for the
  // nonreducing variant (the trace vanishes by cyclicity).
  double mean_rate = 0.0;
  double se_rate = 0.0;
};

struct ReductionRun {
  Variant variant = Variant::reducing;
  int n_batches = 0;
  std::vector<double> times;
  std::vector<VariancePoint> series;             // one per recorded time
  std::vector<std::vector<double>> v_samples;    // [time][trajectory] Var(A)
  std::vector<std::vector<double>> a_samples;    // [time][trajectory] <A>
  std::vector<std::vector<double>> batch_v;      // [time][batch] batch means
  std::vector<std::vector<double>> batch_rate;   // [time][batch]
};

// Evolves cfg.n_traj trajectories of the selected variant and records the
// observable statistics every cfg.record_every steps (t = 0 and the final
// step included). The stepper renormalizes after every step, so trajectories
// stay exactly pure and unit trace; cfg.renormalize is ignored. Results are
// independent of n_threads.
ReductionRun run_reduction(const ReductionExperiment& exp, int n_threads = 1);

// Finite-difference slope of the E[V] series at a recorded index (quadratic
// fit through the three nearest records) against the recorded drift
// prediction. The slope, the prediction, and their difference are averaged
// per batch first, so the errors account for correlations along the series.
struct RateCheck {
  double time = 0.0;
  double measured = 0.0;   // d E[V] / dt from the series
  double se_measured = 0.0;
  double predicted = 0.0;  // trajectory-averaged drift
  double se_predicted = 0.0;
  double difference = 0.0;
  double se_difference = 0.0;
};

RateCheck variance_rate_check(const ReductionRun& run, std::size_t index);

// Frequency table of reduction outcomes: trajectories whose final variance
// fell below epsilon are assigned to the nearest eigenvalue cluster of A and
// compared against the initial-state weights. Throws when no trajectory
// converged.
struct OutcomeTable {
  std::vector<double> values;       // distinct eigenvalues of A, ascending
  std::vector<double> weights;      // initial-state weight per eigenvalue
  std::vector<double> frequencies;  // converged-trajectory frequencies
  std::vector<double> se;           // binomial standard error per row
  std::vector<std::size_t> counts;
  std::size_t converged = 0;
  std::size_t total = 0;
};

OutcomeTable outcome_statistics(const ReductionExperiment& exp, const ReductionRun& run,
                                double epsilon = 1e-4);

}  // namespace noisetensor::reduction
