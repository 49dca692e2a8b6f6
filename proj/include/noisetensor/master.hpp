#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/types.hpp"

// Master-equation generators for density tensors.  Every generator here is
// assembled from one d x d state per slot, so the chain contraction of an
// order-n drift can be compared directly against the order-(n-1) drift with
// the merged slot carrying the squared state.  In the hierarchy proper all
// slots hold the same closed order-1 state; the order-n tensor never feeds
// back into its own drift.

namespace noisetensor::master {

// One frequency channel of a weak-coupling generator: operators A_alpha
// attached to frequency omega, with a K x K rate table (Hermitian, positive
// semidefinite) and a K x K shift table (Hermitian) for K operators.
struct FrequencyBlock {
  double omega = 0.0;
  std::vector<Matrix> ops;
  Matrix rates;
  Matrix shifts;
};

// Frequency-resolved weak-coupling generator data.  Whenever blocks at
// +omega and -omega are both present (omega = 0 pairs with itself) their
// operators must be adjoint pairs, A_alpha(-omega) = A_alpha(omega)^dagger.
class BornMarkovSpec {
 public:
  explicit BornMarkovSpec(std::vector<FrequencyBlock> blocks);

  const std::vector<FrequencyBlock>& blocks() const { return blocks_; }
  int dim() const { return dim_; }

  // sum_{omega,a,b} S_ab(omega) A_a^dag(omega) A_b(omega), the operator whose
  // commutator supplies the coherent part of the drift.
  const Matrix& shift_operator() const { return shift_op_; }
  // Same contraction against the rate tables; its anticommutator damps.
  const Matrix& damping_operator() const { return damping_op_; }

 private:
  std::vector<FrequencyBlock> blocks_;
  Matrix shift_op_;
  Matrix damping_op_;
  int dim_ = 0;
};

// Bose occupation 1/(e^{beta omega} - 1), evaluated stably.
double thermal_occupation(double beta, double omega);

// Radiative damping rate (4 omega^3 / 3)[1 + N(omega)] on either sign of
// omega.  The two signs satisfy rate(-omega) = e^{-beta omega} rate(omega),
// and beta may be infinite (zero-temperature limit).
double radiative_rate(double beta, double omega);

// Dipole-type spec builder: one entry per positive transition frequency.
// Each entry contributes the block at +omega with the given operators and
// the adjoint block at -omega, both with scalar-diagonal rate and shift
// tables; shift may be empty (treated as zero).
BornMarkovSpec quantum_optical_spec(
    double beta, const std::vector<std::pair<double, std::vector<Matrix>>>& channels,
    const std::function<double(double)>& shift = {});

// Order-n weak-coupling drift, one state per slot.  At order 1 this is the
// Lindblad right-hand side of the spec (sandwich terms included); at higher
// orders the sandwich is replaced by the cyclically adjacent cross terms
// rho_l A_a^dag(omega) (x) A_b(omega) rho_{l+1}.
PairTensor born_markov_generator(const BornMarkovSpec& spec, const std::vector<Matrix>& slots);

// High-temperature quantum Brownian motion on a truncated oscillator basis
// with unit reference frequency: x = (a + a^dag)/sqrt(2m) and
// p = i sqrt(m/2)(a^dag - a).  The dissipative generator acts alone unless
// include_free is set, in which case each slot also gets -i[p^2/2m, rho].
struct CaldeiraLeggettSpec {
  double mass = 1.0;
  double damping = 0.0;
  double kT = 0.0;
  int dim = 0;
  bool include_free = false;
  Matrix x;
  Matrix p;
  Matrix h_free;

  CaldeiraLeggettSpec(double m, double g, double kt, int d, bool free_motion = false);
};

PairTensor caldeira_leggett_generator(const CaldeiraLeggettSpec& spec,
                                      const std::vector<Matrix>& slots);

// Monatomic gas environment with an isotropic Gaussian momentum distribution
// (spread sigma per axis) and squared scattering amplitude |f(k_out, k_in)|^2.
struct GasModel {
  double density = 1.0;
  double mass = 1.0;
  double sigma = 1.0;
  std::function<double(const Eigen::Vector3d&, const Eigen::Vector3d&)> amplitude2;
};

// Localization rate F(r) by product quadrature: Gauss-Legendre radial nodes
// against the Gaussian weight, and Gauss-Legendre-in-cos(theta) times
// uniform-phi direction sets for the incoming momentum and the scattering
// direction.  angular_order L places L polar times 2L azimuthal nodes on
// each sphere.  F(0) = 0 and Re F >= 0.
Cx localization_rate(const GasModel& gas, const Eigen::Vector3d& r, int radial_order = 24,
                     int angular_order = 12);

// Large-separation limit of F: the total scattering rate
// N int mu(k) (|k|/m) int dn |f|^2, real and nonnegative.
double localization_plateau(const GasModel& gas, int radial_order = 24, int angular_order = 12);

// Kernel table on a position grid, table(a, b) = F(R_a - R_b).
struct LocalizationKernel {
  std::vector<Eigen::Vector3d> grid;
  Matrix table;
};

LocalizationKernel localization_kernel(const GasModel& gas,
                                       const std::vector<Eigen::Vector3d>& grid,
                                       int radial_order = 24, int angular_order = 12);

// Decay exponent sum_l F(R_{l+1} - R'_l) of one tensor entry, slot n+1
// identified with slot 1.  idx holds grid indices (i1, j1, ..., in, jn).
Cx localization_exponent(const LocalizationKernel& kernel, std::span<const int> idx);

// Closed-form evolution: each entry of rho0 is multiplied by
// exp(-t * localization_exponent).  The tensor dimension must equal the
// kernel's grid size.
PairTensor collisional_evolve(const PairTensor& rho0, const LocalizationKernel& kernel,
                              double t);

// Coupled drift of the closed order-1 state and one driven order-n tensor.
// Both callbacks see the same order-1 state.
struct HierarchyGenerator {
  std::function<Matrix(const Matrix&)> order1;
  std::function<PairTensor(const Matrix&)> ordern;
};

HierarchyGenerator make_generator(const BornMarkovSpec& spec, int order);
HierarchyGenerator make_generator(const CaldeiraLeggettSpec& spec, int order);

struct HierarchyRun {
  std::vector<double> times;
  std::vector<Matrix> rho1;
  std::vector<PairTensor> rhon;
  // Max final-time entry difference against a half-step rerun; zero unless
  // requested.
  double step_halving_error = 0.0;
};

// Classical fixed-step fourth-order Runge-Kutta on the pair (rho1, rhon),
// recording every record_every steps (initial and final points always kept).
HierarchyRun integrate_hierarchy(const HierarchyGenerator& gen, const Matrix& rho1_0,
                                 const PairTensor& rhon_0, double dt, int steps,
                                 int record_every = 1, bool estimate_error = false);

}  // namespace noisetensor::master
