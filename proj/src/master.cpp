#include "noisetensor/master.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace noisetensor::master {

namespace {

constexpr double kSpecTol = 1e-10;

void check_rate_table(const Matrix& rates, int channels, const char* what) {
  if (rates.rows() != channels || rates.cols() != channels)
    throw std::invalid_argument(std::string(what) + ": table size must match operator count");
  if (hermiticity_defect(rates) > kSpecTol)
    throw std::invalid_argument(std::string(what) + ": table must be Hermitian");
}

// Accumulates weight * (x) factors into the tensor, one matrix per slot.
void add_slot_product(PairTensor& out, const std::vector<const Matrix*>& factors, Cx weight) {
  const int n = out.order();
  detail::for_each_multi_index(2 * n, out.dim(), [&](std::span<const int> idx, std::size_t flat) {
    Cx v = weight;
    for (int s = 0; s < n; ++s)
      v *= (*factors[s])(idx[static_cast<std::size_t>(2 * s)],
                         idx[static_cast<std::size_t>(2 * s + 1)]);
    out[flat] += v;
  });
}

void check_slots(const std::vector<Matrix>& slots, int dim) {
  if (slots.empty()) throw std::invalid_argument("generator needs at least one slot state");
  for (const Matrix& s : slots)
    if (s.rows() != dim || s.cols() != dim)
      throw std::invalid_argument("slot state dimension mismatch");
}

}  // namespace

BornMarkovSpec::BornMarkovSpec(std::vector<FrequencyBlock> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw std::invalid_argument("spec needs at least one frequency block");
  for (const FrequencyBlock& b : blocks_) {
    if (b.ops.empty()) throw std::invalid_argument("frequency block has no operators");
    for (const Matrix& a : b.ops) {
      if (a.rows() != a.cols() || a.rows() < 1)
        throw std::invalid_argument("coupling operators must be square");
      if (dim_ == 0) dim_ = static_cast<int>(a.rows());
      if (a.rows() != dim_) throw std::invalid_argument("coupling operator dimension mismatch");
    }
    const int k = static_cast<int>(b.ops.size());
    check_rate_table(b.rates, k, "rate table");
    check_rate_table(b.shifts, k, "shift table");
    Eigen::SelfAdjointEigenSolver<Matrix> es(b.rates, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kSpecTol)
      throw std::invalid_argument("rate table must be positive semidefinite");
  }
  // Opposite-frequency blocks must carry adjoint operator sets; a block at
  // zero frequency pairs with itself.
  for (std::size_t a = 0; a < blocks_.size(); ++a) {
    for (std::size_t b = a; b < blocks_.size(); ++b) {
      const double scale = std::max(1.0, std::abs(blocks_[a].omega));
      if (std::abs(blocks_[a].omega + blocks_[b].omega) > 1e-12 * scale) continue;
      if (blocks_[a].ops.size() != blocks_[b].ops.size())
        throw std::invalid_argument("opposite-frequency blocks must pair operators one-to-one");
      for (std::size_t q = 0; q < blocks_[a].ops.size(); ++q)
        if (max_abs(blocks_[a].ops[q] - blocks_[b].ops[q].adjoint()) > kSpecTol)
          throw std::invalid_argument(
              "operators at -omega must be the adjoints of the operators at +omega");
    }
  }
  shift_op_ = Matrix::Zero(dim_, dim_);
  damping_op_ = Matrix::Zero(dim_, dim_);
  for (const FrequencyBlock& b : blocks_) {
    const int k = static_cast<int>(b.ops.size());
    for (int al = 0; al < k; ++al)
      for (int be = 0; be < k; ++be) {
        const Matrix prod = b.ops[static_cast<std::size_t>(al)].adjoint() *
                            b.ops[static_cast<std::size_t>(be)];
        shift_op_ += b.shifts(al, be) * prod;
        damping_op_ += b.rates(al, be) * prod;
      }
  }
}

double thermal_occupation(double beta, double omega) {
  if (!(beta > 0.0)) throw std::invalid_argument("inverse temperature must be positive");
  const double arg = beta * omega;
  if (arg > 700.0) return 0.0;
  return 1.0 / std::expm1(arg);
}

double radiative_rate(double beta, double omega) {
  if (!(beta > 0.0)) throw std::invalid_argument("inverse temperature must be positive");
  if (omega == 0.0) return 0.0;
  const double w = std::abs(omega);
  const double cube = 4.0 * w * w * w / 3.0;
  // omega > 0: (4w^3/3)(1 + N) = cube / (1 - e^{-beta w});
  // omega < 0: (4w^3/3) N     = cube / (e^{beta w} - 1).
  if (omega > 0.0) return cube / -std::expm1(-beta * w);
  const double grow = std::expm1(beta * w);
  return std::isinf(grow) ? 0.0 : cube / grow;
}

BornMarkovSpec quantum_optical_spec(
    double beta, const std::vector<std::pair<double, std::vector<Matrix>>>& channels,
    const std::function<double(double)>& shift) {
  if (channels.empty()) throw std::invalid_argument("no transition channels given");
  std::vector<FrequencyBlock> blocks;
  blocks.reserve(2 * channels.size());
  for (const auto& [omega, ops] : channels) {
    if (!(omega > 0.0)) throw std::invalid_argument("transition frequencies must be positive");
    const int k = static_cast<int>(ops.size());
    std::vector<Matrix> adj(ops.size());
    for (std::size_t q = 0; q < ops.size(); ++q) adj[q] = ops[q].adjoint();
    const Matrix eye = Matrix::Identity(k, k);
    const double s_plus = shift ? shift(omega) : 0.0;
    const double s_minus = shift ? shift(-omega) : 0.0;
    blocks.push_back({omega, ops, radiative_rate(beta, omega) * eye, s_plus * eye});
    blocks.push_back({-omega, std::move(adj), radiative_rate(beta, -omega) * eye, s_minus * eye});
  }
  return BornMarkovSpec(std::move(blocks));
}

PairTensor born_markov_generator(const BornMarkovSpec& spec, const std::vector<Matrix>& slots) {
  const int d = spec.dim();
  check_slots(slots, d);
  const int n = static_cast<int>(slots.size());
  PairTensor out(n, d, Flavor::quantum);
  const Cx im(0.0, 1.0);
  const Matrix& big_l = spec.shift_operator();
  const Matrix& big_m = spec.damping_operator();

  std::vector<const Matrix*> factors(static_cast<std::size_t>(n));
  auto base_factors = [&] {
    for (int s = 0; s < n; ++s) factors[static_cast<std::size_t>(s)] = &slots[static_cast<std::size_t>(s)];
  };

  // Per-slot part: i[rho, L] - (1/2){M, rho}, plus the sandwich at order 1
  // where no adjacent partner exists.
  for (int l = 0; l < n; ++l) {
    const Matrix& rho = slots[static_cast<std::size_t>(l)];
    Matrix single = im * (rho * big_l - big_l * rho) - 0.5 * (big_m * rho + rho * big_m);
    if (n == 1) {
      for (const FrequencyBlock& b : spec.blocks()) {
        const int k = static_cast<int>(b.ops.size());
        for (int al = 0; al < k; ++al)
          for (int be = 0; be < k; ++be)
            single += b.rates(al, be) * b.ops[static_cast<std::size_t>(be)] * rho *
                      b.ops[static_cast<std::size_t>(al)].adjoint();
      }
    }
    base_factors();
    factors[static_cast<std::size_t>(l)] = &single;
    add_slot_product(out, factors, Cx(1.0, 0.0));
  }

  // Cyclically adjacent cross part, slot n + 1 identified with slot 1:
  // gamma_ab(omega) rho_l A_a^dag(omega) (x) A_b(omega) rho_{l+1}.
  if (n >= 2) {
    for (const FrequencyBlock& b : spec.blocks()) {
      const int k = static_cast<int>(b.ops.size());
      for (int al = 0; al < k; ++al)
        for (int be = 0; be < k; ++be) {
          const Cx g = b.rates(al, be);
          if (std::abs(g) == 0.0) continue;
          for (int l = 0; l < n; ++l) {
            const int r = (l + 1) % n;
            const Matrix left =
                slots[static_cast<std::size_t>(l)] * b.ops[static_cast<std::size_t>(al)].adjoint();
            const Matrix right =
                b.ops[static_cast<std::size_t>(be)] * slots[static_cast<std::size_t>(r)];
            base_factors();
            factors[static_cast<std::size_t>(l)] = &left;
            factors[static_cast<std::size_t>(r)] = &right;
            add_slot_product(out, factors, g);
          }
        }
    }
  }
  return out;
}

CaldeiraLeggettSpec::CaldeiraLeggettSpec(double m, double g, double kt, int d, bool free_motion)
    : mass(m), damping(g), kT(kt), dim(d), include_free(free_motion) {
  if (!(m > 0.0)) throw std::invalid_argument("mass must be positive");
  if (kt < 0.0) throw std::invalid_argument("temperature must be nonnegative");
  if (d < 4) throw std::invalid_argument("oscillator truncation needs at least four levels");
  Matrix a = Matrix::Zero(d, d);
  for (int q = 1; q < d; ++q) a(q - 1, q) = std::sqrt(static_cast<double>(q));
  const Matrix ad = a.adjoint();
  x = (a + ad) / std::sqrt(2.0 * m);
  p = Cx(0.0, 1.0) * std::sqrt(m / 2.0) * (ad - a);
  h_free = p * p / (2.0 * m);
}

PairTensor caldeira_leggett_generator(const CaldeiraLeggettSpec& spec,
                                      const std::vector<Matrix>& slots) {
  check_slots(slots, spec.dim);
  const int n = static_cast<int>(slots.size());
  const Cx im(0.0, 1.0);
  const double diff = 2.0 * spec.mass * spec.damping * spec.kT;
  const Matrix& x = spec.x;
  const Matrix& p = spec.p;

  if (n == 1) {
    const Matrix& rho = slots[0];
    Matrix g = -im * spec.damping * commutator(x, anticommutator(p, rho)) -
               diff * commutator(x, commutator(x, rho));
    if (spec.include_free) g -= im * commutator(spec.h_free, rho);
    return from_matrix(g, Flavor::quantum);
  }

  PairTensor out(n, spec.dim, Flavor::quantum);
  const Matrix xx = x * x;
  std::vector<const Matrix*> factors(static_cast<std::size_t>(n));
  auto base_factors = [&] {
    for (int s = 0; s < n; ++s) factors[static_cast<std::size_t>(s)] = &slots[static_cast<std::size_t>(s)];
  };

  for (int l = 0; l < n; ++l) {
    const Matrix& rho = slots[static_cast<std::size_t>(l)];
    Matrix single = -diff * anticommutator(xx, rho) + im * spec.damping * (rho * p * x - x * p * rho);
    if (spec.include_free) single -= im * commutator(spec.h_free, rho);
    base_factors();
    factors[static_cast<std::size_t>(l)] = &single;
    add_slot_product(out, factors, Cx(1.0, 0.0));
  }

  // Adjacent cross part: 2 diff rho_l x (x) x rho_{l+1}
  //                      + i gamma [rho_l x (x) p rho_{l+1} - rho_l p (x) x rho_{l+1}].
  for (int l = 0; l < n; ++l) {
    const int r = (l + 1) % n;
    const Matrix rho_x = slots[static_cast<std::size_t>(l)] * x;
    const Matrix rho_p = slots[static_cast<std::size_t>(l)] * p;
    const Matrix x_rho = x * slots[static_cast<std::size_t>(r)];
    const Matrix p_rho = p * slots[static_cast<std::size_t>(r)];

    base_factors();
    factors[static_cast<std::size_t>(l)] = &rho_x;
    factors[static_cast<std::size_t>(r)] = &x_rho;
    add_slot_product(out, factors, Cx(2.0 * diff, 0.0));

    factors[static_cast<std::size_t>(l)] = &rho_x;
    factors[static_cast<std::size_t>(r)] = &p_rho;
    add_slot_product(out, factors, im * spec.damping);

    factors[static_cast<std::size_t>(l)] = &rho_p;
    factors[static_cast<std::size_t>(r)] = &x_rho;
    add_slot_product(out, factors, -im * spec.damping);
  }
  return out;
}

namespace {

// Nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double deriv = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      deriv = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / deriv;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[static_cast<std::size_t>(i)] = -z;
    x[static_cast<std::size_t>(n - 1 - i)] = z;
    w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(n - 1 - i)] =
        2.0 / ((1.0 - z * z) * deriv * deriv);
  }
  return {std::move(x), std::move(w)};
}

struct DirectionSet {
  std::vector<Eigen::Vector3d> u;
  std::vector<double> w;  // sums to 4 pi
};

DirectionSet sphere_directions(int order) {
  auto [cz, cw] = gauss_legendre(order);
  const int m = 2 * order;
  DirectionSet dirs;
  dirs.u.reserve(static_cast<std::size_t>(order * m));
  dirs.w.reserve(static_cast<std::size_t>(order * m));
  for (int a = 0; a < order; ++a) {
    const double ct = cz[static_cast<std::size_t>(a)];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int b = 0; b < m; ++b) {
      const double phi = 2.0 * M_PI * (static_cast<double>(b) + 0.5) / static_cast<double>(m);
      dirs.u.emplace_back(st * std::cos(phi), st * std::sin(phi), ct);
      dirs.w.push_back(cw[static_cast<std::size_t>(a)] * 2.0 * M_PI / static_cast<double>(m));
    }
  }
  return dirs;
}

void check_gas(const GasModel& gas, int radial_order, int angular_order) {
  if (!(gas.density > 0.0) || !(gas.mass > 0.0) || !(gas.sigma > 0.0))
    throw std::invalid_argument("gas density, mass, and momentum spread must be positive");
  if (!gas.amplitude2) throw std::invalid_argument("gas model needs a squared amplitude");
  if (radial_order < 2 || angular_order < 2)
    throw std::invalid_argument("quadrature orders must be at least 2");
}

}  // namespace

Cx localization_rate(const GasModel& gas, const Eigen::Vector3d& r, int radial_order,
                     int angular_order) {
  check_gas(gas, radial_order, angular_order);
  auto [gx, gw] = gauss_legendre(radial_order);
  const DirectionSet dirs = sphere_directions(angular_order);
  const std::size_t nd = dirs.u.size();
  const double sigma2 = gas.sigma * gas.sigma;
  const double kmax = 8.0 * gas.sigma;
  const double norm = std::pow(2.0 * M_PI * sigma2, -1.5);

  std::vector<double> dot(nd);
  for (std::size_t b = 0; b < nd; ++b) dot[b] = dirs.u[b].dot(r);

  std::vector<Cx> phase(nd);
  Cx total(0.0, 0.0);
  for (int q = 0; q < radial_order; ++q) {
    const double k = 0.5 * kmax * (gx[static_cast<std::size_t>(q)] + 1.0);
    const double wk = 0.5 * kmax * gw[static_cast<std::size_t>(q)];
    const double radial = wk * k * k * norm * std::exp(-0.5 * k * k / sigma2) * (k / gas.mass);
    for (std::size_t b = 0; b < nd; ++b) phase[b] = std::exp(Cx(0.0, -k * dot[b]));
    for (std::size_t a = 0; a < nd; ++a) {
      const Eigen::Vector3d kin = k * dirs.u[a];
      const Cx incoming = std::conj(phase[a]);  // e^{i k_in . r}
      Cx inner(0.0, 0.0);
      for (std::size_t b = 0; b < nd; ++b) {
        const double f2 = gas.amplitude2(k * dirs.u[b], kin);
        inner += dirs.w[b] * f2 * (Cx(1.0, 0.0) - incoming * phase[b]);
      }
      total += radial * dirs.w[a] * inner;
    }
  }
  return gas.density * total;
}

double localization_plateau(const GasModel& gas, int radial_order, int angular_order) {
  check_gas(gas, radial_order, angular_order);
  auto [gx, gw] = gauss_legendre(radial_order);
  const DirectionSet dirs = sphere_directions(angular_order);
  const std::size_t nd = dirs.u.size();
  const double sigma2 = gas.sigma * gas.sigma;
  const double kmax = 8.0 * gas.sigma;
  const double norm = std::pow(2.0 * M_PI * sigma2, -1.5);

  double total = 0.0;
  for (int q = 0; q < radial_order; ++q) {
    const double k = 0.5 * kmax * (gx[static_cast<std::size_t>(q)] + 1.0);
    const double wk = 0.5 * kmax * gw[static_cast<std::size_t>(q)];
    const double radial = wk * k * k * norm * std::exp(-0.5 * k * k / sigma2) * (k / gas.mass);
    for (std::size_t a = 0; a < nd; ++a) {
      const Eigen::Vector3d kin = k * dirs.u[a];
      double inner = 0.0;
      for (std::size_t b = 0; b < nd; ++b) inner += dirs.w[b] * gas.amplitude2(k * dirs.u[b], kin);
      total += radial * dirs.w[a] * inner;
    }
  }
  return gas.density * total;
}

LocalizationKernel localization_kernel(const GasModel& gas,
                                       const std::vector<Eigen::Vector3d>& grid,
                                       int radial_order, int angular_order) {
  if (grid.empty()) throw std::invalid_argument("position grid is empty");
  const int g = static_cast<int>(grid.size());
  LocalizationKernel kernel{grid, Matrix::Zero(g, g)};
  // F(-r) is the conjugate of F(r) for a real squared amplitude, so only the
  // upper triangle is quadratured.
  for (int a = 0; a < g; ++a)
    for (int b = a + 1; b < g; ++b) {
      const Cx f = localization_rate(gas, grid[static_cast<std::size_t>(a)] -
                                              grid[static_cast<std::size_t>(b)],
                                     radial_order, angular_order);
      kernel.table(a, b) = f;
      kernel.table(b, a) = std::conj(f);
    }
  return kernel;
}

Cx localization_exponent(const LocalizationKernel& kernel, std::span<const int> idx) {
  if (idx.size() < 2 || idx.size() % 2 != 0)
    throw std::invalid_argument("index list must hold pairs");
  const int n = static_cast<int>(idx.size() / 2);
  const int g = static_cast<int>(kernel.grid.size());
  Cx e(0.0, 0.0);
  for (int l = 0; l < n; ++l) {
    const int row = idx[static_cast<std::size_t>(2 * ((l + 1) % n))];
    const int col = idx[static_cast<std::size_t>(2 * l + 1)];
    if (row < 0 || row >= g || col < 0 || col >= g)
      throw std::out_of_range("grid index out of range");
    e += kernel.table(row, col);
  }
  return e;
}

PairTensor collisional_evolve(const PairTensor& rho0, const LocalizationKernel& kernel,
                              double t) {
  const int g = static_cast<int>(kernel.grid.size());
  if (kernel.table.rows() != g || kernel.table.cols() != g)
    throw std::invalid_argument("kernel table does not match its grid");
  if (rho0.dim() != g)
    throw std::invalid_argument("tensor dimension does not match the kernel grid");
  PairTensor out(rho0.order(), g, rho0.flavor());
  detail::for_each_multi_index(
      2 * rho0.order(), g, [&](std::span<const int> idx, std::size_t flat) {
        out[flat] = rho0[flat] * std::exp(-t * localization_exponent(kernel, idx));
      });
  return out;
}

HierarchyGenerator make_generator(const BornMarkovSpec& spec, int order) {
  if (order < 1) throw std::invalid_argument("hierarchy order must be at least 1");
  return {
      [spec](const Matrix& rho) { return to_matrix(born_markov_generator(spec, {rho})); },
      [spec, order](const Matrix& rho) {
        return born_markov_generator(spec, std::vector<Matrix>(static_cast<std::size_t>(order), rho));
      },
  };
}

HierarchyGenerator make_generator(const CaldeiraLeggettSpec& spec, int order) {
  if (order < 1) throw std::invalid_argument("hierarchy order must be at least 1");
  return {
      [spec](const Matrix& rho) { return to_matrix(caldeira_leggett_generator(spec, {rho})); },
      [spec, order](const Matrix& rho) {
        return caldeira_leggett_generator(spec,
                                          std::vector<Matrix>(static_cast<std::size_t>(order), rho));
      },
  };
}

HierarchyRun integrate_hierarchy(const HierarchyGenerator& gen, const Matrix& rho1_0,
                                 const PairTensor& rhon_0, double dt, int steps,
                                 int record_every, bool estimate_error) {
  if (!gen.order1 || !gen.ordern) throw std::invalid_argument("generator callbacks must be set");
  if (!(dt > 0.0)) throw std::invalid_argument("step size must be positive");
  if (steps < 1) throw std::invalid_argument("need at least one step");
  if (record_every < 1) throw std::invalid_argument("record interval must be positive");

  auto axpy = [](PairTensor& acc, const PairTensor& k, double c) {
    PairTensor scaled = k;
    scaled *= Cx(c, 0.0);
    acc += scaled;
  };

  auto advance = [&](Matrix& m, PairTensor& t, double h) {
    const Matrix k1m = gen.order1(m);
    const PairTensor k1t = gen.ordern(m);
    const Matrix m2 = m + 0.5 * h * k1m;
    const Matrix k2m = gen.order1(m2);
    const PairTensor k2t = gen.ordern(m2);
    const Matrix m3 = m + 0.5 * h * k2m;
    const Matrix k3m = gen.order1(m3);
    const PairTensor k3t = gen.ordern(m3);
    const Matrix m4 = m + h * k3m;
    const Matrix k4m = gen.order1(m4);
    const PairTensor k4t = gen.ordern(m4);
    m += (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
    axpy(t, k1t, h / 6.0);
    axpy(t, k2t, h / 3.0);
    axpy(t, k3t, h / 3.0);
    axpy(t, k4t, h / 6.0);
  };

  HierarchyRun run;
  Matrix m = rho1_0;
  PairTensor t = rhon_0;
  run.times.push_back(0.0);
  run.rho1.push_back(m);
  run.rhon.push_back(t);
  for (int s = 1; s <= steps; ++s) {
    advance(m, t, dt);
    if (s % record_every == 0 || s == steps) {
      run.times.push_back(dt * static_cast<double>(s));
      run.rho1.push_back(m);
      run.rhon.push_back(t);
    }
  }

  if (estimate_error) {
    Matrix mh = rho1_0;
    PairTensor th = rhon_0;
    for (int s = 0; s < 2 * steps; ++s) advance(mh, th, 0.5 * dt);
    run.step_halving_error = std::max(max_abs(m - mh), max_abs_diff(t, th));
  }
  return run;
}

}  // namespace noisetensor::master
