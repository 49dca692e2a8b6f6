#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>

#include "noisetensor/bipartite.hpp"
#include "test_util.hpp"

using namespace noisetensor;
using qt::BipartiteState;
using qt::WeightedStateFamily;

namespace {

Matrix random_density(RngStream& rng, int d) {
  const Matrix r = ntt::random_matrix(rng, d);
  const Matrix m = r * r.adjoint();
  return m / m.trace();
}

Matrix random_pure_density(RngStream& rng, int d) {
  return pure_density(ntt::random_state(rng, d));
}

BipartiteState bell_state() {
  Vector psi = Vector::Zero(4);
  psi(0) = psi(3) = 1.0 / std::sqrt(2.0);
  return qt::pure_bipartite(2, 2, psi);
}

BipartiteState random_pure(RngStream& rng, int d_env, int d_sys) {
  return qt::pure_bipartite(d_env, d_sys, ntt::random_state(rng, d_env * d_sys));
}

// Oscillator ladder fixtures in a truncated number basis.
Matrix lowering(int d) {
  Matrix a = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Matrix position_op(int d) {
  const Matrix a = lowering(d);
  return (a + a.adjoint()) / std::sqrt(2.0);
}

Matrix momentum_op(int d) {
  const Matrix a = lowering(d);
  return Cx(0, 1) * (a.adjoint() - a) / std::sqrt(2.0);
}

// Variance growth rate from exact unitary evolution of the composite state,
// by central difference.
double unitary_variance_rate(const BipartiteState& s, const Matrix& h_total,
                             const Matrix& a_full, double dt) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(h_total);
  const auto var_at = [&](double t) {
    const Matrix u = es.eigenvectors() *
                     (Cx(0, -t) * es.eigenvalues().array()).exp().matrix().asDiagonal() *
                     es.eigenvectors().adjoint();
    const Matrix rho_t = u * s.rho * u.adjoint();
    const Cx mean = (rho_t * a_full).trace();
    return ((rho_t * a_full * a_full).trace() - mean * mean).real();
  };
  return (var_at(dt) - var_at(-dt)) / (2.0 * dt);
}

}  // namespace

TEST_CASE("state validation") {
  CHECK_NOTHROW(bell_state());

  Matrix bad = Matrix::Identity(4, 4) / 4.0;
  bad(0, 1) = Cx(0.2, 0.0);
  CHECK_THROWS_AS(BipartiteState(2, 2, bad, false), std::invalid_argument);

  CHECK_THROWS_AS(BipartiteState(2, 2, Matrix(Matrix::Identity(4, 4) / 2.0), false),
                  std::invalid_argument);

  Matrix indefinite = Matrix::Zero(4, 4);
  indefinite(0, 0) = 1.5;
  indefinite(1, 1) = -0.5;
  CHECK_THROWS_AS(BipartiteState(2, 2, indefinite, false), std::invalid_argument);

  CHECK_THROWS_AS(BipartiteState(2, 2, Matrix(Matrix::Identity(4, 4) / 4.0), true),
                  std::invalid_argument);
  CHECK_NOTHROW(BipartiteState(2, 2, Matrix(Matrix::Identity(4, 4) / 4.0), false));

  Vector unnormalized = Vector::Ones(4);
  CHECK_THROWS_AS(qt::pure_bipartite(2, 2, unnormalized), std::invalid_argument);
  CHECK_THROWS_AS(qt::pure_bipartite(3, 2, Vector(Vector::Ones(4) / 2.0)),
                  std::invalid_argument);
}

TEST_CASE("system blocks: product factorization, Bell projector, Hermiticity") {
  RngStream rng(501, 0);
  const Matrix rho_env = random_density(rng, 3);
  const Matrix rho_sys = random_density(rng, 2);
  const BipartiteState prod = qt::product_state(rho_env, rho_sys);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(max_abs(Matrix(qt::system_block(prod, i, j) - rho_sys(i, j) * rho_env)) < 1e-14);

  const BipartiteState bell = bell_state();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const Matrix block = qt::system_block(bell, i, j);
      for (int e1 = 0; e1 < 2; ++e1)
        for (int e2 = 0; e2 < 2; ++e2) {
          const double want = (e1 == i && e2 == j) ? 0.5 : 0.0;
          CHECK(std::abs(block(e1, e2) - want) < 1e-14);
        }
    }

  const BipartiteState s = random_pure(rng, 3, 3);
  Matrix diag_sum = Matrix::Zero(3, 3);
  for (int i = 0; i < 3; ++i) {
    diag_sum += qt::system_block(s, i, i);
    for (int j = 0; j < 3; ++j)
      CHECK(max_abs(Matrix(qt::system_block(s, j, i) -
                           qt::system_block(s, i, j).adjoint())) < 1e-14);
  }
  CHECK(max_abs(Matrix(diag_sum - qt::reduced_environment(s))) < 1e-14);

  CHECK_THROWS_AS(qt::system_block(s, 0, 3), std::out_of_range);
  CHECK_THROWS_AS(qt::system_block(s, -1, 0), std::out_of_range);
}

TEST_CASE("trace tensor closed forms") {
  const BipartiteState bell = bell_state();

  const PairTensor t1 = qt::trace_tensor(bell, 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(t1.at({i, j}) - (i == j ? 0.5 : 0.0)) < 1e-14);

  const PairTensor t2 = qt::trace_tensor(bell, 2);
  CHECK(t2.flavor() == Flavor::quantum);
  detail::for_each_multi_index(4, 2, [&](std::span<const int> idx, std::size_t flat) {
    const double want = (idx[0] == idx[3] && idx[1] == idx[2]) ? 0.25 : 0.0;
    CHECK(std::abs(t2[flat] - want) < 1e-14);
  });

  // Pure product states factorize at every order.
  RngStream rng(502, 0);
  const Matrix rho_sys = random_pure_density(rng, 2);
  const BipartiteState prod = qt::product_state(random_pure_density(rng, 3), rho_sys);
  REQUIRE(prod.pure);
  const PairTensor t3 = qt::trace_tensor(prod, 3);
  detail::for_each_multi_index(6, 2, [&](std::span<const int> idx, std::size_t flat) {
    const Cx want = rho_sys(idx[0], idx[1]) * rho_sys(idx[2], idx[3]) * rho_sys(idx[4], idx[5]);
    CHECK(std::abs(t3[flat] - want) < 1e-13);
  });

  // Order 1 is the reduced system matrix for any state.
  const BipartiteState s = random_pure(rng, 3, 3);
  const PairTensor r1 = qt::trace_tensor(s, 1);
  const Matrix red = qt::reduced_system(s);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(r1.at({i, j}) - red(i, j)) < 1e-13);

  CHECK_THROWS_AS(qt::trace_tensor(bell, 0), std::invalid_argument);
  CHECK_THROWS(qt::trace_tensor(bell, 14));
}

TEST_CASE("cyclic symmetry without full permutation symmetry") {
  RngStream rng(503, 0);
  double worst_swap = 0.0;
  for (int rep = 0; rep < 6; ++rep) {
    const int d_env = rep % 2 == 0 ? 2 : 4;
    const int d_sys = rep % 3 == 0 ? 3 : 2;
    const BipartiteState s = random_pure(rng, d_env, d_sys);
    const PairTensor t3 = qt::trace_tensor(s, 3);

    const std::array<int, 3> cyc = {1, 2, 0};
    CHECK(max_abs_diff(permute_pairs(t3, cyc), t3) < 1e-12);
    CHECK(symmetry_defect(t3) < 1e-12);
    CHECK(hermiticity_defect(t3) < 1e-12);

    const std::array<int, 3> swap01 = {1, 0, 2};
    worst_swap = std::max(worst_swap, max_abs_diff(permute_pairs(t3, swap01), t3));

    // Cyclic symmetry splits the order-3 tensor into a fully symmetric and a
    // fully antisymmetric summand.
    const PairTensor sym = symmetric_part(t3);
    const PairTensor anti = antisymmetric_part(t3);
    PairTensor sum = sym;
    sum += anti;
    CHECK(max_abs_diff(sum, t3) < 1e-12);
    CHECK(max_abs_diff(permute_pairs(sym, swap01), sym) < 1e-12);
    PairTensor neg = permute_pairs(anti, swap01);
    neg *= Cx(-1, 0);
    CHECK(max_abs_diff(neg, anti) < 1e-12);
  }
  CHECK(worst_swap > 1e-4);
}

TEST_CASE("adjacent chain contraction descends for pure states") {
  RngStream rng(504, 0);
  for (int rep = 0; rep < 8; ++rep) {
    const int d_env = 2 + rep % 3;
    const int d_sys = 2 + (rep + 1) % 3;
    const BipartiteState s = random_pure(rng, d_env, d_sys);
    for (int order = 2; order <= 3; ++order) {
      const PairTensor t = qt::trace_tensor(s, order);
      const PairTensor lower = qt::trace_tensor(s, order - 1);
      for (int from = 1; from <= order; ++from)
        CHECK(max_abs_diff(contract_chain(t, from, from % order + 1), lower) < 1e-12);
    }
  }

  // Non-adjacent chain contraction is rejected for the quantum flavor.
  const BipartiteState s = random_pure(rng, 2, 2);
  const PairTensor t3 = qt::trace_tensor(s, 3);
  CHECK_THROWS_AS(contract_chain(t3, 1, 3), std::invalid_argument);

  // Descent needs rho^2 = rho: the maximally mixed composite misses by the
  // purity deficit.
  const BipartiteState mixed(2, 2, Matrix::Identity(4, 4) / 4.0, false);
  const PairTensor m2 = qt::trace_tensor(mixed, 2);
  const PairTensor m1 = qt::trace_tensor(mixed, 1);
  CHECK(max_abs_diff(contract_chain(m2, 1, 2), m1) > 0.1);
}

TEST_CASE("pair trace contraction inserts the environment marginal") {
  const BipartiteState bell = bell_state();
  const PairTensor t2 = qt::trace_tensor(bell, 2);
  const PairTensor traced = contract_trace(t2, 1);
  const PairTensor t1 = qt::trace_tensor(bell, 1);
  CHECK(max_abs_diff(traced, t1) > 0.2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(traced.at({i, j}) - (i == j ? 0.25 : 0.0)) < 1e-14);
}

TEST_CASE("mixed families and the classical variant") {
  RngStream rng(505, 0);
  const BipartiteState bell = bell_state();

  const WeightedStateFamily single({{1.0, bell}});
  CHECK(max_abs_diff(qt::mixed_trace_tensor(single, 2), qt::trace_tensor(bell, 2)) < 1e-14);

  // Orthogonal product members average at order 1.
  const Matrix e0 = random_pure_density(rng, 2);
  Matrix s0 = Matrix::Zero(2, 2), s1 = Matrix::Zero(2, 2);
  s0(0, 0) = 1.0;
  s1(1, 1) = 1.0;
  const WeightedStateFamily two(
      {{0.5, qt::product_state(e0, s0)}, {0.5, qt::product_state(e0, s1)}});
  const PairTensor avg = qt::mixed_trace_tensor(two, 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(avg.at({i, j}) - 0.5 * (s0(i, j) + s1(i, j))) < 1e-14);

  // The classical variant keeps only marginal information: on a Bell member
  // it gives the product of maximally mixed marginals.
  const WeightedStateFamily bf({{1.0, bell}});
  const PairTensor cl = qt::classical_variant(bf, 2);
  CHECK(cl.flavor() == Flavor::classical);
  detail::for_each_multi_index(4, 2, [&](std::span<const int> idx, std::size_t flat) {
    const double want = (idx[0] == idx[1] && idx[2] == idx[3]) ? 0.25 : 0.0;
    CHECK(std::abs(cl[flat] - want) < 1e-14);
  });
  CHECK(max_abs_diff(cl, qt::mixed_trace_tensor(bf, 2)) > 0.2);

  // Pure product members: both definitions coincide at every order.
  std::vector<WeightedStateFamily::Member> prods;
  prods.push_back({0.4, qt::product_state(random_pure_density(rng, 2),
                                          random_pure_density(rng, 2))});
  prods.push_back({0.6, qt::product_state(random_pure_density(rng, 2),
                                          random_pure_density(rng, 2))});
  const WeightedStateFamily pf(std::move(prods));
  for (int order = 1; order <= 3; ++order)
    CHECK(max_abs_diff(qt::classical_variant(pf, order),
                       qt::mixed_trace_tensor(pf, order)) < 1e-13);

  // At order 1 the two definitions are identical for any family.
  std::vector<WeightedStateFamily::Member> mix;
  mix.push_back({0.3, random_pure(rng, 2, 2)});
  mix.push_back({0.7, random_pure(rng, 2, 2)});
  const WeightedStateFamily mf(std::move(mix));
  CHECK(max_abs_diff(qt::classical_variant(mf, 1), qt::mixed_trace_tensor(mf, 1)) < 1e-14);
  CHECK(symmetry_defect(qt::classical_variant(mf, 3)) < 1e-12);

  CHECK_THROWS_AS(WeightedStateFamily({}), std::invalid_argument);
  CHECK_THROWS_AS(WeightedStateFamily({{0.5, bell}}), std::invalid_argument);
}

TEST_CASE("environment fluctuation: closed forms and the tensor contraction") {
  RngStream rng(506, 0);

  // Pure product states carry no environment fluctuation.
  for (int rep = 0; rep < 5; ++rep) {
    const BipartiteState prod = qt::product_state(random_pure_density(rng, 3),
                                                  random_pure_density(rng, 2));
    CHECK(std::abs(qt::environment_fluctuation(prod, ntt::random_hermitian(rng, 2))) < 1e-12);
  }

  const Matrix sigma3 = Matrix{{1.0, 0.0}, {0.0, -1.0}};
  CHECK(qt::environment_fluctuation(bell_state(), sigma3) == doctest::Approx(0.25).epsilon(1e-12));

  // Both expressions for the fluctuation agree on pure states: the direct
  // environment-operator form and the contraction of the order-3 symmetric
  // tensor with the order-2 tensor.
  for (int rep = 0; rep < 50; ++rep) {
    const int d_env = 2 + rep % 2;
    const int d_sys = 2 + (rep / 2) % 2;
    const BipartiteState s = random_pure(rng, d_env, d_sys);
    const Matrix a = ntt::random_hermitian(rng, d_sys);

    const double direct = qt::environment_fluctuation(s, a);
    CHECK(direct >= -1e-10);

    const PairTensor t3s = symmetric_part(qt::trace_tensor(s, 3));
    const PairTensor t2 = qt::trace_tensor(s, 2);
    Cx second = 0.0, first = 0.0;
    for (int i1 = 0; i1 < d_sys; ++i1)
      for (int i2 = 0; i2 < d_sys; ++i2)
        for (int j2 = 0; j2 < d_sys; ++j2) {
          first += a(j2, i2) * t2.at({i1, i1, i2, j2});
          for (int i3 = 0; i3 < d_sys; ++i3)
            for (int j3 = 0; j3 < d_sys; ++j3)
              second += a(j2, i2) * a(j3, i3) * t3s.at({i1, i1, i2, j2, i3, j3});
        }
    CHECK(std::abs(second.imag()) < 1e-12);
    CHECK(std::abs(direct - (second.real() - std::norm(first))) < 1e-10);
  }

  // Mixed input still yields the nonnegative direct variance.
  const BipartiteState mixed(2, 2, Matrix::Identity(4, 4) / 4.0, false);
  CHECK(qt::environment_fluctuation(mixed, sigma3) >= -1e-10);
}

TEST_CASE("pointer variance rate") {
  RngStream rng(507, 0);
  const Matrix sigma3 = Matrix{{1.0, 0.0}, {0.0, -1.0}};

  // Fully conserved observable: zero rate.
  {
    Matrix h_sys = Matrix::Zero(2, 2);
    h_sys(0, 0) = 0.7;
    h_sys(1, 1) = -0.3;
    const Matrix h_env = ntt::random_hermitian(rng, 2);
    Matrix p0 = Matrix::Zero(2, 2), p1 = Matrix::Zero(2, 2);
    p0(0, 0) = 1.0;
    p1(1, 1) = 1.0;
    const Matrix h_int = qt::env_major_kron(ntt::random_hermitian(rng, 2), p0) +
                         qt::env_major_kron(ntt::random_hermitian(rng, 2), p1);
    const BipartiteState s = random_pure(rng, 2, 2);
    CHECK(std::abs(qt::pointer_variance_rate(s, h_sys, h_env, h_int, sigma3)) < 1e-12);
  }

  // Free pointer: the rate reduces to the position-momentum covariance, and
  // a minimum-uncertainty state makes it vanish.
  {
    const int d = 20;
    const double mass = 3.0;
    const Matrix x = position_op(d), p = momentum_op(d);
    const Matrix h_sys = p * p / (2.0 * mass);

    Vector coherent(d);
    const double alpha = 1.0;
    double fact = 1.0;
    for (int n = 0; n < d; ++n) {
      coherent(n) = std::pow(alpha, n) / std::sqrt(fact);
      fact *= n + 1;
    }
    coherent.normalize();
    const BipartiteState cs = qt::pure_bipartite(1, d, coherent);
    const double rate = qt::pointer_variance_rate(cs, h_sys, Matrix::Zero(1, 1),
                                                  Matrix::Zero(d, d), x);
    CHECK(std::abs(rate) < 1e-6);

    // States supported well below the truncation edge obey the covariance
    // form and the Schwarz bound exactly.
    for (int rep = 0; rep < 10; ++rep) {
      Vector low = Vector::Zero(d);
      for (int n = 0; n < 8; ++n) low(n) = ntt::random_cx(rng);
      low.normalize();
      const BipartiteState s = qt::pure_bipartite(1, d, low);
      const double r = qt::pointer_variance_rate(s, h_sys, Matrix::Zero(1, 1),
                                                 Matrix::Zero(d, d), x);
      const Matrix r1 = qt::reduced_system(s);
      const double mx = (r1 * x).trace().real();
      const double mp = (r1 * p).trace().real();
      const double cov = (r1 * anticommutator(x, p)).trace().real() - 2.0 * mx * mp;
      CHECK(std::abs(r - cov / mass) < 1e-10);
      const double dx = std::sqrt((r1 * x * x).trace().real() - mx * mx);
      const double dp = std::sqrt((r1 * p * p).trace().real() - mp * mp);
      CHECK(std::abs(r) <= 2.0 / mass * dx * dp + 1e-10);
    }
  }

  // Random admissible models match the exact-unitary finite difference.
  for (int rep = 0; rep < 20; ++rep) {
    const int d_env = 3, d_sys = 3;
    const Matrix a = ntt::random_hermitian(rng, d_sys);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    Matrix h_int = Matrix::Zero(d_env * d_sys, d_env * d_sys);
    for (int k = 0; k < d_sys; ++k) {
      const Vector v = es.eigenvectors().col(k);
      h_int += qt::env_major_kron(ntt::random_hermitian(rng, d_env), pure_density(v));
    }
    const Matrix h_sys = ntt::random_hermitian(rng, d_sys);
    const Matrix h_env = ntt::random_hermitian(rng, d_env);
    const BipartiteState s = random_pure(rng, d_env, d_sys);

    const double rate = qt::pointer_variance_rate(s, h_sys, h_env, h_int, a);
    const Matrix h_total = qt::env_major_kron(h_env, Matrix::Identity(d_sys, d_sys)) +
                           qt::env_major_kron(Matrix::Identity(d_env, d_env), h_sys) + h_int;
    const Matrix a_full = qt::env_major_kron(Matrix::Identity(d_env, d_env), a);
    CHECK(std::abs(rate - unitary_variance_rate(s, h_total, a_full, 1e-5)) < 1e-6);
  }

  // A generic interaction violates the pointer preconditions.
  const BipartiteState s = random_pure(rng, 2, 2);
  CHECK_THROWS_AS(qt::pointer_variance_rate(s, ntt::random_hermitian(rng, 2),
                                            ntt::random_hermitian(rng, 2),
                                            ntt::random_hermitian(rng, 4), sigma3),
                  std::invalid_argument);
}
