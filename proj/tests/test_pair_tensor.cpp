#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "noisetensor/budget.hpp"
#include "noisetensor/ensemble.hpp"
#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/spin_isotropic.hpp"
#include "test_util.hpp"

using namespace noisetensor;

namespace {

PairTensor random_tensor(RngStream& rng, int order, int dim, Flavor flavor) {
  PairTensor t(order, dim, flavor);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = ntt::random_cx(rng);
  return t;
}

// Independent contraction oracles: assemble the summed index list explicitly
// for every output entry instead of scattering input entries.
PairTensor oracle_trace(const PairTensor& t, int slot) {
  PairTensor out(t.order() - 1, t.dim(), t.flavor());
  detail::for_each_multi_index(
      2 * (t.order() - 1), t.dim(), [&](std::span<const int> oidx, std::size_t oflat) {
        Cx acc = 0.0;
        for (int x = 0; x < t.dim(); ++x) {
          std::vector<int> full(oidx.begin(), oidx.end());
          full.insert(full.begin() + 2 * (slot - 1), {x, x});
          acc += t[t.flat_index(full)];
        }
        out[oflat] = acc;
      });
  return out;
}

PairTensor oracle_chain(const PairTensor& t, int from, int to) {
  const int n = t.order();
  PairTensor out(n - 1, t.dim(), t.flavor());
  detail::for_each_multi_index(
      2 * (n - 1), t.dim(), [&](std::span<const int> oidx, std::size_t oflat) {
        // Output slot layout: pair `from` holds the merged (i_from, j_to),
        // pair `to` is gone. Rebuild the full index list for each summand.
        Cx acc = 0.0;
        for (int x = 0; x < t.dim(); ++x) {
          std::vector<int> full(static_cast<std::size_t>(2 * n));
          int src = 0;
          for (int s = 1; s <= n; ++s) {
            if (s == to) continue;
            const int i = oidx[static_cast<std::size_t>(src++)];
            const int j = oidx[static_cast<std::size_t>(src++)];
            if (s == from) {
              full[static_cast<std::size_t>(2 * (from - 1))] = i;
              full[static_cast<std::size_t>(2 * (from - 1) + 1)] = x;
              full[static_cast<std::size_t>(2 * (to - 1))] = x;
              full[static_cast<std::size_t>(2 * (to - 1) + 1)] = j;
            } else {
              full[static_cast<std::size_t>(2 * (s - 1))] = i;
              full[static_cast<std::size_t>(2 * (s - 1) + 1)] = j;
            }
          }
          acc += t[t.flat_index(full)];
        }
        out[oflat] = acc;
      });
  return out;
}

}  // namespace

TEST_CASE("trace contraction of the isotropic order-2 tensor gives the order-1 tensor") {
  const PairTensor t2 = spin::analytic_tensor(2);
  const PairTensor t1 = spin::analytic_tensor(1);
  CHECK(max_abs_diff(contract_trace(t2, 1), t1) < 1e-14);
  CHECK(max_abs_diff(contract_trace(t2, 2), t1) < 1e-14);
}

TEST_CASE("chain contraction of the isotropic order-2 tensor gives the order-1 tensor") {
  const PairTensor t2 = spin::analytic_tensor(2);
  const PairTensor t1 = spin::analytic_tensor(1);
  CHECK(max_abs_diff(contract_chain(t2, 1, 2), t1) < 1e-14);
  CHECK(max_abs_diff(contract_chain(t2, 2, 1), t1) < 1e-14);
}

TEST_CASE("chain contraction of the maximally entangled order-2 block tensor") {
  // T[(i1,j1),(i2,j2)] = delta_{i1 j2} delta_{j1 i2} / 4: the order-2 trace
  // tensor of a 2x2 maximally entangled pure state.
  PairTensor t(2, 2, Flavor::quantum);
  for (int i1 = 0; i1 < 2; ++i1) {
    for (int j1 = 0; j1 < 2; ++j1) {
      for (int i2 = 0; i2 < 2; ++i2) {
        for (int j2 = 0; j2 < 2; ++j2) {
          t.at({i1, j1, i2, j2}) = (i1 == j2 && j1 == i2) ? 0.25 : 0.0;
        }
      }
    }
  }
  const PairTensor r = contract_chain(t, 1, 2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(std::abs(r.at({i, j}) - (i == j ? Cx(0.5) : Cx(0.0))) < 1e-15);
    }
  }
  CHECK(hermiticity_defect(t) < 1e-15);
  CHECK(symmetry_defect(t) < 1e-15);  // cyclic group for quantum flavor
}

TEST_CASE("contractions match the loop oracle on random tensors") {
  RngStream rng(42, 0);
  for (const Flavor flavor : {Flavor::classical, Flavor::quantum}) {
    for (const int d : {2, 3}) {
      for (const int n : {2, 3}) {
        const PairTensor t = random_tensor(rng, n, d, flavor);
        for (int slot = 1; slot <= n; ++slot) {
          CHECK(max_abs_diff(contract_trace(t, slot), oracle_trace(t, slot)) < 1e-13);
        }
        for (int from = 1; from <= n; ++from) {
          for (int to = 1; to <= n; ++to) {
            if (from == to) continue;
            if (flavor == Flavor::quantum && to != from % n + 1) continue;
            CHECK(max_abs_diff(contract_chain(t, from, to), oracle_chain(t, from, to)) <
                  1e-13);
          }
        }
      }
    }
  }
}

TEST_CASE("contraction argument validation") {
  RngStream rng(7, 0);
  const PairTensor t1 = random_tensor(rng, 1, 2, Flavor::classical);
  CHECK_THROWS_AS(contract_trace(t1, 1), std::invalid_argument);
  const PairTensor q3 = random_tensor(rng, 3, 2, Flavor::quantum);
  CHECK_THROWS_AS(contract_chain(q3, 1, 3), std::invalid_argument);
  CHECK_NOTHROW(contract_chain(q3, 3, 1));  // cyclic wrap is adjacent
  const PairTensor c2 = random_tensor(rng, 2, 2, Flavor::classical);
  CHECK_THROWS_AS(contract_trace(c2, 0), std::invalid_argument);
  CHECK_THROWS_AS(contract_trace(c2, 3), std::invalid_argument);
  CHECK_THROWS_AS(contract_chain(c2, 1, 1), std::invalid_argument);
}

TEST_CASE("quantum wrap-around chain contraction is consistent with cyclic rotation") {
  // Contracting (n,1) equals contracting (1,2) after rotating the pairs,
  // which pins down where the merged pair lands.
  RngStream rng(11, 0);
  PairTensor t = random_tensor(rng, 3, 2, Flavor::quantum);
  // Make it cyclic so both routes must agree entrywise.
  t = symmetrize(t);
  const PairTensor a = contract_chain(t, 3, 1);
  const PairTensor b = contract_chain(t, 1, 2);
  // Both contract one adjacent link of the same cyclic tensor; the outputs
  // coincide after swapping the two remaining pairs.
  const std::array<int, 2> swap{1, 0};
  CHECK(max_abs_diff(a, permute_pairs(b, swap)) < 1e-13);
}

TEST_CASE("symmetry defect flags a broken pair symmetry") {
  RngStream rng(3, 0);
  const auto ens = ntt::random_ensemble(rng, 2, 4);
  PairTensor t = density_tensor(ens, 3);
  CHECK(symmetry_defect(t) < 1e-14);
  const double eps = 1e-3;
  t.at({0, 1, 0, 0, 0, 0}) += eps;  // entry with a nontrivial orbit
  const double defect = symmetry_defect(t);
  CHECK(defect >= eps / 2);
  CHECK(defect <= eps);
}

TEST_CASE("hermiticity defect in both flavors") {
  RngStream rng(5, 0);
  const auto ens = ntt::random_ensemble(rng, 3, 3);
  CHECK(hermiticity_defect(density_tensor(ens, 2)) < 1e-14);
  PairTensor t = density_tensor(ens, 2);
  t.at({0, 1, 2, 0}) += Cx(0.0, 1e-3);
  CHECK(hermiticity_defect(t) > 1e-4);
}

TEST_CASE("symmetric and antisymmetric projections") {
  RngStream rng(13, 0);
  const PairTensor t = random_tensor(rng, 2, 2, Flavor::classical);
  const PairTensor s = symmetric_part(t);
  const PairTensor a = antisymmetric_part(t);
  // Manual swap average.
  const std::array<int, 2> swap{1, 0};
  const PairTensor ts = permute_pairs(t, swap);
  PairTensor s_ref = t;
  s_ref += ts;
  s_ref *= 0.5;
  PairTensor a_ref = ts;
  a_ref *= -1.0;
  a_ref += t;
  a_ref *= 0.5;
  CHECK(max_abs_diff(s, s_ref) < 1e-15);
  CHECK(max_abs_diff(a, a_ref) < 1e-15);
  PairTensor sum = s;
  sum += a;
  CHECK(max_abs_diff(sum, t) < 1e-15);  // order 2: S + A is the whole tensor
}

TEST_CASE("tensor allocation respects the memory budget") {
  CHECK_THROWS_AS(PairTensor(4, 16, Flavor::classical), BudgetExceeded);
  CHECK_THROWS_AS(PairTensor(16, 16, Flavor::classical), BudgetExceeded);
  CHECK_THROWS_AS(PairTensor(0, 2, Flavor::classical), std::invalid_argument);
  CHECK_THROWS_AS(PairTensor(2, 0, Flavor::classical), std::invalid_argument);
}
