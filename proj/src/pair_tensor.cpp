#include "noisetensor/pair_tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "noisetensor/budget.hpp"

namespace noisetensor {

namespace {

constexpr int kMaxOrder = 16;

std::size_t checked_size(int order, int dim) {
  if (order < 1 || order > kMaxOrder) {
    throw std::invalid_argument("tensor order must be in [1, 16]");
  }
  if (dim < 1) throw std::invalid_argument("tensor dim must be >= 1");
  std::size_t n = 1;
  for (int p = 0; p < 2 * order; ++p) {
    if (n > std::size_t{1} << 58) throw BudgetExceeded("tensor size overflow");
    n *= static_cast<std::size_t>(dim);
  }
  require_budget(n * sizeof(Cx), "pair tensor");
  return n;
}

void check_slot(const PairTensor& t, int slot, const char* what) {
  if (slot < 1 || slot > t.order()) {
    throw std::invalid_argument(std::string(what) + ": slot out of range");
  }
}

void check_same_shape(const PairTensor& a, const PairTensor& b) {
  if (a.order() != b.order() || a.dim() != b.dim()) {
    throw std::invalid_argument("tensor shapes differ");
  }
}

}  // namespace

PairTensor::PairTensor(int order, int dim, Flavor flavor)
    : order_(order), dim_(dim), flavor_(flavor), entries_(checked_size(order, dim)) {}

std::size_t PairTensor::flat_index(std::span<const int> idx) const {
  if (idx.size() != static_cast<std::size_t>(2 * order_)) {
    throw std::invalid_argument("index list length must be 2*order");
  }
  std::size_t flat = 0;
  for (const int i : idx) {
    if (i < 0 || i >= dim_) throw std::out_of_range("tensor index out of range");
    flat = flat * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i);
  }
  return flat;
}

Cx PairTensor::at(std::initializer_list<int> idx) const {
  return entries_[flat_index(std::span<const int>(idx.begin(), idx.size()))];
}

Cx& PairTensor::at(std::initializer_list<int> idx) {
  return entries_[flat_index(std::span<const int>(idx.begin(), idx.size()))];
}

PairTensor& PairTensor::operator+=(const PairTensor& other) {
  check_same_shape(*this, other);
  for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += other.entries_[k];
  return *this;
}

PairTensor& PairTensor::operator*=(Cx factor) {
  for (auto& e : entries_) e *= factor;
  return *this;
}

double max_abs_diff(const PairTensor& a, const PairTensor& b) {
  check_same_shape(a, b);
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double max_abs(const PairTensor& t) {
  double m = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) m = std::max(m, std::abs(t[k]));
  return m;
}

PairTensor contract_trace(const PairTensor& t, int slot) {
  check_slot(t, slot, "contract_trace");
  if (t.order() < 2) {
    throw std::invalid_argument("contract_trace: order must be >= 2");
  }
  const int n = t.order();
  const int d = t.dim();
  PairTensor out(n - 1, d, t.flavor());
  std::array<int, 2 * kMaxOrder> oidx{};
  detail::for_each_multi_index(2 * n, d, [&](std::span<const int> idx, std::size_t flat) {
    const int il = idx[static_cast<std::size_t>(2 * (slot - 1))];
    const int jl = idx[static_cast<std::size_t>(2 * (slot - 1) + 1)];
    if (il != jl) return;
    int w = 0;
    for (int p = 0; p < 2 * n; ++p) {
      if (p == 2 * (slot - 1) || p == 2 * (slot - 1) + 1) continue;
      oidx[static_cast<std::size_t>(w++)] = idx[static_cast<std::size_t>(p)];
    }
    out[out.flat_index(std::span<const int>(oidx.data(), static_cast<std::size_t>(w)))] +=
        t[flat];
  });
  return out;
}

PairTensor contract_chain(const PairTensor& t, int from_slot, int to_slot) {
  check_slot(t, from_slot, "contract_chain");
  check_slot(t, to_slot, "contract_chain");
  const int n = t.order();
  if (n < 2) throw std::invalid_argument("contract_chain: order must be >= 2");
  if (from_slot == to_slot) {
    throw std::invalid_argument("contract_chain: slots must differ");
  }
  if (t.flavor() == Flavor::quantum && to_slot != from_slot % n + 1) {
    throw std::invalid_argument(
        "contract_chain: quantum flavor admits adjacent contractions only");
  }
  const int d = t.dim();
  PairTensor out(n - 1, d, t.flavor());
  std::array<int, 2 * kMaxOrder> oidx{};
  detail::for_each_multi_index(2 * n, d, [&](std::span<const int> idx, std::size_t flat) {
    const int jf = idx[static_cast<std::size_t>(2 * (from_slot - 1) + 1)];
    const int it = idx[static_cast<std::size_t>(2 * (to_slot - 1))];
    if (jf != it) return;
    // Merged pair (i_from, j_to) sits where pair `from` was; pair `to` is
    // dropped.
    int w = 0;
    for (int s = 1; s <= n; ++s) {
      if (s == to_slot) continue;
      if (s == from_slot) {
        oidx[static_cast<std::size_t>(w++)] = idx[static_cast<std::size_t>(2 * (from_slot - 1))];
        oidx[static_cast<std::size_t>(w++)] = idx[static_cast<std::size_t>(2 * (to_slot - 1) + 1)];
      } else {
        oidx[static_cast<std::size_t>(w++)] = idx[static_cast<std::size_t>(2 * (s - 1))];
        oidx[static_cast<std::size_t>(w++)] = idx[static_cast<std::size_t>(2 * (s - 1) + 1)];
      }
    }
    out[out.flat_index(std::span<const int>(oidx.data(), static_cast<std::size_t>(w)))] +=
        t[flat];
  });
  return out;
}

PairTensor permute_pairs(const PairTensor& t, std::span<const int> perm) {
  const int n = t.order();
  if (perm.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("permutation length must equal order");
  }
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const int p : perm) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) {
      throw std::invalid_argument("not a permutation");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  PairTensor out(n, t.dim(), t.flavor());
  std::array<int, 2 * kMaxOrder> src{};
  detail::for_each_multi_index(2 * n, t.dim(), [&](std::span<const int> idx, std::size_t flat) {
    for (int s = 0; s < n; ++s) {
      const int q = perm[static_cast<std::size_t>(s)];
      src[static_cast<std::size_t>(2 * s)] = idx[static_cast<std::size_t>(2 * q)];
      src[static_cast<std::size_t>(2 * s + 1)] = idx[static_cast<std::size_t>(2 * q + 1)];
    }
    out[flat] = t[t.flat_index(std::span<const int>(src.data(), static_cast<std::size_t>(2 * n)))];
  });
  return out;
}

namespace {

// Calls fn(perm, sign) for every permutation of {0..n-1}.
template <typename Fn>
void for_each_permutation(int n, Fn&& fn) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    int inversions = 0;
    for (std::size_t a = 0; a < perm.size(); ++a) {
      for (std::size_t b = a + 1; b < perm.size(); ++b) {
        if (perm[a] > perm[b]) ++inversions;
      }
    }
    fn(std::span<const int>(perm.data(), perm.size()), inversions % 2 == 0 ? 1.0 : -1.0);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

PairTensor signed_group_average(const PairTensor& t, bool with_sign) {
  const int n = t.order();
  if (n > 6) {
    throw std::invalid_argument("symmetric-group average limited to order <= 6");
  }
  PairTensor acc(n, t.dim(), t.flavor());
  double count = 0.0;
  for_each_permutation(n, [&](std::span<const int> perm, double sign) {
    PairTensor p = permute_pairs(t, perm);
    if (with_sign) p *= sign;
    acc += p;
    count += 1.0;
  });
  acc *= 1.0 / count;
  return acc;
}

}  // namespace

PairTensor symmetrize(const PairTensor& t) {
  const int n = t.order();
  if (n == 1) return t;
  if (t.flavor() == Flavor::classical) return signed_group_average(t, false);
  // Quantum: average over the n cyclic rotations.
  PairTensor acc(n, t.dim(), t.flavor());
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    for (int s = 0; s < n; ++s) perm[static_cast<std::size_t>(s)] = (s + r) % n;
    acc += permute_pairs(t, perm);
  }
  acc *= 1.0 / static_cast<double>(n);
  return acc;
}

PairTensor symmetric_part(const PairTensor& t) {
  return t.order() == 1 ? t : signed_group_average(t, false);
}

PairTensor antisymmetric_part(const PairTensor& t) {
  if (t.order() == 1) return PairTensor(1, t.dim(), t.flavor());
  return signed_group_average(t, true);
}

double symmetry_defect(const PairTensor& t) { return max_abs_diff(t, symmetrize(t)); }

double hermiticity_defect(const PairTensor& t) {
  const int n = t.order();
  PairTensor img(n, t.dim(), t.flavor());
  std::array<int, 2 * kMaxOrder> src{};
  detail::for_each_multi_index(2 * n, t.dim(), [&](std::span<const int> idx, std::size_t flat) {
    for (int s = 0; s < n; ++s) {
      // Source pair for destination slot s: same slot (classical) or the
      // order-reversed slot (quantum), with (i,j) swapped.
      const int q = t.flavor() == Flavor::quantum ? n - 1 - s : s;
      src[static_cast<std::size_t>(2 * s)] = idx[static_cast<std::size_t>(2 * q + 1)];
      src[static_cast<std::size_t>(2 * s + 1)] = idx[static_cast<std::size_t>(2 * q)];
    }
    img[flat] = std::conj(
        t[t.flat_index(std::span<const int>(src.data(), static_cast<std::size_t>(2 * n)))]);
  });
  return max_abs_diff(t, img);
}

Matrix to_matrix(const PairTensor& t) {
  if (t.order() != 1) throw std::invalid_argument("to_matrix needs an order-1 tensor");
  const int d = t.dim();
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = t.at({i, j});
  return m;
}

PairTensor from_matrix(const Matrix& m, Flavor flavor) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw std::invalid_argument("from_matrix needs a square matrix");
  const int d = static_cast<int>(m.rows());
  PairTensor t(1, d, flavor);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) t.at({i, j}) = m(i, j);
  return t;
}

}  // namespace noisetensor
