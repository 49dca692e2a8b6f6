#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "noisetensor/types.hpp"

namespace noisetensor {

// Dense tensor over n index pairs (i1 j1, i2 j2, ..., in jn), every index in
// [0, d). Storage is row-major over the flattened index list
// (i1, j1, i2, j2, ..., in, jn) with i1 slowest; pair l (1-based) occupies
// flattened positions (2l-2, 2l-1).
//
// The flavor records which symmetry group the tensor is expected to carry:
//   classical — invariant under any permutation of the pairs,
//   quantum   — invariant under cyclic rotation of the pairs only.
// The flavor also selects the Hermiticity image and which chain contractions
// are admissible (quantum: adjacent pairs only, cyclically).
enum class Flavor { classical, quantum };

namespace detail {

// Visits all dim^width multi-indices in row-major order (last position
// fastest), passing the index list and the running flat offset.
template <typename Fn>
void for_each_multi_index(int width, int dim, Fn&& fn) {
  std::vector<int> idx(static_cast<std::size_t>(width), 0);
  std::size_t flat = 0;
  for (;;) {
    fn(std::span<const int>(idx.data(), idx.size()), flat);
    ++flat;
    int p = width - 1;
    while (p >= 0) {
      if (++idx[static_cast<std::size_t>(p)] < dim) break;
      idx[static_cast<std::size_t>(p)] = 0;
      --p;
    }
    if (p < 0) return;
  }
}

}  // namespace detail

class PairTensor {
 public:
  // Zero-initialized. Allocation is charged against the memory budget.
  PairTensor(int order, int dim, Flavor flavor);

  int order() const { return order_; }
  int dim() const { return dim_; }
  Flavor flavor() const { return flavor_; }
  std::size_t size() const { return entries_.size(); }

  Cx& operator[](std::size_t flat) { return entries_[flat]; }
  const Cx& operator[](std::size_t flat) const { return entries_[flat]; }

  // idx holds 2*order indices in storage order.
  std::size_t flat_index(std::span<const int> idx) const;
  Cx at(std::initializer_list<int> idx) const;
  Cx& at(std::initializer_list<int> idx);

  std::span<const Cx> entries() const { return entries_; }
  std::span<Cx> entries() { return entries_; }

  PairTensor& operator+=(const PairTensor& other);
  PairTensor& operator*=(Cx factor);

 private:
  int order_;
  int dim_;
  Flavor flavor_;
  std::vector<Cx> entries_;
};

// Largest |T - S| entry difference; shapes must agree.
double max_abs_diff(const PairTensor& a, const PairTensor& b);
double max_abs(const PairTensor& t);

// Contracts pair `slot` (1-based) with delta_{il jl}; order drops by one.
PairTensor contract_trace(const PairTensor& t, int slot);

// Contracts delta_{j_from i_to}: the column index of pair `from` against the
// row index of pair `to` (both 1-based, from != to). The merged pair
// (i_from, j_to) takes pair `from`'s position, pair `to` is removed, and the
// remaining pairs keep their relative order. Quantum flavor admits only
// cyclically adjacent contractions, to = from % n + 1.
PairTensor contract_chain(const PairTensor& t, int from_slot, int to_slot);

// Applies a pair permutation: result[p_1,...,p_n] = t[p_perm[1],...,p_perm[n]]
// (perm is 0-based of length n).
PairTensor permute_pairs(const PairTensor& t, std::span<const int> perm);

// Group average over the flavor's symmetry group (S_n for classical, cyclic
// rotations for quantum). Classical averaging is capped at order 6.
PairTensor symmetrize(const PairTensor& t);

// Fully symmetric / fully antisymmetric projections over S_n (any flavor).
PairTensor symmetric_part(const PairTensor& t);
PairTensor antisymmetric_part(const PairTensor& t);

// max |T - symmetrize(T)|.
double symmetry_defect(const PairTensor& t);

// max |T - H(T)| where H conjugates entries and swaps (il,jl)->(jl,il) in
// every pair; quantum flavor additionally reverses the pair order.
double hermiticity_defect(const PairTensor& t);

// Conversions between order-1 tensors and d x d matrices.
Matrix to_matrix(const PairTensor& t);
PairTensor from_matrix(const Matrix& m, Flavor flavor);

}  // namespace noisetensor
