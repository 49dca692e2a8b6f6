#pragma once

#include <vector>

#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/types.hpp"

namespace noisetensor {

struct EnsembleMember {
  double w;
  Vector psi;
};

// Finite weighted family of normalized pure states on C^dim. Weights must be
// nonnegative; a total weight within 1e-9 of 1 is renormalized, anything
// further off is rejected.
class WeightedEnsemble {
 public:
  WeightedEnsemble(int dim, std::vector<EnsembleMember> members);

  int dim() const { return dim_; }
  const std::vector<EnsembleMember>& members() const { return members_; }

 private:
  int dim_;
  std::vector<EnsembleMember> members_;
};

// Order-n moment tensor: T[(i1 j1),...,(in jn)] = sum_a w_a prod_l
// (psi_a psi_a^dag)_{il jl}. Classical flavor; fully pair-symmetric.
PairTensor density_tensor(const WeightedEnsemble& ens, int order);

// G[a] = sum_a w_a exp(sum_{ij} (psi_a psi_a^dag)_{ij} a_{ij}) for a complex
// dim x dim source matrix a.
Cx generating_function(const WeightedEnsemble& ens, const Matrix& a);

// E over members of <R>_psi <S>_psi, evaluated by contracting the order-2
// tensor with R and S.
Cx pair_expectation(const WeightedEnsemble& ens, const Matrix& r, const Matrix& s);

struct VarianceSplit {
  double var;   // total: Tr(rho1 R^2) - (Tr rho1 R)^2
  double var1;  // mean per-member quantum variance
  double var2;  // variance of per-member means
};

// Splits the total variance of a Hermitian observable R into the mean quantum
// variance and the variance of means; var == var1 + var2 by construction of
// the order-1/order-2 contractions.
VarianceSplit variance_decomposition(const WeightedEnsemble& ens, const Matrix& r);

}  // namespace noisetensor
