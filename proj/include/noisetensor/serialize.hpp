#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "noisetensor/bipartite.hpp"
#include "noisetensor/ensemble.hpp"
#include "noisetensor/hierarchy_series.hpp"
#include "noisetensor/jump.hpp"
#include "noisetensor/lindblad.hpp"
#include "noisetensor/master.hpp"
#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/reduction.hpp"
#include "noisetensor/types.hpp"

// JSON and CSV interchange for every model and result type the command line
// handles. Complex scalars travel as [re, im] pairs (bare numbers are
// accepted on input as real values); matrices as row-major nested arrays;
// tensors as {order, dim, flavor, entries} with entries flattened row-major.
// All malformed input is reported through std::invalid_argument with a
// field-level message.

namespace noisetensor::io {

using nlohmann::json;

json complex_to_json(Cx z);
Cx complex_from_json(const json& j);

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

json tensor_to_json(const PairTensor& t);
PairTensor tensor_from_json(const json& j);

json ensemble_to_json(const WeightedEnsemble& ens);
WeightedEnsemble ensemble_from_json(const json& j);

// {dim, H, lindblads, u?}; u defaults to the identity.
json lindblad_to_json(const LindbladModel& m);
LindbladModel lindblad_from_json(const json& j);

// Adds {offsets: [complex,...] | "orthogonal"} to the lindblad layout.
jump::JumpModel jump_from_json(const json& j);

json bipartite_to_json(const qt::BipartiteState& s);
qt::BipartiteState bipartite_from_json(const json& j);

json sde_to_json(const SdeConfig& cfg);
SdeConfig sde_from_json(const json& j);

// {A, variant: "reducing"|"nonreducing", psi0, sde}.
reduction::ReductionExperiment reduction_from_json(const json& j);

// Weak-coupling generator specs:
//   {variant: "born-markov", blocks: [{omega, ops, rates, shifts}]}
//   {variant: "quantum-optical", beta: number|"inf",
//    channels: [{omega, ops}], shift_slope?: number}
master::BornMarkovSpec born_markov_from_json(const json& j);

// {variant: "caldeira-leggett", mass, damping, kT, dim, include_free?}.
master::CaldeiraLeggettSpec caldeira_from_json(const json& j);

// {density, mass, sigma, amplitude: {constant, anisotropy?}}. The amplitude
// is |f|^2 = constant * (1 + anisotropy * cos(theta)) with theta the
// scattering angle; anisotropy in [-1, 1] keeps it nonnegative.
master::GasModel gas_from_json(const json& j);

// Array of [x, y, z] grid points.
std::vector<Eigen::Vector3d> grid_from_json(const json& j);

// One evaluated invariant for the machine-readable report.
struct CheckRecord {
  std::string check;   // instance name, unique within a run
  std::string module;  // owning module
  std::string ref;     // stable identity label for the check family
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

CheckRecord make_check(std::string check, std::string module, std::string ref, double value,
                       double tolerance);

// Report schema: array of {check, module, paper_ref, value, tolerance, pass}.
json checks_to_json(const std::vector<CheckRecord>& checks);

// Shortest-exact decimal form (17 significant digits), locale independent.
std::string format_double(double v);

// Parse with position diagnostics folded into the exception message.
json read_json_file(const std::string& path);

// Writes are atomic: content lands in a sibling temp file first, then the
// file is renamed over the target.
void write_text_atomic(const std::string& path, const std::string& content);
void write_json_atomic(const std::string& path, const json& j);
void write_csv_atomic(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows);

}  // namespace noisetensor::io
