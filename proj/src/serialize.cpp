#include "noisetensor/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace noisetensor::io {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument(where + ": " + what);
}

const json& field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  const auto it = j.find(name);
  if (it == j.end()) fail(where, std::string("missing field '") + name + "'");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

Cx complex_at(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(where, "expected [re, im] or a bare number");
  return {j[0].get<double>(), j[1].get<double>()};
}

Matrix matrix_at(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a nonempty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) fail(where, "rows must be nonempty arrays");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail(where, "rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          complex_at(j[r][c], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return m;
}

Vector vector_at(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a nonempty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k)
    v(static_cast<Eigen::Index>(k)) = complex_at(j[k], where + "[" + std::to_string(k) + "]");
  return v;
}

std::vector<Matrix> matrix_list_at(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a nonempty array of matrices");
  std::vector<Matrix> out;
  out.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(matrix_at(j[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

}  // namespace

json complex_to_json(Cx z) { return json::array({z.real(), z.imag()}); }

Cx complex_from_json(const json& j) { return complex_at(j, "complex"); }

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) { return matrix_at(j, "matrix"); }

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(complex_to_json(v(k)));
  return out;
}

Vector vector_from_json(const json& j) { return vector_at(j, "vector"); }

json tensor_to_json(const PairTensor& t) {
  json out;
  out["order"] = t.order();
  out["dim"] = t.dim();
  out["flavor"] = t.flavor() == Flavor::classical ? "classical" : "quantum";
  json entries = json::array();
  for (const Cx z : t.entries()) entries.push_back(complex_to_json(z));
  out["entries"] = std::move(entries);
  return out;
}

PairTensor tensor_from_json(const json& j) {
  const int order = static_cast<int>(number(field(j, "order", "tensor"), "tensor.order"));
  const int dim = static_cast<int>(number(field(j, "dim", "tensor"), "tensor.dim"));
  const json& fl = field(j, "flavor", "tensor");
  if (!fl.is_string()) fail("tensor.flavor", "expected a string");
  Flavor flavor;
  if (fl == "classical")
    flavor = Flavor::classical;
  else if (fl == "quantum")
    flavor = Flavor::quantum;
  else
    fail("tensor.flavor", "expected 'classical' or 'quantum'");
  PairTensor t(order, dim, flavor);
  const json& entries = field(j, "entries", "tensor");
  if (!entries.is_array() || entries.size() != t.size())
    fail("tensor.entries", "expected " + std::to_string(t.size()) + " entries");
  for (std::size_t k = 0; k < t.size(); ++k)
    t[k] = complex_at(entries[k], "tensor.entries[" + std::to_string(k) + "]");
  return t;
}

json ensemble_to_json(const WeightedEnsemble& ens) {
  json out;
  out["dim"] = ens.dim();
  json members = json::array();
  for (const EnsembleMember& m : ens.members())
    members.push_back(json{{"w", m.w}, {"psi", vector_to_json(m.psi)}});
  out["members"] = std::move(members);
  return out;
}

WeightedEnsemble ensemble_from_json(const json& j) {
  const int dim = static_cast<int>(number(field(j, "dim", "ensemble"), "ensemble.dim"));
  const json& members = field(j, "members", "ensemble");
  if (!members.is_array() || members.empty())
    fail("ensemble.members", "expected a nonempty array");
  std::vector<EnsembleMember> ms;
  ms.reserve(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    const std::string where = "ensemble.members[" + std::to_string(k) + "]";
    const json& m = members[k];
    ms.push_back({number(field(m, "w", where), where + ".w"),
                  vector_at(field(m, "psi", where), where + ".psi")});
  }
  return WeightedEnsemble(dim, std::move(ms));
}

json lindblad_to_json(const LindbladModel& m) {
  json out;
  out["dim"] = m.dim();
  out["H"] = matrix_to_json(m.H);
  json cs = json::array();
  for (const Matrix& c : m.lindblads) cs.push_back(matrix_to_json(c));
  out["lindblads"] = std::move(cs);
  out["u"] = matrix_to_json(m.u);
  return out;
}

LindbladModel lindblad_from_json(const json& j) {
  const int dim = static_cast<int>(number(field(j, "dim", "model"), "model.dim"));
  const Matrix h = matrix_at(field(j, "H", "model"), "model.H");
  if (h.rows() != dim) fail("model.H", "dimension disagrees with 'dim'");
  const std::vector<Matrix> cs = matrix_list_at(field(j, "lindblads", "model"), "model.lindblads");
  if (j.contains("u")) return LindbladModel(h, cs, matrix_at(j["u"], "model.u"));
  return LindbladModel(h, cs);
}

jump::JumpModel jump_from_json(const json& j) {
  const int dim = static_cast<int>(number(field(j, "dim", "model"), "model.dim"));
  const Matrix h = matrix_at(field(j, "H", "model"), "model.H");
  if (h.rows() != dim) fail("model.H", "dimension disagrees with 'dim'");
  std::vector<Matrix> cs = matrix_list_at(field(j, "lindblads", "model"), "model.lindblads");
  const json& offsets = field(j, "offsets", "model");
  if (offsets.is_string()) {
    if (offsets != "orthogonal") fail("model.offsets", "expected an array or 'orthogonal'");
    return jump::JumpModel(h, std::move(cs));
  }
  if (!offsets.is_array()) fail("model.offsets", "expected an array or 'orthogonal'");
  std::vector<Cx> ks;
  ks.reserve(offsets.size());
  for (std::size_t k = 0; k < offsets.size(); ++k)
    ks.push_back(complex_at(offsets[k], "model.offsets[" + std::to_string(k) + "]"));
  return jump::JumpModel(h, std::move(cs), std::move(ks));
}

json bipartite_to_json(const qt::BipartiteState& s) {
  return json{{"dE", s.d_E}, {"dS", s.d_S}, {"rho", matrix_to_json(s.rho)}, {"pure", s.pure}};
}

qt::BipartiteState bipartite_from_json(const json& j) {
  const int de = static_cast<int>(number(field(j, "dE", "state"), "state.dE"));
  const int ds = static_cast<int>(number(field(j, "dS", "state"), "state.dS"));
  const json& pure = field(j, "pure", "state");
  if (!pure.is_boolean()) fail("state.pure", "expected a boolean");
  return qt::BipartiteState(de, ds, matrix_at(field(j, "rho", "state"), "state.rho"),
                            pure.get<bool>());
}

json sde_to_json(const SdeConfig& cfg) {
  return json{{"dt", cfg.dt},
              {"steps", cfg.steps},
              {"n_traj", cfg.n_traj},
              {"seed", cfg.seed},
              {"renormalize", cfg.renormalize},
              {"record_every", cfg.record_every},
              {"n_batches", cfg.n_batches}};
}

SdeConfig sde_from_json(const json& j) {
  if (!j.is_object()) fail("sde", "expected an object");
  SdeConfig cfg;
  cfg.dt = j.value("dt", cfg.dt);
  cfg.steps = j.value("steps", cfg.steps);
  cfg.n_traj = j.value("n_traj", cfg.n_traj);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.renormalize = j.value("renormalize", cfg.renormalize);
  cfg.record_every = j.value("record_every", cfg.record_every);
  cfg.n_batches = j.value("n_batches", cfg.n_batches);
  return cfg;
}

reduction::ReductionExperiment reduction_from_json(const json& j) {
  const Matrix a = matrix_at(field(j, "A", "experiment"), "experiment.A");
  const json& variant = field(j, "variant", "experiment");
  reduction::Variant v;
  if (variant == "reducing")
    v = reduction::Variant::reducing;
  else if (variant == "nonreducing")
    v = reduction::Variant::nonreducing;
  else
    fail("experiment.variant", "expected 'reducing' or 'nonreducing'");
  const Vector psi0 = vector_at(field(j, "psi0", "experiment"), "experiment.psi0");
  const SdeConfig cfg = j.contains("sde") ? sde_from_json(j["sde"]) : SdeConfig{};
  return reduction::ReductionExperiment(a, v, psi0, cfg);
}

namespace {

double beta_at(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j == "inf") return std::numeric_limits<double>::infinity();
    fail(where, "expected a number or 'inf'");
  }
  return number(j, where);
}

}  // namespace

master::BornMarkovSpec born_markov_from_json(const json& j) {
  const json& variant = field(j, "variant", "spec");
  if (variant == "born-markov") {
    const json& blocks = field(j, "blocks", "spec");
    if (!blocks.is_array() || blocks.empty()) fail("spec.blocks", "expected a nonempty array");
    std::vector<master::FrequencyBlock> out;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const std::string where = "spec.blocks[" + std::to_string(k) + "]";
      const json& b = blocks[k];
      out.push_back({number(field(b, "omega", where), where + ".omega"),
                     matrix_list_at(field(b, "ops", where), where + ".ops"),
                     matrix_at(field(b, "rates", where), where + ".rates"),
                     matrix_at(field(b, "shifts", where), where + ".shifts")});
    }
    return master::BornMarkovSpec(std::move(out));
  }
  if (variant == "quantum-optical") {
    const double beta = beta_at(field(j, "beta", "spec"), "spec.beta");
    const json& channels = field(j, "channels", "spec");
    if (!channels.is_array() || channels.empty())
      fail("spec.channels", "expected a nonempty array");
    std::vector<std::pair<double, std::vector<Matrix>>> chs;
    for (std::size_t k = 0; k < channels.size(); ++k) {
      const std::string where = "spec.channels[" + std::to_string(k) + "]";
      const json& c = channels[k];
      chs.emplace_back(number(field(c, "omega", where), where + ".omega"),
                       matrix_list_at(field(c, "ops", where), where + ".ops"));
    }
    if (j.contains("shift_slope")) {
      const double slope = number(j["shift_slope"], "spec.shift_slope");
      return master::quantum_optical_spec(beta, chs,
                                          [slope](double w) { return slope * w; });
    }
    return master::quantum_optical_spec(beta, chs);
  }
  fail("spec.variant", "expected 'born-markov' or 'quantum-optical'");
}

master::CaldeiraLeggettSpec caldeira_from_json(const json& j) {
  if (field(j, "variant", "spec") != "caldeira-leggett")
    fail("spec.variant", "expected 'caldeira-leggett'");
  return master::CaldeiraLeggettSpec(
      number(field(j, "mass", "spec"), "spec.mass"),
      number(field(j, "damping", "spec"), "spec.damping"),
      number(field(j, "kT", "spec"), "spec.kT"),
      static_cast<int>(number(field(j, "dim", "spec"), "spec.dim")), j.value("include_free", false));
}

master::GasModel gas_from_json(const json& j) {
  master::GasModel gas;
  gas.density = number(field(j, "density", "gas"), "gas.density");
  gas.mass = number(field(j, "mass", "gas"), "gas.mass");
  gas.sigma = number(field(j, "sigma", "gas"), "gas.sigma");
  const json& amp = field(j, "amplitude", "gas");
  const double f0 = number(field(amp, "constant", "gas.amplitude"), "gas.amplitude.constant");
  if (f0 <= 0) fail("gas.amplitude.constant", "must be positive");
  const double eps = amp.value("anisotropy", 0.0);
  if (std::abs(eps) > 1.0) fail("gas.amplitude.anisotropy", "must lie in [-1, 1]");
  gas.amplitude2 = [f0, eps](const Eigen::Vector3d& out, const Eigen::Vector3d& in) {
    if (eps == 0.0) return f0;
    const double denom = out.norm() * in.norm();
    return denom > 0.0 ? f0 * (1.0 + eps * out.dot(in) / denom) : f0;
  };
  return gas;
}

std::vector<Eigen::Vector3d> grid_from_json(const json& j) {
  if (!j.is_array() || j.empty()) fail("grid", "expected a nonempty array of [x, y, z] points");
  std::vector<Eigen::Vector3d> grid;
  grid.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string where = "grid[" + std::to_string(k) + "]";
    const json& p = j[k];
    if (!p.is_array() || p.size() != 3) fail(where, "expected [x, y, z]");
    grid.emplace_back(number(p[0], where), number(p[1], where), number(p[2], where));
  }
  return grid;
}

CheckRecord make_check(std::string check, std::string module, std::string ref, double value,
                       double tolerance) {
  CheckRecord r;
  r.check = std::move(check);
  r.module = std::move(module);
  r.ref = std::move(ref);
  r.value = value;
  r.tolerance = tolerance;
  r.pass = value <= tolerance;  // NaN compares false and therefore fails
  return r;
}

json checks_to_json(const std::vector<CheckRecord>& checks) {
  json out = json::array();
  for (const CheckRecord& c : checks) {
    out.push_back(json{{"check", c.check},
                       {"module", c.module},
                       {"paper_ref", c.ref},
                       {"value", c.value},
                       {"tolerance", c.tolerance},
                       {"pass", c.pass}});
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open input file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("parse error in '" + path + "': " + e.what());
  }
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw std::runtime_error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

void write_json_atomic(const std::string& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

void write_csv_atomic(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k) out << ',';
    out << header[k];
  }
  out << '\n';
  for (const std::vector<double>& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("csv row width disagrees with the header");
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out << ',';
      out << format_double(row[k]);
    }
    out << '\n';
  }
  write_text_atomic(path, out.str());
}

}  // namespace noisetensor::io
