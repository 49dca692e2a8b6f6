// End-to-end golden-file coverage of the command-line harness: every
// subcommand runs against a pinned fixture and seed, artifacts are checked
// both semantically and for byte-level reproducibility, and the documented
// exit codes are exercised. The binary path is injected at compile time.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path work_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "noisetensor_cli_golden";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = work_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const std::string& env_prefix = "") {
  std::string cmd = env_prefix.empty() ? "" : env_prefix + " ";
  cmd += std::string(NOISETENSOR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  REQUIRE(out.good());
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

// checks.json helpers: every subcommand ends by writing the check table.
bool all_pass(const json& checks) {
  for (const auto& c : checks)
    if (!c.at("pass").get<bool>()) return false;
  return !checks.empty();
}

bool has_check(const json& checks, const std::string& name) {
  for (const auto& c : checks)
    if (c.at("check").get<std::string>() == name) return true;
  return false;
}

double entry_re(const json& entries, std::size_t k) { return entries.at(k).at(0).get<double>(); }
double entry_im(const json& entries, std::size_t k) { return entries.at(k).at(1).get<double>(); }

const char* kEnsembleFixture = R"({"dim": 2, "members": [
  {"w": 0.25, "psi": [[1,0],[0,0]]},
  {"w": 0.25, "psi": [[0,0],[1,0]]},
  {"w": 0.5,  "psi": [[0.7071067811865476,0],[0.7071067811865476,0]]}
]})";

const char* kBellFixture = R"({"dE": 2, "dS": 2, "pure": true, "rho": [
  [[0.5,0],[0,0],[0,0],[0.5,0]],
  [[0,0],[0,0],[0,0],[0,0]],
  [[0,0],[0,0],[0,0],[0,0]],
  [[0.5,0],[0,0],[0,0],[0.5,0]]
]})";

const char* kDephasingFixture = R"({"dim": 2,
  "H": [[[0,0],[0,0]],[[0,0],[0,0]]],
  "lindblads": [[[[0.5,0],[0,0]],[[0,0],[-0.5,0]]]],
  "psi0": [[0.7071067811865476,0],[0.7071067811865476,0]],
  "sde": {"dt": 0.001, "steps": 400, "n_traj": 2000, "record_every": 100}})";

const char* kDampingFixture = R"({"dim": 2,
  "H": [[[0,0],[0,0]],[[0,0],[0,0]]],
  "lindblads": [[[[0,0],[1,0]],[[0,0],[0,0]]]],
  "offsets": "orthogonal",
  "psi0": [[0,0],[1,0]],
  "sde": {"dt": 0.001, "steps": 400, "n_traj": 2000, "record_every": 100}})";

const char* kOpticalFixture = R"({"spec": {"variant": "quantum-optical", "beta": 1.5,
  "channels": [{"omega": 1.0, "ops": [[[[0,0],[1,0]],[[0,0],[0,0]]]]}]},
  "rho0": [[[0,0],[0,0]],[[0,0],[1,0]]],
  "dt": 0.001, "steps": 500, "record_every": 100})";

const char* kGasFixture = R"({"gas": {"density": 0.8, "mass": 1.7, "sigma": 1.0,
  "amplitude": {"constant": 0.6}},
  "grid": [[0,0,0],[0.7,0,0],[1.4,0,0],[0,0.7,0],[0,0,0.7]],
  "time": 0.5})";

const char* kReduceFixture = R"({"A": [[[1,0],[0,0]],[[0,0],[-1,0]]],
  "variant": "reducing",
  "psi0": [[0.7071067811865476,0],[0.7071067811865476,0]],
  "sde": {"dt": 0.001, "steps": 1000, "n_traj": 2000, "record_every": 100}})";

// Born weights 0.7 / 0.3 on the eigenvalues -1 / +1, long enough horizon for
// most trajectories to reduce.
const char* kBornFixture = R"({"A": [[[1,0],[0,0]],[[0,0],[-1,0]]],
  "variant": "reducing",
  "psi0": [[0.5477225575051661,0],[0.8366600265340756,0]],
  "sde": {"dt": 0.001, "steps": 3000, "n_traj": 1000, "record_every": 300}})";

}  // namespace

TEST_CASE("spin run matches the analytic tensors and replays byte-identically") {
  const fs::path a = fresh_dir("spin_a");
  const fs::path b = fresh_dir("spin_b");
  REQUIRE(run_cli("spin --seed 3 --traj 20000 --n 2 --out " + a.string()) == 0);
  REQUIRE(run_cli("spin --seed 3 --traj 20000 --n 2 --out " + b.string()) == 0);

  const json order1 = load_json(a / "spin_order1.json");
  CHECK(order1.at("order") == 1);
  CHECK(order1.at("dim") == 2);
  CHECK(order1.at("flavor") == "classical");
  const json& e = order1.at("entries");
  CHECK(entry_re(e, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(entry_re(e, 3) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(entry_re(e, 1) == 0.0);
  CHECK(entry_im(e, 2) == 0.0);

  CHECK(slurp(a / "spin_mc_order2.json") == slurp(b / "spin_mc_order2.json"));
  CHECK(slurp(a / "checks.json") == slurp(b / "checks.json"));
  CHECK(all_pass(load_json(a / "checks.json")));

  // A different seed moves the sampled tensors.
  const fs::path c = fresh_dir("spin_c");
  REQUIRE(run_cli("spin --seed 4 --traj 20000 --n 2 --out " + c.string()) == 0);
  CHECK(slurp(a / "spin_mc_order2.json") != slurp(c / "spin_mc_order2.json"));
}

TEST_CASE("ensemble run pins the order-1 tensor and the variance split") {
  const fs::path dir = fresh_dir("ensemble");
  spit(dir / "ensemble.json", kEnsembleFixture);
  REQUIRE(run_cli("ensemble --input " + (dir / "ensemble.json").string() + " --out " +
                  dir.string()) == 0);

  const json order1 = load_json(dir / "ensemble_order1.json");
  const json& e = order1.at("entries");
  CHECK(entry_re(e, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(entry_re(e, 3) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(entry_re(e, 1) == doctest::Approx(0.25).epsilon(1e-14));

  const json checks = load_json(dir / "checks.json");
  CHECK(all_pass(checks));
  CHECK(has_check(checks, "variance-split"));
  CHECK(has_check(checks, "descent-order2"));
}

TEST_CASE("qtensor run reproduces the Bell-state order-2 tensor") {
  const fs::path dir = fresh_dir("qtensor");
  spit(dir / "bell.json", kBellFixture);
  REQUIRE(run_cli("qtensor --input " + (dir / "bell.json").string() + " --n 2 --out " +
                  dir.string()) == 0);

  // T[i1 j1 i2 j2] = (1/4) delta_{i1 j2} delta_{j1 i2}, flat index
  // 8 i1 + 4 j1 + 2 i2 + j2.
  const json order2 = load_json(dir / "qtensor_order2.json");
  CHECK(order2.at("flavor") == "quantum");
  const json& e = order2.at("entries");
  for (int i1 = 0; i1 < 2; ++i1)
    for (int j1 = 0; j1 < 2; ++j1)
      for (int i2 = 0; i2 < 2; ++i2)
        for (int j2 = 0; j2 < 2; ++j2) {
          const std::size_t flat =
              static_cast<std::size_t>(8 * i1 + 4 * j1 + 2 * i2 + j2);
          const double want = (i1 == j2 && j1 == i2) ? 0.25 : 0.0;
          CHECK(entry_re(e, flat) == doctest::Approx(want).epsilon(1e-14));
          CHECK(entry_im(e, flat) == doctest::Approx(0.0).epsilon(1e-14));
        }
  CHECK(all_pass(load_json(dir / "checks.json")));
}

TEST_CASE("ito run is seed-deterministic and thread-count independent") {
  const fs::path dir = fresh_dir("ito");
  spit(dir / "model.json", kDephasingFixture);
  const std::string input = " --input " + (dir / "model.json").string();

  const fs::path a = fresh_dir("ito_a");
  const fs::path b = fresh_dir("ito_b");
  REQUIRE(run_cli("ito" + input + " --seed 11 --threads 3 --out " + a.string()) == 0);
  REQUIRE(run_cli("ito" + input + " --seed 11 --threads 1 --out " + b.string()) == 0);
  CHECK(slurp(a / "series.csv") == slurp(b / "series.csv"));
  CHECK(slurp(a / "rho_order2.json") == slurp(b / "rho_order2.json"));

  // First data row is t = 0: the pure equal superposition.
  std::istringstream csv(slurp(a / "series.csv"));
  std::string header, row0;
  std::getline(csv, header);
  std::getline(csv, row0);
  CHECK(header.rfind("t,re_0_0,im_0_0", 0) == 0);
  {
    std::istringstream cells(row0);
    std::string cell;
    std::vector<double> v;
    while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 17);  // t + 8 entry columns + 8 stderr columns
    CHECK(v[0] == 0.0);
    for (const int k : {1, 3, 5, 7}) CHECK(std::abs(v[static_cast<std::size_t>(k)] - 0.5) < 1e-12);
    for (const int k : {2, 4, 6, 8}) CHECK(v[static_cast<std::size_t>(k)] == 0.0);
  }

  const fs::path c = fresh_dir("ito_c");
  REQUIRE(run_cli("ito" + input + " --seed 12 --out " + c.string()) == 0);
  CHECK(slurp(a / "series.csv") != slurp(c / "series.csv"));

  const json checks = load_json(a / "checks.json");
  CHECK(all_pass(checks));
  CHECK(has_check(checks, "recorded-descent"));
  CHECK(has_check(checks, "mean-evolution"));
}

TEST_CASE("jump run tracks amplitude damping") {
  const fs::path dir = fresh_dir("jump");
  spit(dir / "model.json", kDampingFixture);
  REQUIRE(run_cli("jump --input " + (dir / "model.json").string() + " --seed 13 --out " +
                  dir.string()) == 0);

  // Excited population after t = 0.4 stays near exp(-0.4); the gate is a
  // loose statistical bound, the tight one lives in the engine tests.
  const json rho1 = load_json(dir / "rho_order1.json");
  const double p11 = entry_re(rho1.at("mean").at("entries"), 3);
  CHECK(std::abs(p11 - std::exp(-0.4)) < 0.05);
  CHECK(all_pass(load_json(dir / "checks.json")));

  const fs::path again = fresh_dir("jump_again");
  REQUIRE(run_cli("jump --input " + (dir / "model.json").string() + " --seed 13 --out " +
                  again.string()) == 0);
  CHECK(slurp(dir / "series.csv") == slurp(again / "series.csv"));
}

TEST_CASE("master run integrates the optical hierarchy and fails honestly when unstable") {
  const fs::path dir = fresh_dir("master");
  spit(dir / "model.json", kOpticalFixture);
  const std::string input = " --input " + (dir / "model.json").string();
  REQUIRE(run_cli("master" + input + " --out " + dir.string()) == 0);

  const json checks = load_json(dir / "checks.json");
  CHECK(all_pass(checks));
  CHECK(has_check(checks, "generator-descent"));
  CHECK(has_check(checks, "step-halving"));

  // Population rows sum to one along the whole series.
  std::istringstream csv(slurp(dir / "series.csv"));
  std::string line;
  std::getline(csv, line);  // header: t,re_0_0,im_0_0,re_0_1,...
  int rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 9);
    CHECK(std::abs(v[1] + v[7] - 1.0) < 1e-10);
    ++rows;
  }
  CHECK(rows == 6);

  // A wildly large step makes the integrator diverge; the harness reports
  // the failed invariants instead of masking them.
  const fs::path bad = fresh_dir("master_bad");
  REQUIRE(run_cli("master" + input + " --dt 2.0 --out " + bad.string()) == 1);
  CHECK(!all_pass(load_json(bad / "checks.json")));
}

TEST_CASE("collisional run writes the kernel table with an exactly zero diagonal") {
  const fs::path dir = fresh_dir("collisional");
  spit(dir / "gas.json", kGasFixture);
  REQUIRE(run_cli("collisional --input " + (dir / "gas.json").string() + " --out " +
                  dir.string()) == 0);
  CHECK(all_pass(load_json(dir / "checks.json")));

  std::istringstream csv(slurp(dir / "kernel.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "a,b,dx,dy,dz,re_F,im_F");
  int rows = 0;
  int diagonal_rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::vector<std::string> v;
    while (std::getline(cells, cell, ',')) v.push_back(cell);
    REQUIRE(v.size() == 7);
    if (v[0] == v[1]) {
      ++diagonal_rows;
      CHECK(v[5] == "0");
      CHECK(v[6] == "0");
    }
    ++rows;
  }
  CHECK(rows == 25);
  CHECK(diagonal_rows == 5);
}

TEST_CASE("reduce run contrasts the variants and reports Born-weight frequencies") {
  const fs::path dir = fresh_dir("reduce");
  spit(dir / "exp.json", kReduceFixture);
  const std::string input = " --input " + (dir / "exp.json").string();

  const fs::path red = fresh_dir("reduce_red");
  REQUIRE(run_cli("reduce" + input + " --seed 21 --threads 3 --out " + red.string()) == 0);
  const json reducing_checks = load_json(red / "checks.json");
  CHECK(all_pass(reducing_checks));
  CHECK(has_check(reducing_checks, "variance-monotone"));
  CHECK(has_check(reducing_checks, "mean-martingale"));

  const fs::path flat = fresh_dir("reduce_flat");
  REQUIRE(run_cli("reduce" + input + " --seed 21 --variant nonreducing --out " +
                  flat.string()) == 0);
  const json flat_checks = load_json(flat / "checks.json");
  CHECK(all_pass(flat_checks));
  CHECK(has_check(flat_checks, "variance-flat"));
  CHECK(!has_check(flat_checks, "variance-monotone"));

  const fs::path rerun = fresh_dir("reduce_rerun");
  REQUIRE(run_cli("reduce" + input + " --seed 21 --threads 1 --out " + rerun.string()) == 0);
  CHECK(slurp(red / "report.csv") == slurp(rerun / "report.csv"));

  // Longer horizon: trajectories settle and the outcome table appears.
  const fs::path born = fresh_dir("reduce_born");
  spit(born / "exp.json", kBornFixture);
  REQUIRE(run_cli("reduce --input " + (born / "exp.json").string() + " --seed 29 --out " +
                  born.string()) == 0);
  const json born_checks = load_json(born / "checks.json");
  CHECK(all_pass(born_checks));
  CHECK(has_check(born_checks, "outcome-frequencies"));
  const json outcomes = load_json(born / "outcomes.json");
  REQUIRE(outcomes.at("outcomes").size() == 2);
  const json& low = outcomes.at("outcomes").at(0);   // eigenvalue -1
  const json& high = outcomes.at("outcomes").at(1);  // eigenvalue +1
  CHECK(low.at("value") == doctest::Approx(-1.0));
  CHECK(high.at("value") == doctest::Approx(1.0));
  CHECK(low.at("weight") == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(high.at("weight") == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(std::abs(low.at("frequency").get<double>() - 0.7) < 0.12);
  CHECK(std::abs(high.at("frequency").get<double>() - 0.3) < 0.12);
  CHECK(outcomes.at("converged").get<std::size_t>() * 2 >=
        outcomes.at("total").get<std::size_t>());
}

TEST_CASE("check-descent dispatches on the input kind") {
  const fs::path dir = fresh_dir("descent");
  spit(dir / "spin.json", R"({"type": "spin"})");
  spit(dir / "ensemble.json", kEnsembleFixture);
  spit(dir / "bell.json", kBellFixture);

  REQUIRE(run_cli("check-descent --input " + (dir / "spin.json").string() + " --out " +
                  (dir / "s").string()) == 0);
  const json spin_checks = load_json(dir / "s" / "checks.json");
  CHECK(all_pass(spin_checks));
  CHECK(spin_checks.at(0).at("module") == "spin-isotropic");

  REQUIRE(run_cli("check-descent --input " + (dir / "ensemble.json").string() + " --out " +
                  (dir / "e").string()) == 0);
  CHECK(all_pass(load_json(dir / "e" / "checks.json")));

  REQUIRE(run_cli("check-descent --input " + (dir / "bell.json").string() + " --n 2 --out " +
                  (dir / "b").string()) == 0);
  const json bell_checks = load_json(dir / "b" / "checks.json");
  CHECK(all_pass(bell_checks));
  CHECK(bell_checks.at(0).at("module") == "quantum-tensor");

  // A mixed total state admits no chain descent; the harness refuses the
  // input instead of emitting a vacuous report.
  std::string mixed = kBellFixture;
  const auto pos = mixed.find("true");
  REQUIRE(pos != std::string::npos);
  mixed.replace(pos, 4, "false");
  spit(dir / "mixed.json", mixed);
  CHECK(run_cli("check-descent --input " + (dir / "mixed.json").string() + " --out " +
                (dir / "m").string()) == 2);
}

TEST_CASE("error paths exit with the documented codes") {
  const fs::path dir = fresh_dir("errors");
  spit(dir / "bad.json", R"({"dim": 2, broken)");
  spit(dir / "model.json", kDephasingFixture);
  spit(dir / "optical.json", kOpticalFixture);
  spit(dir / "redirect.json",
       R"({"spec": {"variant": "collisional"}, "rho0": [[[1,0]]]})");

  CHECK(run_cli("ensemble --input " + (dir / "bad.json").string() + " --out " + dir.string()) ==
        2);
  CHECK(run_cli("ito --input " + (dir / "model.json").string() + " --out " + dir.string()) ==
        2);  // --seed is mandatory on stochastic runs
  CHECK(run_cli("spin --seed 1 --frobnicate") == 2);
  CHECK(run_cli("master --input " + (dir / "redirect.json").string() + " --out " +
                dir.string()) == 2);
  CHECK(run_cli("") == 2);  // a subcommand is required

  // The memory cap maps to its own exit code. A dim-16 Brownian spec at
  // order 3 asks for a 268 MB tensor, far beyond a 4 MB budget.
  std::string cl16 = R"({"spec": {"variant": "caldeira-leggett", "mass": 1.0,
    "damping": 0.2, "kT": 2.0, "dim": 16}, "rho0": [)";
  for (int i = 0; i < 16; ++i) {
    cl16 += i ? ",[" : "[";
    for (int j = 0; j < 16; ++j) {
      cl16 += j ? "," : "";
      cl16 += (i == 0 && j == 0) ? "[1,0]" : "[0,0]";
    }
    cl16 += "]";
  }
  cl16 += R"(], "dt": 0.002, "steps": 10})";
  spit(dir / "cl16.json", cl16);
  CHECK(run_cli("master --input " + (dir / "cl16.json").string() + " --n 3 --out " +
                dir.string(),
                "NOISETENSOR_BUDGET_MB=4") == 3);
}
