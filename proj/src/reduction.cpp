#include "noisetensor/reduction.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "noisetensor/budget.hpp"
#include "noisetensor/ito.hpp"
#include "noisetensor/rng.hpp"
#include "noisetensor/stats.hpp"
#include "noisetensor/trajectories.hpp"

namespace noisetensor::reduction {

namespace {

// Mean and standard error over per-batch means.
std::pair<double, double> batch_summary(const std::vector<double>& bm) {
  const auto b = static_cast<double>(bm.size());
  double m = 0.0;
  for (const double v : bm) m += v;
  m /= b;
  double ss = 0.0;
  for (const double v : bm) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (b - 1.0) / b)};
}

}  // namespace

ReductionExperiment::ReductionExperiment(Matrix a_in, Variant v, Vector psi0_in,
                                         const SdeConfig& cfg)
    : a(std::move(a_in)), variant(v), psi0(std::move(psi0_in)), sde(cfg) {
  if (a.rows() < 1 || a.rows() != a.cols())
    throw std::invalid_argument("observable must be a square matrix");
  if (hermiticity_defect(a) > kDefaultTol)
    throw std::invalid_argument("observable must be Hermitian");
  if (psi0.size() != a.rows())
    throw std::invalid_argument("initial state dimension must match the observable");
  if (std::abs(psi0.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("initial state must be normalized");
}

LindbladModel reduction_model(const ReductionExperiment& exp) {
  const int d = exp.dim();
  Matrix u = Matrix::Identity(1, 1);  // real noise channel
  const Cx scale = exp.variant == Variant::reducing ? Cx(1.0, 0.0) : Cx(0.0, 1.0);
  return LindbladModel(Matrix::Zero(d, d), {Matrix(scale * exp.a)}, u);
}

ReductionRun run_reduction(const ReductionExperiment& exp, int n_threads) {
  const SdeConfig& cfg = exp.sde;
  if (cfg.dt <= 0) throw std::invalid_argument("dt must be positive");
  if (cfg.steps == 0) throw std::invalid_argument("need at least one step");
  if (cfg.record_every == 0) throw std::invalid_argument("record_every must be positive");

  const LindbladModel model = reduction_model(exp);
  const ito::WienerSampler sampler(model.u);

  std::vector<std::size_t> record_steps;
  for (std::size_t s = 0; s <= cfg.steps; s += cfg.record_every) record_steps.push_back(s);
  if (record_steps.back() != cfg.steps) record_steps.push_back(cfg.steps);
  const std::size_t n_rec = record_steps.size();

  require_budget(n_rec * cfg.n_traj * 2 * sizeof(double), "reduction samples");

  std::vector<BatchStats> v_stats(n_rec, BatchStats(cfg.n_batches));
  std::vector<BatchStats> a_stats(n_rec, BatchStats(cfg.n_batches));
  std::vector<BatchStats> rate_stats(n_rec, BatchStats(cfg.n_batches));

  ReductionRun run;
  run.variant = exp.variant;
  run.n_batches = cfg.n_batches;
  run.v_samples.assign(n_rec, std::vector<double>(cfg.n_traj, 0.0));
  run.a_samples.assign(n_rec, std::vector<double>(cfg.n_traj, 0.0));

  const char* label = exp.variant == Variant::reducing ? "reduce" : "dephase";
  const bool reducing = exp.variant == Variant::reducing;

  for_each_trajectory(cfg.n_traj, cfg.n_batches, n_threads, [&](std::size_t traj, int batch) {
    RngStream rng = RngStream::labeled(cfg.seed, label, traj);
    Vector psi = exp.psi0;
    std::size_t next_record = 0;
    for (std::size_t s = 0; s <= cfg.steps; ++s) {
      if (next_record < n_rec && record_steps[next_record] == s) {
        const Vector w = exp.a * psi;
        const double mean_a = (psi.adjoint() * w)(0).real();
        const double v = w.squaredNorm() - mean_a * mean_a;
        // Drift of E[V]: -(Tr([rho,[rho,A]] A))^2, which for a unit pure
        // state is -(2V)^2. The anti-Hermitian coupling's trace vanishes by
        // cyclicity, so its prediction is exactly zero.
        const double pred = reducing ? -4.0 * v * v : 0.0;
        v_stats[next_record].add(batch, v);
        a_stats[next_record].add(batch, mean_a);
        rate_stats[next_record].add(batch, pred);
        run.v_samples[next_record][traj] = v;
        run.a_samples[next_record][traj] = mean_a;
        ++next_record;
      }
      if (s == cfg.steps) break;
      rng.set_step(s);
      psi = ito::step_trajectory(model, sampler, psi, cfg.dt, rng, true);
    }
  });

  run.times.reserve(n_rec);
  run.series.reserve(n_rec);
  run.batch_v.assign(n_rec, std::vector<double>(static_cast<std::size_t>(cfg.n_batches)));
  run.batch_rate.assign(n_rec, std::vector<double>(static_cast<std::size_t>(cfg.n_batches)));
  for (std::size_t r = 0; r < n_rec; ++r) {
    VariancePoint pt;
    pt.time = static_cast<double>(record_steps[r]) * cfg.dt;
    pt.mean_v = v_stats[r].mean();
    pt.se_v = v_stats[r].std_error();
    pt.mean_a = a_stats[r].mean();
    pt.se_a = a_stats[r].std_error();
    pt.mean_rate = rate_stats[r].mean();
    pt.se_rate = rate_stats[r].std_error();
    run.times.push_back(pt.time);
    run.series.push_back(pt);
    for (int b = 0; b < cfg.n_batches; ++b) {
      run.batch_v[r][static_cast<std::size_t>(b)] = v_stats[r].batch_mean(b);
      run.batch_rate[r][static_cast<std::size_t>(b)] = rate_stats[r].batch_mean(b);
    }
  }
  return run;
}

RateCheck variance_rate_check(const ReductionRun& run, std::size_t index) {
  const std::size_t n = run.times.size();
  if (n < 3) throw std::invalid_argument("need at least three recorded times");
  if (index >= n) throw std::invalid_argument("record index out of range");
  if (run.batch_v.size() != n || run.batch_rate.size() != n)
    throw std::invalid_argument("run is missing batch summaries");

  // Quadratic fit through the three records nearest the requested one,
  // differentiated at the requested time. Handles the possibly shorter final
  // interval without assuming uniform spacing.
  const std::size_t lo = std::min(index > 0 ? index - 1 : 0, n - 3);
  const double x0 = run.times[lo], x1 = run.times[lo + 1], x2 = run.times[lo + 2];
  const double x = run.times[index];
  const std::array<double, 3> w = {
      (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2)),
      (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2)),
      (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1)),
  };

  const std::size_t nb = run.batch_v[index].size();
  std::vector<double> slope(nb), pred(nb), delta(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    slope[b] = w[0] * run.batch_v[lo][b] + w[1] * run.batch_v[lo + 1][b] +
               w[2] * run.batch_v[lo + 2][b];
    pred[b] = run.batch_rate[index][b];
    delta[b] = slope[b] - pred[b];
  }

  RateCheck out;
  out.time = x;
  std::tie(out.measured, out.se_measured) = batch_summary(slope);
  std::tie(out.predicted, out.se_predicted) = batch_summary(pred);
  std::tie(out.difference, out.se_difference) = batch_summary(delta);
  return out;
}

OutcomeTable outcome_statistics(const ReductionExperiment& exp, const ReductionRun& run,
                                double epsilon) {
  if (exp.variant != Variant::reducing || run.variant != Variant::reducing)
    throw std::invalid_argument("outcome statistics require the reducing variant");
  if (epsilon <= 0) throw std::invalid_argument("threshold must be positive");
  if (run.v_samples.empty() || run.v_samples.back().empty())
    throw std::invalid_argument("run holds no trajectory samples");

  Eigen::SelfAdjointEigenSolver<Matrix> es(exp.a);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const int d = exp.dim();
  const double spread = es.eigenvalues()(d - 1) - es.eigenvalues()(0);
  const double gap_tol = 1e-8 * std::max(1.0, spread);

  OutcomeTable table;
  // Cluster the (sorted) eigenvalues and pool each cluster's initial weight.
  for (int k = 0; k < d; ++k) {
    const double lam = es.eigenvalues()(k);
    const double amp = std::norm((es.eigenvectors().col(k).adjoint() * exp.psi0)(0));
    if (table.values.empty() || lam - table.values.back() > gap_tol) {
      table.values.push_back(lam);
      table.weights.push_back(amp);
      table.counts.push_back(0);
    } else {
      table.weights.back() += amp;
    }
  }

  const std::vector<double>& final_v = run.v_samples.back();
  const std::vector<double>& final_a = run.a_samples.back();
  table.total = final_v.size();
  for (std::size_t j = 0; j < final_v.size(); ++j) {
    if (final_v[j] >= epsilon) continue;
    std::size_t best = 0;
    for (std::size_t c = 1; c < table.values.size(); ++c)
      if (std::abs(final_a[j] - table.values[c]) < std::abs(final_a[j] - table.values[best]))
        best = c;
    table.counts[best] += 1;
    table.converged += 1;
  }
  if (table.converged == 0) throw std::runtime_error("no trajectory converged below threshold");

  const auto n = static_cast<double>(table.converged);
  for (std::size_t c = 0; c < table.values.size(); ++c) {
    const double f = static_cast<double>(table.counts[c]) / n;
    table.frequencies.push_back(f);
    table.se.push_back(std::sqrt(f * (1.0 - f) / n));
  }
  return table;
}

}  // namespace noisetensor::reduction
