#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "noisetensor/budget.hpp"
#include "noisetensor/pair_tensor.hpp"
#include "noisetensor/rng.hpp"
#include "noisetensor/stats.hpp"
#include "noisetensor/trajectories.hpp"
#include "noisetensor/types.hpp"

namespace noisetensor {

struct SdeConfig {
  double dt = 1e-3;
  std::size_t steps = 1000;
  std::size_t n_traj = 1000;
  std::uint64_t seed = 0;
  bool renormalize = true;
  std::size_t record_every = 100;
  int n_batches = 20;
};

struct HierarchySeries {
  std::vector<double> times;
  // points[time_index][order-1] holds the order-(order) estimate.
  std::vector<std::vector<TensorEstimate>> points;
};

// Shared ensemble driver for the stochastic unravelings. Evolves cfg.n_traj
// trajectories from psi0 under step(psi, step_index, rng) and records
// batch-mean estimates of rho^(1..max_order) every cfg.record_every steps
// (t = 0 and the final step always included). Estimates are trajectory
// averages of outer powers of psi psi^dag, so descent contractions hold
// exactly at each recorded time when trajectories stay normalized.
//
// Trajectory j draws from the counter-based stream (cfg.seed, stream_label, j)
// and batches are merged in index order, so results are independent of
// n_threads and scheduling.
template <typename Step>
HierarchySeries run_hierarchy(const Vector& psi0, const SdeConfig& cfg, int max_order,
                              int n_threads, const char* stream_label, Step&& step) {
  if (max_order < 1) throw std::invalid_argument("order must be at least 1");
  if (cfg.dt <= 0) throw std::invalid_argument("dt must be positive");
  if (cfg.steps == 0) throw std::invalid_argument("need at least one step");
  if (cfg.record_every == 0) throw std::invalid_argument("record_every must be positive");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw std::invalid_argument("psi0 must be normalized");

  const auto d = static_cast<std::size_t>(psi0.size());
  std::vector<std::size_t> record_steps;
  for (std::size_t s = 0; s <= cfg.steps; s += cfg.record_every) record_steps.push_back(s);
  if (record_steps.back() != cfg.steps) record_steps.push_back(cfg.steps);

  std::size_t flat_total = 0;
  std::size_t dpow = 1;
  for (int o = 1; o <= max_order; ++o) {
    dpow *= d * d;
    flat_total += dpow;
  }
  require_budget(record_steps.size() * flat_total * static_cast<std::size_t>(cfg.n_batches) *
                     sizeof(Cx),
                 "trajectory accumulators");

  // One accumulator per (record time, order).
  std::vector<std::vector<BatchVectorStats>> acc(record_steps.size());
  for (auto& per_time : acc) {
    std::size_t sz = 1;
    for (int o = 1; o <= max_order; ++o) {
      sz *= d * d;
      per_time.emplace_back(cfg.n_batches, static_cast<Eigen::Index>(sz));
    }
  }

  for_each_trajectory(cfg.n_traj, cfg.n_batches, n_threads, [&](std::size_t traj, int batch) {
    RngStream rng = RngStream::labeled(cfg.seed, stream_label, traj);
    Vector psi = psi0;
    const auto dim = static_cast<Eigen::Index>(d);
    Vector r1(dim * dim);
    std::size_t next_record = 0;
    for (std::size_t s = 0; s <= cfg.steps; ++s) {
      if (next_record < record_steps.size() && record_steps[next_record] == s) {
        for (Eigen::Index i = 0; i < dim; ++i)
          for (Eigen::Index j = 0; j < dim; ++j) r1(i * dim + j) = psi(i) * std::conj(psi(j));
        Vector flat = r1;
        acc[next_record][0].add(batch, flat);
        for (int o = 2; o <= max_order; ++o) {
          Vector bigger(flat.size() * r1.size());
          for (Eigen::Index i = 0; i < flat.size(); ++i)
            bigger.segment(i * r1.size(), r1.size()) = flat(i) * r1;
          flat = std::move(bigger);
          acc[next_record][static_cast<std::size_t>(o - 1)].add(batch, flat);
        }
        ++next_record;
      }
      if (s == cfg.steps) break;
      rng.set_step(s);
      psi = step(psi, s, rng);
    }
  });

  HierarchySeries series;
  series.times.reserve(record_steps.size());
  series.points.reserve(record_steps.size());
  for (std::size_t t = 0; t < record_steps.size(); ++t) {
    series.times.push_back(static_cast<double>(record_steps[t]) * cfg.dt);
    std::vector<TensorEstimate> per_order;
    for (int o = 1; o <= max_order; ++o) {
      PairTensor mean(o, static_cast<int>(d), Flavor::classical);
      const Vector m = acc[t][static_cast<std::size_t>(o - 1)].mean();
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] = m(static_cast<Eigen::Index>(k));
      per_order.push_back({std::move(mean), acc[t][static_cast<std::size_t>(o - 1)].std_error()});
    }
    series.points.push_back(std::move(per_order));
  }
  return series;
}

}  // namespace noisetensor
