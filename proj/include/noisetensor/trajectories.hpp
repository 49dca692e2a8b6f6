#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace noisetensor {

// Runs n_traj independent trajectories partitioned into n_batches contiguous
// index blocks. A batch is the unit of parallel work: each batch is executed
// by exactly one worker, and trajectories inside a batch run in index order.
// Together with per-trajectory RNG streams this makes every accumulated
// result independent of the thread count and of scheduling.
//
// run(traj_index, batch_index) is invoked once per trajectory. It may write
// without locks into any per-batch slot addressed by batch_index.
template <typename F>
void for_each_trajectory(std::size_t n_traj, int n_batches, int n_threads, F&& run) {
  if (n_batches < 1) throw std::invalid_argument("need at least one batch");
  if (n_traj < static_cast<std::size_t>(n_batches))
    throw std::invalid_argument("need at least one trajectory per batch");
  const auto b_total = static_cast<std::size_t>(n_batches);
  const auto body = [&](std::size_t b) {
    const std::size_t lo = n_traj * b / b_total;
    const std::size_t hi = n_traj * (b + 1) / b_total;
    for (std::size_t k = lo; k < hi; ++k) run(k, static_cast<int>(b));
  };

  if (n_threads <= 1) {
    for (std::size_t b = 0; b < b_total; ++b) body(b);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const auto worker = [&] {
    try {
      for (std::size_t b; (b = next.fetch_add(1)) < b_total;) body(b);
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      next.store(b_total);
    }
  };
  const int pool_size = std::min(n_threads, n_batches);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(pool_size));
  for (int t = 0; t < pool_size; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Batch index of a trajectory under the same partition used above; inverse of
// the block bounds floor(n_traj * b / n_batches).
inline int batch_of(std::size_t traj_index, std::size_t n_traj, int n_batches) {
  const auto b_total = static_cast<std::size_t>(n_batches);
  return static_cast<int>((traj_index * b_total + b_total - 1) / n_traj);
}

}  // namespace noisetensor
