// Compares the serial and OpenMP population-evaluation paths of the trainer
// on the default mismatch scenario and checks they agree bit for bit.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fbl/harness.hpp"
#include "fbl/rng.hpp"

int main() {
  fbl::ExperimentConfig cfg;
  cfg.out_dir = "bench_out";
  fbl::ExperimentSetup setup = fbl::prepare_experiment(cfg);

  const std::size_t population = 32;
  const std::size_t episodes = 2;
  const std::size_t repeats = 5;

  fbl::CorrectionPolicy policy =
      fbl::CorrectionPolicy::make(cfg.policy_output_gain, cfg.policy_hidden);
  const std::size_t dim = policy.net.param_count();
  std::vector<fbl::Vec> members(population, fbl::Vec(dim));
  fbl::Rng rng(42);
  for (auto& m : members)
    for (double& p : m) p = 0.05 * rng.normal();

  std::vector<double> serial_returns, parallel_returns;
  auto t0 = std::chrono::steady_clock::now();
  for (std::size_t r = 0; r < repeats; ++r)
    fbl::evaluate_population_serial(setup.scenario, members, episodes, 0.01,
                                    7, r, serial_returns);
  auto t1 = std::chrono::steady_clock::now();
  for (std::size_t r = 0; r < repeats; ++r)
    fbl::evaluate_population_parallel(setup.scenario, members, episodes, 0.01,
                                      7, r, parallel_returns);
  auto t2 = std::chrono::steady_clock::now();

  const double serial_s = std::chrono::duration<double>(t1 - t0).count();
  const double parallel_s = std::chrono::duration<double>(t2 - t1).count();

  bool identical = serial_returns.size() == parallel_returns.size();
  for (std::size_t i = 0; identical && i < serial_returns.size(); ++i)
    identical = serial_returns[i] == parallel_returns[i];

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("population evaluation, %zu members x %zu episodes x %zu repeats\n",
              population, episodes, repeats);
  std::printf("  serial:   %.3f s\n", serial_s);
  std::printf("  openmp:   %.3f s  (%d threads, speedup %.2fx)\n", parallel_s,
              threads, serial_s / parallel_s);
  std::printf("  bitwise identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
