// Benchmark: OpenMP kernels against their serial reference implementations.
// The two paths must agree bit for bit; the table reports times and speedup.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "truncest/experiments.hpp"
#include "truncest/reference.hpp"
#include "truncest/rng.hpp"
#include "truncest/trunc_sampler.hpp"

using namespace truncest;

namespace {

double time_once(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) best = std::min(best, time_once(fn));
  return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-24s %10.3f ms %10.3f ms   x%.2f   %s\n", name,
              serial * 1e3, parallel * 1e3, serial / parallel,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int64_t n = argc > 1 ? std::atol(argv[1]) : 200000;
  std::printf("threads: %d, n = %ld\n\n", omp_get_max_threads(), n);
  std::printf("%-24s %13s %13s %7s\n", "kernel", "serial", "openmp", "speedup");

  const NaturalParams truth = gen_chain_precision(10, 0.2);
  const GaussianParams moment = to_moment(truth);
  const TruncationOracle oracle = gen_box_truncation(10, -2.0, 2.0);
  FitConfig cfg;
  cfg.seed = 1;

  {
    SampleBatch a, b;
    const double ts = best_of(3, [&] {
      a = serial::sample_truncated_mvn(moment, oracle, n / 4, cfg);
    });
    const double tp = best_of(3, [&] {
      b = sample_truncated_mvn(moment, oracle, n / 4, cfg);
    });
    report("sample_truncated_mvn", ts, tp,
           a.data == b.data && a.proposals_used == b.proposals_used);
  }

  {
    SurvivalEstimate a, b;
    const double ts =
        best_of(3, [&] { a = serial::estimate_survival(moment, oracle, n, 2); });
    const double tp =
        best_of(3, [&] { b = estimate_survival(moment, oracle, n, 2); });
    report("estimate_survival", ts, tp, a.alpha_hat == b.alpha_hat);
  }

  const SampleBatch batch = sample_truncated_mvn(moment, oracle, n / 2, cfg);
  {
    EmpiricalMoments a, b;
    const double ts =
        best_of(5, [&] { a = serial::empirical_moments(batch.data); });
    const double tp = best_of(5, [&] { b = empirical_moments(batch.data); });
    report("empirical_moments", ts, tp,
           a.sigma_bar == b.sigma_bar && a.mu_bar == b.mu_bar);
  }

  {
    const auto inst = gen_regression_instance(
        n / 10, 100, 3, DesignScheme::kGaussClipped, 1.0, 1.0,
        IntervalUnion::at_most(1.0), 3);
    Vector omega = Vector::Zero(100);
    omega[1] = 0.4;
    omega[50] = -0.2;
    Vector a, b;
    const double ts = best_of(3, [&] { a = serial::reg_gradient(omega, inst); });
    const double tp = best_of(3, [&] { b = reg_gradient(omega, inst); });
    report("reg_gradient", ts, tp, a == b);
  }
  return 0;
}
