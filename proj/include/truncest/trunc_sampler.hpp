#pragma once

#include <cstdint>

#include "truncest/model_types.hpp"

namespace truncest {

struct SampleBatch {
  Matrix data;                 // n x d, every row inside the generating set
  double accept_rate = 1.0;    // n / proposals_used
  int64_t proposals_used = 0;

  int64_t n() const { return data.rows(); }
  int d() const { return static_cast<int>(data.cols()); }
};

struct Moments1D {
  double mass = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

struct EmpiricalMoments {
  Vector mu_bar;
  Matrix second_moment_bar;  // (1/n) sum x x^T
  Matrix sigma_bar;          // second_moment_bar - mu_bar mu_bar^T
};

/// i.i.d. draws from N(mu, Sigma, S) by proposing from the untruncated
/// Gaussian and accepting members of S. Deterministic given cfg.seed and
/// independent of the number of threads: sample i consumes only its own
/// counter stream. Throws SurvivalTooLow when a single draw needs more than
/// cfg.max_rejects_per_sample proposals.
SampleBatch sample_truncated_mvn(const GaussianParams& p,
                                 const TruncationOracle& oracle, int64_t n,
                                 const FitConfig& cfg);

struct SurvivalEstimate {
  double alpha_hat = 0.0;
  double stderr = 0.0;
};

/// Fraction of m untruncated proposals that land in S, with its binomial
/// standard error. alpha_hat = 0 is a valid return; callers decide.
SurvivalEstimate estimate_survival(const GaussianParams& p,
                                   const TruncationOracle& oracle, int64_t m,
                                   uint64_t seed);

Vector empirical_mean(const Matrix& data);

/// Mean, raw second moment and covariance of the rows. Requires n >= 2.
EmpiricalMoments empirical_moments(const Matrix& data);

/// Exact mass/mean/variance of N(m, 1) restricted to an interval union.
/// Throws SurvivalTooLow when the set's mass under this mean falls below
/// 1e-300 (numerically empty).
Moments1D moments_1d(double m, const IntervalUnion& s);

/// Same for N(mu, sigma^2); sigma > 0.
Moments1D moments_gauss_1d(double mu, double sigma, const IntervalUnion& s);

/// n draws from N(m, 1, S). Interval-union oracles use exact inverse-CDF
/// sampling within segments chosen proportionally to segment mass; generic
/// oracles fall back to capped rejection.
Vector sample_truncated_normal_1d(double m, const TruncationOracle& s,
                                  int64_t n, uint64_t seed,
                                  int64_t max_rejects = 1000000);

class CounterRng;

/// One inverse-CDF draw from N(m, 1, S) for an interval union, consuming two
/// uniforms from rng.
double sample_truncated_normal_scalar(double m, const IntervalUnion& s,
                                      CounterRng& rng);

namespace detail {

/// Lower-triangular L with sigma = L L^T; throws SingularMatrix.
Matrix cholesky_factor(const Matrix& sigma);

/// Fixed reduction chunk so parallel sums are independent of thread count.
inline constexpr int64_t kMomentChunk = 1024;

}  // namespace detail

}  // namespace truncest
