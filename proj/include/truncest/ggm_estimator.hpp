#pragma once

#include <cstdint>
#include <optional>

#include "truncest/model_types.hpp"
#include "truncest/trunc_sampler.hpp"

namespace truncest {

struct SupportPattern {
  Eigen::MatrixXi bits;  // symmetric 0/1
};

struct GGMFitState {
  NaturalParams params;
  int64_t iteration = 0;
  std::optional<NaturalParams> running_average;
  double last_gradient_norm_inf = 0.0;
};

struct GlassoGradient {
  Matrix theta;
  Vector v;

  double inf_norm() const;      // over both blocks
  double inf_norm_off() const;  // theta off-diagonal entries and v
};

/// log Z(Theta, v) for the truncated exponential family: the closed-form
/// Gaussian normalizer plus log of the Monte-Carlo survival estimate at the
/// implied (mu, Sigma). Throws SurvivalTooLow when no proposal lands in S.
double log_partition_estimate(const NaturalParams& q,
                              const TruncationOracle& oracle, int64_t m_mc,
                              uint64_t seed);

/// Penalized finite-sample objective: data quadratic terms plus the log
/// partition plus lambda * ||Theta||_{1,off}.
double glasso_objective(const NaturalParams& q, const SampleBatch& batch,
                        const TruncationOracle& oracle, double lambda,
                        int64_t m_mc, uint64_t seed);

/// Stochastic gradient: data moments from the minibatch minus model moments
/// from m_mc fresh truncated draws at q. g_theta comes back symmetrized.
GlassoGradient glasso_stoch_gradient(const NaturalParams& q,
                                     const SampleBatch& minibatch,
                                     const TruncationOracle& oracle,
                                     int64_t m_mc, uint64_t seed);

/// d = 1 gradient with exact truncated moments instead of Monte Carlo;
/// the closed-form leg of the dual-route gradient check.
GlassoGradient glasso_gradient_exact_1d(const NaturalParams& q,
                                        const IntervalUnion& s,
                                        const SampleBatch& batch);

/// d = 1 unpenalized objective with the exact log partition.
double glasso_objective_exact_1d(const NaturalParams& q,
                                 const IntervalUnion& s,
                                 const SampleBatch& batch);

/// Symmetrize, clamp the spectrum to >= floor, reconstruct. Idempotent.
Matrix project_psd(const Matrix& theta, double floor);

/// Projected stochastic gradient descent on the penalized objective. Each
/// iteration resamples one data row (with replacement) and draws cfg.mc_batch
/// model samples at the current iterate; the l1 penalty enters through its
/// subgradient. Deterministic given cfg.seed. Truth, when given, feeds the
/// per-snapshot error trace.
EstimateReport fit_ggm_psgd(const SampleBatch& batch,
                            const TruncationOracle& oracle,
                            const FitConfig& cfg,
                            const std::optional<NaturalParams>& truth = {});

/// Entries inside [lo, hi] (closed) become 0, everything else 1.
SupportPattern binarize(const Matrix& theta_hat, double lo, double hi);

int hamming(const SupportPattern& a, const SupportPattern& b);

/// Theorem-style error pair: ||I - S*^{-1/2} S~ S*^{-1/2}||_F and
/// ||S*^{-1/2}(mu* - mu~)||_2, via the symmetric square root of truth.sigma.
std::pair<double, double> frobenius_error(const GaussianParams& estimate,
                                          const GaussianParams& truth);

/// min(kappa*r_prime, kappa*eps) / (12 sqrt(nz + d)); the analysis constants
/// kappa and r_prime are caller-supplied, never estimated from data.
double lambda_analytic(double kappa, double r_prime, int nz, int d,
                       double eps);

/// c0 * sqrt(log(d) / n).
double lambda_data_driven(int64_t n, int d, double c0 = 0.5);

/// Full-batch gradient at given parameters (both moment blocks).
GlassoGradient glasso_full_gradient(const NaturalParams& at,
                                    const SampleBatch& batch,
                                    const TruncationOracle& oracle,
                                    int64_t m_mc, uint64_t seed);

/// ||grad l_n(Theta*, v*)||_inf estimate; shrinks with n.
double gradient_concentration_diagnostic(const NaturalParams& truth,
                                         const SampleBatch& batch,
                                         const TruncationOracle& oracle,
                                         int64_t m_mc, uint64_t seed);

/// Diagnostic for the lambda lower-bound hypothesis:
/// lambda >= 2 ||grad l_n(truth)||_inf.
bool lambda_validity_check(double lambda, const NaturalParams& truth,
                           const SampleBatch& batch,
                           const TruncationOracle& oracle, int64_t m_mc,
                           uint64_t seed);

}  // namespace truncest
