#include "truncest/reference.hpp"

#include <cassert>
#include <cmath>

#include "truncest/rng.hpp"

namespace truncest::serial {

SampleBatch sample_truncated_mvn(const GaussianParams& p,
                                 const TruncationOracle& oracle, int64_t n,
                                 const FitConfig& cfg) {
  if (n < 1) throw std::invalid_argument("sample_truncated_mvn: n >= 1");
  if (oracle.dimension() != p.dim()) {
    throw std::invalid_argument("sample_truncated_mvn: dimension mismatch");
  }
  const Matrix L = truncest::detail::cholesky_factor(p.sigma);
  const Eigen::Index d = p.dim();

  SampleBatch batch;
  batch.data.resize(n, d);
  int64_t total_proposals = 0;
  Vector z(d), x(d);
  for (int64_t i = 0; i < n; ++i) {
    CounterRng rng(cfg.seed, RngPurpose::kMvnProposal,
                   static_cast<uint64_t>(i));
    bool accepted = false;
    for (int64_t attempt = 0; attempt < cfg.max_rejects_per_sample; ++attempt) {
      for (Eigen::Index k = 0; k < d; ++k) z[k] = rng.normal();
      x.noalias() = p.mu;
      x.noalias() += L * z;
      ++total_proposals;
      if (oracle.contains(x)) {
        batch.data.row(i) = x;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw SurvivalTooLow(
          "rejection sampler exceeded max_rejects_per_sample");
    }
  }
  batch.proposals_used = total_proposals;
  batch.accept_rate =
      static_cast<double>(n) / static_cast<double>(total_proposals);
  return batch;
}

SurvivalEstimate estimate_survival(const GaussianParams& p,
                                   const TruncationOracle& oracle, int64_t m,
                                   uint64_t seed) {
  if (m < 100) throw std::invalid_argument("estimate_survival: m >= 100");
  const Matrix L = truncest::detail::cholesky_factor(p.sigma);
  const Eigen::Index d = p.dim();
  int64_t accepted = 0;
  Vector z(d), x(d);
  for (int64_t j = 0; j < m; ++j) {
    CounterRng rng(seed, RngPurpose::kSurvival, static_cast<uint64_t>(j));
    for (Eigen::Index k = 0; k < d; ++k) z[k] = rng.normal();
    x.noalias() = p.mu;
    x.noalias() += L * z;
    if (oracle.contains(x)) ++accepted;
  }
  SurvivalEstimate est;
  est.alpha_hat = static_cast<double>(accepted) / static_cast<double>(m);
  est.stderr = std::sqrt(est.alpha_hat * (1.0 - est.alpha_hat) /
                         static_cast<double>(m));
  return est;
}

EmpiricalMoments empirical_moments(const Matrix& data) {
  if (data.rows() < 2) {
    throw std::invalid_argument("empirical_moments: covariance needs n >= 2");
  }
  const int64_t n = data.rows();
  const Eigen::Index d = data.cols();
  const int64_t chunk = truncest::detail::kMomentChunk;
  const int64_t nchunks = (n + chunk - 1) / chunk;

  Vector sum = Vector::Zero(d);
  Matrix outer = Matrix::Zero(d, d);
  // Chunked accumulation order matches the parallel kernel bit for bit.
  for (int64_t c = 0; c < nchunks; ++c) {
    const int64_t lo = c * chunk;
    const int64_t hi = std::min(n, lo + chunk);
    Vector acc = Vector::Zero(d);
    Matrix pout = Matrix::Zero(d, d);
    for (int64_t i = lo; i < hi; ++i) {
      const auto row = data.row(i);
      acc += row.transpose();
      pout.noalias() += row.transpose() * row;
    }
    sum += acc;
    outer += pout;
  }

  EmpiricalMoments em;
  em.mu_bar = sum / static_cast<double>(n);
  em.second_moment_bar = outer / static_cast<double>(n);
  em.sigma_bar = em.second_moment_bar - em.mu_bar * em.mu_bar.transpose();
  return em;
}

Vector reg_gradient(const Vector& omega, const RegressionInstance& inst) {
  const int64_t n = inst.n();
  const IntervalUnion s = inst.s_oracle.as_interval_union();
  const int64_t chunk = truncest::detail::kMomentChunk;
  const int64_t nchunks = (n + chunk - 1) / chunk;

  Vector grad = Vector::Zero(inst.d());
  for (int64_t c = 0; c < nchunks; ++c) {
    const int64_t lo = c * chunk;
    const int64_t hi = std::min(n, lo + chunk);
    Vector acc = Vector::Zero(inst.d());
    for (int64_t i = lo; i < hi; ++i) {
      const double mean_i = inst.X.row(i).dot(omega);
      const Moments1D mom = moments_1d(mean_i, s);
      acc.noalias() += inst.X.row(i).transpose() * (inst.y[i] - mom.mean);
    }
    grad += acc;
  }
  return -grad / static_cast<double>(n);
}

}  // namespace truncest::serial
