#include "truncest/trunc_sampler.hpp"

#include <Eigen/Cholesky>
#include <atomic>
#include <cassert>
#include <cmath>
#include <vector>

#include "truncest/normal.hpp"
#include "truncest/rng.hpp"

namespace truncest {

namespace detail {

Matrix cholesky_factor(const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrix("covariance is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace detail

namespace {

// One proposal from N(mu, L L^T) using d consecutive normals of `rng`.
inline void propose_mvn(CounterRng& rng, const Vector& mu, const Matrix& L,
                        Vector& z, Vector& x) {
  const Eigen::Index d = mu.size();
  for (Eigen::Index k = 0; k < d; ++k) z[k] = rng.normal();
  x.noalias() = mu;
  x.noalias() += L * z;
}

}  // namespace

SampleBatch sample_truncated_mvn(const GaussianParams& p,
                                 const TruncationOracle& oracle, int64_t n,
                                 const FitConfig& cfg) {
  if (n < 1) throw std::invalid_argument("sample_truncated_mvn: n >= 1");
  if (oracle.dimension() != p.dim()) {
    throw std::invalid_argument("sample_truncated_mvn: dimension mismatch");
  }
  const Matrix L = detail::cholesky_factor(p.sigma);
  const Eigen::Index d = p.dim();

  SampleBatch batch;
  batch.data.resize(n, d);
  int64_t total_proposals = 0;
  std::atomic<bool> starved{false};

#pragma omp parallel for schedule(static) reduction(+ : total_proposals)
  for (int64_t i = 0; i < n; ++i) {
    CounterRng rng(cfg.seed, RngPurpose::kMvnProposal,
                   static_cast<uint64_t>(i));
    Vector z(d), x(d);
    bool accepted = false;
    for (int64_t attempt = 0; attempt < cfg.max_rejects_per_sample; ++attempt) {
      propose_mvn(rng, p.mu, L, z, x);
      ++total_proposals;
      if (oracle.contains(x)) {
        batch.data.row(i) = x;
        accepted = true;
        break;
      }
    }
    if (!accepted) starved.store(true, std::memory_order_relaxed);
  }

  if (starved.load()) {
    throw SurvivalTooLow(
        "rejection sampler exceeded max_rejects_per_sample; survival "
        "probability is numerically zero at these parameters");
  }
  batch.proposals_used = total_proposals;
  batch.accept_rate = static_cast<double>(n) / static_cast<double>(total_proposals);
#ifndef NDEBUG
  for (int64_t i = 0; i < n; ++i) {
    assert(oracle.contains(batch.data.row(i).transpose()));
  }
#endif
  return batch;
}

SurvivalEstimate estimate_survival(const GaussianParams& p,
                                   const TruncationOracle& oracle, int64_t m,
                                   uint64_t seed) {
  if (m < 100) throw std::invalid_argument("estimate_survival: m >= 100");
  if (oracle.dimension() != p.dim()) {
    throw std::invalid_argument("estimate_survival: dimension mismatch");
  }
  const Matrix L = detail::cholesky_factor(p.sigma);
  const Eigen::Index d = p.dim();
  int64_t accepted = 0;

#pragma omp parallel for schedule(static) reduction(+ : accepted)
  for (int64_t j = 0; j < m; ++j) {
    CounterRng rng(seed, RngPurpose::kSurvival, static_cast<uint64_t>(j));
    Vector z(d), x(d);
    propose_mvn(rng, p.mu, L, z, x);
    if (oracle.contains(x)) ++accepted;
  }

  SurvivalEstimate est;
  est.alpha_hat = static_cast<double>(accepted) / static_cast<double>(m);
  est.stderr = std::sqrt(est.alpha_hat * (1.0 - est.alpha_hat) /
                         static_cast<double>(m));
  return est;
}

Vector empirical_mean(const Matrix& data) {
  if (data.rows() < 1) throw std::invalid_argument("empirical_mean: n >= 1");
  const int64_t n = data.rows();
  const Eigen::Index d = data.cols();
  const int64_t nchunks = (n + detail::kMomentChunk - 1) / detail::kMomentChunk;
  Matrix partial(nchunks, d);

#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < nchunks; ++c) {
    const int64_t lo = c * detail::kMomentChunk;
    const int64_t hi = std::min(n, lo + detail::kMomentChunk);
    Vector acc = Vector::Zero(d);
    for (int64_t i = lo; i < hi; ++i) acc += data.row(i).transpose();
    partial.row(c) = acc;
  }

  Vector sum = Vector::Zero(d);
  for (int64_t c = 0; c < nchunks; ++c) sum += partial.row(c).transpose();
  return sum / static_cast<double>(n);
}

EmpiricalMoments empirical_moments(const Matrix& data) {
  if (data.rows() < 2) {
    throw std::invalid_argument("empirical_moments: covariance needs n >= 2");
  }
  const int64_t n = data.rows();
  const Eigen::Index d = data.cols();
  const int64_t nchunks = (n + detail::kMomentChunk - 1) / detail::kMomentChunk;
  std::vector<Vector> psum(nchunks);
  std::vector<Matrix> pouter(nchunks);

#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < nchunks; ++c) {
    const int64_t lo = c * detail::kMomentChunk;
    const int64_t hi = std::min(n, lo + detail::kMomentChunk);
    Vector acc = Vector::Zero(d);
    Matrix outer = Matrix::Zero(d, d);
    for (int64_t i = lo; i < hi; ++i) {
      const auto row = data.row(i);
      acc += row.transpose();
      outer.noalias() += row.transpose() * row;
    }
    psum[c] = std::move(acc);
    pouter[c] = std::move(outer);
  }

  Vector sum = Vector::Zero(d);
  Matrix outer = Matrix::Zero(d, d);
  for (int64_t c = 0; c < nchunks; ++c) {
    sum += psum[c];
    outer += pouter[c];
  }

  EmpiricalMoments em;
  em.mu_bar = sum / static_cast<double>(n);
  em.second_moment_bar = outer / static_cast<double>(n);
  em.sigma_bar = em.second_moment_bar - em.mu_bar * em.mu_bar.transpose();
  return em;
}

Moments1D moments_gauss_1d(double mu, double sigma, const IntervalUnion& s) {
  if (s.empty()) throw std::invalid_argument("moments_gauss_1d: empty set");
  if (!(sigma > 0.0)) throw std::invalid_argument("moments_gauss_1d: sigma > 0");

  double mass = 0.0;
  std::vector<SegmentMoments> per_segment;
  per_segment.reserve(s.segments().size());
  for (const auto& [a, b] : s.segments()) {
    const SegmentMoments sm =
        std_segment_moments((a - mu) / sigma, (b - mu) / sigma);
    per_segment.push_back(sm);
    mass += sm.mass;
  }
  if (!(mass >= 1e-300)) {
    throw SurvivalTooLow("truncation set has numerically zero mass");
  }

  double mean_z = 0.0;
  for (const auto& sm : per_segment) mean_z += (sm.mass / mass) * sm.mean;
  double var_z = 0.0;
  for (const auto& sm : per_segment) {
    const double dm = sm.mean - mean_z;
    var_z += (sm.mass / mass) * (sm.variance + dm * dm);
  }

  Moments1D out;
  out.mass = std::min(mass, 1.0);
  out.mean = mu + sigma * mean_z;
  out.variance = sigma * sigma * var_z;
  return out;
}

Moments1D moments_1d(double m, const IntervalUnion& s) {
  return moments_gauss_1d(m, 1.0, s);
}

namespace {

// Tail-stable inverse CDF within a standardized segment [a, b]: work in the
// tail that keeps the probabilities well resolved.
double invert_in_segment(double a, double b, double u) {
  double z;
  if (a >= 0.0) {
    const double qa = norm_sf(a), qb = norm_sf(b);
    const double q = qa - u * (qa - qb);
    z = -inv_norm_cdf(q);
  } else if (b <= 0.0) {
    const double pa = norm_cdf(a), pb = norm_cdf(b);
    const double p = pa + u * (pb - pa);
    z = inv_norm_cdf(p);
  } else {
    const double pa = norm_cdf(a), pb = norm_cdf(b);
    z = inv_norm_cdf(pa + u * (pb - pa));
  }
  return std::min(std::max(z, a), b);
}

}  // namespace

double sample_truncated_normal_scalar(double m, const IntervalUnion& s,
                                      CounterRng& rng) {
  const auto& segs = s.segments();
  if (segs.empty()) {
    throw std::invalid_argument("sample_truncated_normal_scalar: empty set");
  }
  double total = 0.0;
  std::vector<double> cum(segs.size());
  for (size_t k = 0; k < segs.size(); ++k) {
    total += std_segment_mass(segs[k].first - m, segs[k].second - m);
    cum[k] = total;
  }
  if (!(total >= 1e-300)) {
    throw SurvivalTooLow("truncation set has numerically zero mass");
  }
  const double u1 = rng.uniform() * total;
  size_t k = 0;
  while (k + 1 < segs.size() && u1 > cum[k]) ++k;
  const double z =
      invert_in_segment(segs[k].first - m, segs[k].second - m, rng.uniform());
  double x = m + z;
  return std::min(std::max(x, segs[k].first), segs[k].second);
}

Vector sample_truncated_normal_1d(double m, const TruncationOracle& s,
                                  int64_t n, uint64_t seed,
                                  int64_t max_rejects) {
  if (n < 1) throw std::invalid_argument("sample_truncated_normal_1d: n >= 1");
  if (s.dimension() != 1) {
    throw std::invalid_argument("sample_truncated_normal_1d: oracle must be 1-D");
  }
  Vector out(n);

  if (s.has_closed_form()) {
    const IntervalUnion u = s.as_interval_union();
    const auto& segs = u.segments();
    std::vector<double> cum(segs.size());
    double total = 0.0;
    for (size_t k = 0; k < segs.size(); ++k) {
      total += std_segment_mass(segs[k].first - m, segs[k].second - m);
      cum[k] = total;
    }
    if (!(total >= 1e-300)) {
      throw SurvivalTooLow("truncation set has numerically zero mass");
    }

#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
      CounterRng rng(seed, RngPurpose::kScalarDraw, static_cast<uint64_t>(i));
      const double u1 = rng.uniform() * total;
      size_t k = 0;
      while (k + 1 < segs.size() && u1 > cum[k]) ++k;
      const double z = invert_in_segment(segs[k].first - m,
                                         segs[k].second - m, rng.uniform());
      double x = m + z;
      x = std::min(std::max(x, segs[k].first), segs[k].second);
      if (!s.contains1d(x)) {
        // Open-interval oracles exclude the endpoints; nudge inward.
        const double mid = 0.5 * (segs[k].first + segs[k].second);
        x = std::nextafter(x, mid);
      }
      assert(s.contains1d(x));
      out[i] = x;
    }
    return out;
  }

  // Generic membership oracle: capped rejection from N(m, 1).
  std::atomic<bool> starved{false};
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    CounterRng rng(seed, RngPurpose::kScalarDraw, static_cast<uint64_t>(i));
    bool accepted = false;
    for (int64_t attempt = 0; attempt < max_rejects; ++attempt) {
      const double x = m + rng.normal();
      if (s.contains1d(x)) {
        out[i] = x;
        accepted = true;
        break;
      }
    }
    if (!accepted) starved.store(true, std::memory_order_relaxed);
  }
  if (starved.load()) {
    throw SurvivalTooLow("1-D rejection sampler exceeded its proposal cap");
  }
  return out;
}

}  // namespace truncest
