#include "truncest/ggm_estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cassert>
#include <cmath>

#include "truncest/normal.hpp"
#include "truncest/rng.hpp"

namespace truncest {

double GlassoGradient::inf_norm() const {
  return std::max(theta.cwiseAbs().maxCoeff(), v.cwiseAbs().maxCoeff());
}

double GlassoGradient::inf_norm_off() const {
  double off = 0.0;
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
      if (i != j) off = std::max(off, std::abs(theta(i, j)));
    }
  }
  return std::max(off, v.cwiseAbs().maxCoeff());
}

namespace {

struct DataMoments {
  Vector mean;
  Matrix second;  // (1/n) sum x x^T
};

// Chunked like empirical_moments so results are thread-count independent,
// but without the n >= 2 covariance requirement.
DataMoments data_moments(const Matrix& data) {
  const int64_t n = data.rows();
  const Eigen::Index d = data.cols();
  const int64_t chunk = detail::kMomentChunk;
  const int64_t nchunks = (n + chunk - 1) / chunk;
  std::vector<Vector> psum(nchunks);
  std::vector<Matrix> pouter(nchunks);

#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < nchunks; ++c) {
    const int64_t lo = c * chunk;
    const int64_t hi = std::min(n, lo + chunk);
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
  DataMoments m;
  m.mean = Vector::Zero(d);
  m.second = Matrix::Zero(d, d);
  for (int64_t c = 0; c < nchunks; ++c) {
    m.mean += psum[c];
    m.second += pouter[c];
  }
  m.mean /= static_cast<double>(n);
  m.second /= static_cast<double>(n);
  return m;
}

struct ModelFactor {
  Eigen::LLT<Matrix> llt;  // of Theta
  Vector mean;             // Theta^{-1} v
  double log_det_theta = 0.0;
};

ModelFactor factor_model(const NaturalParams& q) {
  ModelFactor f;
  f.llt.compute(q.theta);
  if (f.llt.info() != Eigen::Success) {
    throw SingularMatrix("theta is not positive definite");
  }
  f.mean = f.llt.solve(q.v);
  f.log_det_theta = 2.0 * Matrix(f.llt.matrixL()).diagonal().array().log().sum();
  return f;
}

// One truncated draw at q using stream (seed, kSgdModelDraw, stream).
// Proposal z = mean + L^{-T} g with Theta = L L^T, so cov(z) = Theta^{-1}.
Vector draw_model_sample(const ModelFactor& f, const TruncationOracle& oracle,
                         uint64_t seed, uint64_t stream, int64_t max_rejects) {
  const Eigen::Index d = f.mean.size();
  CounterRng rng(seed, RngPurpose::kSgdModelDraw, stream);
  Vector g(d), z(d);
  for (int64_t attempt = 0; attempt < max_rejects; ++attempt) {
    for (Eigen::Index k = 0; k < d; ++k) g[k] = rng.normal();
    z = f.llt.matrixU().solve(g);
    z += f.mean;
    if (oracle.contains(z)) return z;
  }
  throw SurvivalTooLow("model draw exceeded the rejection cap");
}

constexpr int64_t kDefaultRejectCap = 1000000;

}  // namespace

double log_partition_estimate(const NaturalParams& q,
                              const TruncationOracle& oracle, int64_t m_mc,
                              uint64_t seed) {
  if (m_mc < 100) throw std::invalid_argument("log_partition: m_mc >= 100");
  const ModelFactor f = factor_model(q);
  const double d = static_cast<double>(q.dim());
  const double log_z_gauss =
      d * kLogSqrt2Pi - 0.5 * f.log_det_theta + 0.5 * q.v.dot(f.mean);

  GaussianParams moment;
  moment.mu = f.mean;
  const Matrix id = Matrix::Identity(q.dim(), q.dim());
  const Matrix sigma = f.llt.solve(id);
  moment.sigma = 0.5 * (sigma + sigma.transpose());
  const SurvivalEstimate est = estimate_survival(moment, oracle, m_mc, seed);
  if (est.alpha_hat <= 0.0) {
    throw SurvivalTooLow("survival estimate is zero at these parameters");
  }
  return log_z_gauss + std::log(est.alpha_hat);
}

double glasso_objective(const NaturalParams& q, const SampleBatch& batch,
                        const TruncationOracle& oracle, double lambda,
                        int64_t m_mc, uint64_t seed) {
  if (batch.n() < 1) throw std::invalid_argument("glasso_objective: empty batch");
  const DataMoments dm = data_moments(batch.data);
  const double quad = 0.5 * (q.theta.cwiseProduct(dm.second)).sum();
  const double lin = dm.mean.dot(q.v);
  const double logz = log_partition_estimate(q, oracle, m_mc, seed);
  return quad - lin + logz + lambda * norm_of(q.theta, Norm::kL1Off);
}

GlassoGradient glasso_stoch_gradient(const NaturalParams& q,
                                     const SampleBatch& minibatch,
                                     const TruncationOracle& oracle,
                                     int64_t m_mc, uint64_t seed) {
  if (minibatch.n() < 1) {
    throw std::invalid_argument("glasso_stoch_gradient: empty minibatch");
  }
  if (m_mc < 1) throw std::invalid_argument("glasso_stoch_gradient: m_mc >= 1");
  const ModelFactor f = factor_model(q);
  const Eigen::Index d = q.dim();

  Matrix model_second = Matrix::Zero(d, d);
  Vector model_mean = Vector::Zero(d);
  for (int64_t j = 0; j < m_mc; ++j) {
    const Vector z = draw_model_sample(f, oracle, seed,
                                       static_cast<uint64_t>(j),
                                       kDefaultRejectCap);
    model_second.noalias() += z * z.transpose();
    model_mean += z;
  }
  model_second /= static_cast<double>(m_mc);
  model_mean /= static_cast<double>(m_mc);

  const DataMoments dm = data_moments(minibatch.data);
  GlassoGradient g;
  g.theta = 0.5 * (dm.second - model_second);
  g.theta = 0.5 * (g.theta + g.theta.transpose()).eval();
  g.v = model_mean - dm.mean;
  return g;
}

GlassoGradient glasso_gradient_exact_1d(const NaturalParams& q,
                                        const IntervalUnion& s,
                                        const SampleBatch& batch) {
  if (q.dim() != 1 || batch.d() != 1) {
    throw std::invalid_argument("exact 1-d gradient requires d == 1");
  }
  const double theta = q.theta(0, 0);
  if (!(theta > 0.0)) throw SingularMatrix("theta must be positive");
  const double sigma = 1.0 / std::sqrt(theta);
  const Moments1D mom = moments_gauss_1d(q.v[0] / theta, sigma, s);
  const double model_second = mom.variance + mom.mean * mom.mean;

  const DataMoments dm = data_moments(batch.data);
  GlassoGradient g;
  g.theta = Matrix::Constant(1, 1, 0.5 * (dm.second(0, 0) - model_second));
  g.v = Vector::Constant(1, mom.mean - dm.mean[0]);
  return g;
}

double glasso_objective_exact_1d(const NaturalParams& q,
                                 const IntervalUnion& s,
                                 const SampleBatch& batch) {
  if (q.dim() != 1 || batch.d() != 1) {
    throw std::invalid_argument("exact 1-d objective requires d == 1");
  }
  const double theta = q.theta(0, 0);
  if (!(theta > 0.0)) throw SingularMatrix("theta must be positive");
  const double v = q.v[0];
  const double sigma = 1.0 / std::sqrt(theta);
  const Moments1D mom = moments_gauss_1d(v / theta, sigma, s);
  const double log_z =
      kLogSqrt2Pi - 0.5 * std::log(theta) + 0.5 * v * v / theta +
      std::log(mom.mass);
  const DataMoments dm = data_moments(batch.data);
  return 0.5 * theta * dm.second(0, 0) - dm.mean[0] * v + log_z;
}

Matrix project_psd(const Matrix& theta, double floor) {
  if (!theta.allFinite()) throw NonFinite("project_psd: non-finite input");
  if (!(floor > 0.0)) throw std::invalid_argument("project_psd: floor > 0");
  const Matrix sym = 0.5 * (theta + theta.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector clamped = es.eigenvalues().cwiseMax(floor);
  Matrix out = es.eigenvectors() * clamped.asDiagonal() *
               es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose()).eval();
}

SupportPattern binarize(const Matrix& theta_hat, double lo, double hi) {
  SupportPattern p;
  p.bits.resize(theta_hat.rows(), theta_hat.cols());
  for (Eigen::Index i = 0; i < theta_hat.rows(); ++i) {
    for (Eigen::Index j = 0; j < theta_hat.cols(); ++j) {
      const double x = theta_hat(i, j);
      p.bits(i, j) = (x >= lo && x <= hi) ? 0 : 1;
    }
  }
  return p;
}

int hamming(const SupportPattern& a, const SupportPattern& b) {
  if (a.bits.rows() != b.bits.rows() || a.bits.cols() != b.bits.cols()) {
    throw std::invalid_argument("hamming: dimension mismatch");
  }
  return static_cast<int>((a.bits.array() != b.bits.array()).count());
}

std::pair<double, double> frobenius_error(const GaussianParams& estimate,
                                          const GaussianParams& truth) {
  if (estimate.dim() != truth.dim()) {
    throw std::invalid_argument("frobenius_error: dimension mismatch");
  }
  if (estimate.sigma == truth.sigma && estimate.mu == truth.mu) {
    return {0.0, 0.0};  // identical inputs: the whitened error is exactly zero
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(truth.sigma);
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    throw SingularMatrix("frobenius_error: truth covariance not SPD");
  }
  const Matrix w = es.eigenvectors() *
                   es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                   es.eigenvectors().transpose();
  const Matrix id = Matrix::Identity(truth.dim(), truth.dim());
  const double sigma_err = (id - w * estimate.sigma * w).norm();
  const double mu_err = (w * (truth.mu - estimate.mu)).norm();
  return {sigma_err, mu_err};
}

double lambda_analytic(double kappa, double r_prime, int nz, int d,
                       double eps) {
  if (!(kappa > 0.0 && r_prime > 0.0 && eps > 0.0 && nz > 0 && d > 0)) {
    throw std::invalid_argument("lambda_analytic: inputs must be positive");
  }
  return std::min(kappa * r_prime, kappa * eps) /
         (12.0 * std::sqrt(static_cast<double>(nz + d)));
}

double lambda_data_driven(int64_t n, int d, double c0) {
  if (n < 1 || d < 2 || !(c0 > 0.0)) {
    throw std::invalid_argument("lambda_data_driven: need n >= 1, d >= 2, c0 > 0");
  }
  return c0 * std::sqrt(std::log(static_cast<double>(d)) /
                        static_cast<double>(n));
}

GlassoGradient glasso_full_gradient(const NaturalParams& at,
                                    const SampleBatch& batch,
                                    const TruncationOracle& oracle,
                                    int64_t m_mc, uint64_t seed) {
  return glasso_stoch_gradient(at, batch, oracle, m_mc, seed);
}

double gradient_concentration_diagnostic(const NaturalParams& truth,
                                         const SampleBatch& batch,
                                         const TruncationOracle& oracle,
                                         int64_t m_mc, uint64_t seed) {
  return glasso_full_gradient(truth, batch, oracle, m_mc, seed).inf_norm();
}

bool lambda_validity_check(double lambda, const NaturalParams& truth,
                           const SampleBatch& batch,
                           const TruncationOracle& oracle, int64_t m_mc,
                           uint64_t seed) {
  return lambda >=
         2.0 * gradient_concentration_diagnostic(truth, batch, oracle, m_mc,
                                                 seed);
}

// ---------------------------------------------------------------------------
// Projected SGD

namespace {

Matrix sign_offdiag(const Matrix& theta) {
  Matrix s = Matrix::Zero(theta.rows(), theta.cols());
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
      if (i == j) continue;
      if (theta(i, j) > 0.0) s(i, j) = 1.0;
      else if (theta(i, j) < 0.0) s(i, j) = -1.0;
    }
  }
  return s;
}

// Cheap certificate that min_eig(theta) >= floor; falls back to the full
// spectral projection only when the certificate fails.
bool is_above_floor(const Matrix& theta, double floor) {
  Matrix shifted = theta;
  shifted.diagonal().array() -= floor;
  Eigen::LLT<Matrix> llt(shifted);
  return llt.info() == Eigen::Success;
}

NaturalParams initial_point(const SampleBatch& batch, double eigen_floor) {
  const Eigen::Index d = batch.d();
  NaturalParams q;
  try {
    const EmpiricalMoments em = empirical_moments(batch.data);
    Matrix sigma0 = em.sigma_bar;
    sigma0.diagonal().array() += 1e-3;
    Eigen::LLT<Matrix> llt(sigma0);
    if (llt.info() != Eigen::Success) throw SingularMatrix("fallback");
    const Matrix id = Matrix::Identity(d, d);
    Matrix theta0 = llt.solve(id);
    theta0 = 0.5 * (theta0 + theta0.transpose()).eval();
    q.theta = project_psd(theta0, eigen_floor);
    q.v = q.theta * em.mu_bar;
  } catch (const Error&) {
    q.theta = Matrix::Identity(d, d);
    q.v = Vector::Zero(d);
  }
  return q;
}

}  // namespace

EstimateReport fit_ggm_psgd(const SampleBatch& batch,
                            const TruncationOracle& oracle,
                            const FitConfig& cfg,
                            const std::optional<NaturalParams>& truth) {
  cfg.validate();
  if (batch.n() < 2) throw std::invalid_argument("fit_ggm_psgd: n >= 2");
  if (oracle.dimension() != batch.d()) {
    throw std::invalid_argument("fit_ggm_psgd: dimension mismatch");
  }
  const Eigen::Index d = batch.d();
  const int64_t n = batch.n();

  // Precompute truth-side quantities for the trace.
  std::optional<GaussianParams> truth_moment;
  std::optional<SupportPattern> truth_pattern;
  if (truth) {
    truth_moment = to_moment(*truth);
    truth_pattern = binarize(truth->theta, cfg.binarize_lo, cfg.binarize_hi);
  }

  GGMFitState state;
  state.params = initial_point(batch, cfg.eigen_floor);

  CounterRng row_rng(cfg.seed, RngPurpose::kSgdRowPick, 0);

  const int64_t avg_start =
      cfg.tail_average ? (cfg.max_iters - cfg.max_iters / 10) : cfg.max_iters;
  Matrix avg_theta = Matrix::Zero(d, d);
  Vector avg_v = Vector::Zero(d);
  int64_t avg_count = 0;

  EstimateReport report;
  int64_t projection_count = 0;
  int64_t floor_violations = 0;

  auto snapshot_metrics = [&](const NaturalParams& q,
                              double grad_inf) -> std::map<std::string, double> {
    std::map<std::string, double> m;
    if (truth_moment) {
      const auto [serr, merr] = frobenius_error(to_moment(q), *truth_moment);
      m["frob_sigma_err"] = serr;
      m["l2_mu_err"] = merr;
      m["hamming"] = static_cast<double>(
          hamming(binarize(q.theta, cfg.binarize_lo, cfg.binarize_hi),
                  *truth_pattern));
    } else {
      m["frob_sigma_err"] = -1.0;
      m["l2_mu_err"] = -1.0;
      m["hamming"] = -1.0;
    }
    m["grad_inf_norm"] = grad_inf;
    {
      Eigen::SelfAdjointEigenSolver<Matrix> es(q.theta,
                                               Eigen::EigenvaluesOnly);
      m["theta_min_eig"] = es.eigenvalues().minCoeff();
    }
    return m;
  };

  report.trace.emplace_back(0, snapshot_metrics(state.params, 0.0));

  for (int64_t t = 0; t < cfg.max_iters; ++t) {
    const double eta = cfg.step0 / (1.0 + cfg.step_decay * static_cast<double>(t));

    const ModelFactor f = factor_model(state.params);
    Matrix model_second = Matrix::Zero(d, d);
    Vector model_mean = Vector::Zero(d);
    for (int j = 0; j < cfg.mc_batch; ++j) {
      const Vector z = draw_model_sample(
          f, oracle, cfg.seed,
          static_cast<uint64_t>(t) * static_cast<uint64_t>(cfg.mc_batch) + j,
          cfg.max_rejects_per_sample);
      model_second.noalias() += z * z.transpose();
      model_mean += z;
    }
    model_second /= static_cast<double>(cfg.mc_batch);
    model_mean /= static_cast<double>(cfg.mc_batch);

    const int64_t row = std::min<int64_t>(
        n - 1, static_cast<int64_t>(row_rng.uniform_at(t) * n));
    const auto x = batch.data.row(row);

    Matrix g_theta = 0.5 * (x.transpose() * x - model_second);
    g_theta = 0.5 * (g_theta + g_theta.transpose()).eval();
    const Vector g_v = model_mean - x.transpose();
    state.last_gradient_norm_inf =
        std::max(g_theta.cwiseAbs().maxCoeff(), g_v.cwiseAbs().maxCoeff());

    Matrix theta_next =
        state.params.theta -
        eta * (g_theta + cfg.lambda * sign_offdiag(state.params.theta));
    if (!is_above_floor(theta_next, cfg.eigen_floor)) {
      theta_next = project_psd(theta_next, cfg.eigen_floor);
      ++projection_count;
      // The projected matrix sits exactly at the floor, so certify with a
      // hair of slack.
      if (!is_above_floor(theta_next, cfg.eigen_floor * (1.0 - 1e-6))) {
        ++floor_violations;
      }
    }
    state.params.theta = std::move(theta_next);
    state.params.v -= eta * g_v;
    state.iteration = t + 1;

    if (!state.params.theta.allFinite() || !state.params.v.allFinite()) {
      throw NonFinite("fit_ggm_psgd: iterate left finite range (step too large)");
    }
#ifndef NDEBUG
    {
      Eigen::SelfAdjointEigenSolver<Matrix> dbg(state.params.theta,
                                                Eigen::EigenvaluesOnly);
      assert(dbg.eigenvalues().minCoeff() >= cfg.eigen_floor - 1e-10);
    }
#endif

    if (t >= avg_start) {
      avg_theta += state.params.theta;
      avg_v += state.params.v;
      ++avg_count;
    }

    if ((t + 1) % cfg.snapshot_every == 0 || t + 1 == cfg.max_iters) {
      report.trace.emplace_back(
          t + 1, snapshot_metrics(state.params, state.last_gradient_norm_inf));
    }
  }

  NaturalParams final_params = state.params;
  if (cfg.tail_average && avg_count > 0) {
    final_params.theta = avg_theta / static_cast<double>(avg_count);
    final_params.theta = project_psd(final_params.theta, cfg.eigen_floor);
    final_params.v = avg_v / static_cast<double>(avg_count);
    state.running_average = final_params;
  }

  report.natural = final_params;
  report.metrics = snapshot_metrics(final_params, state.last_gradient_norm_inf);
  report.diagnostics["iterations"] = static_cast<double>(state.iteration);
  report.diagnostics["spectral_projections"] =
      static_cast<double>(projection_count);
  report.diagnostics["floor_violations"] = static_cast<double>(floor_violations);
  const int nz_hat =
      binarize(final_params.theta, cfg.binarize_lo, cfg.binarize_hi).bits.sum();
  report.diagnostics["nz_binarized"] = static_cast<double>(nz_hat);
  report.diagnostics["nz_binarized_plus_d"] = static_cast<double>(nz_hat + d);
  if (truth_pattern) {
    // Sample-complexity statements are quoted both in nz(Theta*) and in
    // nz(Theta*) + d; report both so either can be read off.
    const int nz_truth = truth_pattern->bits.sum();
    report.diagnostics["truth_nonzeros"] = static_cast<double>(nz_truth);
    report.diagnostics["truth_nonzeros_plus_d"] =
        static_cast<double>(nz_truth + d);
  }
  report.check_metrics_finite();
  return report;
}

}  // namespace truncest
