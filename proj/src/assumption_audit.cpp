#include "truncest/assumption_audit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "truncest/rng.hpp"
#include "truncest/trunc_sampler.hpp"

namespace truncest {

namespace {

Matrix select_columns(const Matrix& X, const std::vector<int>& idx) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(idx.size()));
  for (size_t c = 0; c < idx.size(); ++c) out.col(c) = X.col(idx[c]);
  return out;
}

std::vector<int> complement(int d, const std::vector<int>& K) {
  std::vector<bool> in_k(d, false);
  for (int j : K) in_k[j] = true;
  std::vector<int> out;
  for (int j = 0; j < d; ++j) {
    if (!in_k[j]) out.push_back(j);
  }
  return out;
}

void check_support(const Matrix& X, const std::vector<int>& K) {
  if (K.empty()) throw std::invalid_argument("support set K is empty");
  for (int j : K) {
    if (j < 0 || j >= X.cols()) {
      throw std::invalid_argument("support index out of range");
    }
  }
}

}  // namespace

double audit_survival(const RegressionInstance& inst, const Vector& omega,
                      const RowMomentOptions& opt) {
  if (omega.size() != inst.X.cols()) {
    throw std::invalid_argument("audit_survival: omega dimension mismatch");
  }
  const Vector mu = inst.X * omega;
  double out = 1.0;
  if (inst.s_oracle.has_closed_form()) {
    const IntervalUnion u = inst.s_oracle.as_interval_union();
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      double mass = 0.0;
      for (const auto& [a, b] : u.segments()) {
        mass += std_segment_mass(a - mu[i], b - mu[i]);
      }
      out = std::min(out, std::min(mass, 1.0));
    }
    return out;
  }
  if (opt.mc_batch < 1) {
    throw BadConfig("audit_survival: generic oracle requires mc_batch > 0");
  }
  std::vector<double> crn(opt.mc_batch);
  CounterRng rng(opt.seed, RngPurpose::kCrnNoise, 0);
  for (auto& e : crn) e = rng.normal();
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    int64_t hits = 0;
    for (const double e : crn) {
      if (inst.s_oracle.contains1d(mu[i] + e)) ++hits;
    }
    out = std::min(out, static_cast<double>(hits) /
                            static_cast<double>(opt.mc_batch));
  }
  return out;
}

double audit_min_eigenvalue(const Matrix& X, const std::vector<int>& K) {
  check_support(X, K);
  if (X.rows() < 1) throw std::invalid_argument("audit_min_eigenvalue: n >= 1");
  const Matrix xk = select_columns(X, K);
  const Matrix gram = (xk.transpose() * xk) / static_cast<double>(X.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double audit_incoherence(const Matrix& X, const std::vector<int>& K) {
  check_support(X, K);
  const Matrix xk = select_columns(X, K);
  const Matrix gram = xk.transpose() * xk;
  Eigen::FullPivLU<Matrix> lu(gram);
  if (!lu.isInvertible()) {
    throw SingularMatrix("audit_incoherence: X_K^T X_K is singular");
  }
  const std::vector<int> rest = complement(static_cast<int>(X.cols()), K);
  double beta = 0.0;
  for (int j : rest) {
    const Vector proj = lu.solve(xk.transpose() * X.col(j));
    beta = std::max(beta, proj.cwiseAbs().sum());
  }
  return beta;
}

double audit_normalization(const Matrix& X) {
  if (X.size() == 0) return 0.0;
  return X.cwiseAbs().maxCoeff();
}

double audit_restricted_eigenvalue(const Matrix& X, const std::vector<int>& K,
                                   int trials, uint64_t seed) {
  check_support(X, K);
  if (trials < 1) throw std::invalid_argument("re audit: trials >= 1");
  const int d = static_cast<int>(X.cols());
  const int64_t n = X.rows();
  const std::vector<int> rest = complement(d, K);

  const auto quotient = [&](const Vector& delta) {
    const double den = delta.squaredNorm();
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    return (X * delta).squaredNorm() / (static_cast<double>(n) * den);
  };

  // Canonical support directions sit inside the cone and catch degenerate
  // columns exactly.
  double best = std::numeric_limits<double>::infinity();
  for (int j : K) {
    Vector e = Vector::Zero(d);
    e[j] = 1.0;
    best = std::min(best, quotient(e));
  }

  const int64_t nchunks = trials;
  std::vector<double> results(nchunks);
#pragma omp parallel for schedule(static)
  for (int64_t t = 0; t < nchunks; ++t) {
    CounterRng rng(seed, RngPurpose::kConeDirection, static_cast<uint64_t>(t));
    Vector delta = Vector::Zero(d);
    double k_norm2 = 0.0;
    for (int j : K) {
      delta[j] = rng.normal();
      k_norm2 += delta[j] * delta[j];
    }
    if (k_norm2 == 0.0) {
      results[t] = std::numeric_limits<double>::infinity();
      continue;
    }
    for (int j : K) delta[j] /= std::sqrt(k_norm2);
    double k_l1 = 0.0;
    for (int j : K) k_l1 += std::abs(delta[j]);

    if (!rest.empty()) {
      // l1 mass of the off-support block drawn uniformly inside the cone
      // budget; the boundary alone can miss interior minima.
      double raw_l1 = 0.0;
      std::vector<double> raw(rest.size());
      for (size_t r = 0; r < rest.size(); ++r) {
        raw[r] = std::abs(rng.normal());
        raw_l1 += raw[r];
      }
      const double budget = 3.0 * k_l1 * rng.uniform();
      if (raw_l1 > 0.0) {
        for (size_t r = 0; r < rest.size(); ++r) {
          const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
          delta[rest[r]] = sign * raw[r] / raw_l1 * budget;
        }
      }
    }
    results[t] = quotient(delta);
  }
  for (double q : results) best = std::min(best, q);
  return best;
}

double theorem_hypothesis_ratio(const AuditReport& report, double k) {
  if (!(report.alpha_min > 0.0 && report.sigma_min > 0.0 &&
        report.c_normalization > 0.0 && k > 0.0)) {
    throw std::invalid_argument(
        "theorem_hypothesis_ratio: audit fields must be positive");
  }
  if (report.beta_incoherence >= 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  const double a = report.alpha_min;
  return report.c_normalization * report.c_normalization * k /
         (a * a * a * a * a * report.sigma_min *
          (1.0 - report.beta_incoherence));
}

AuditReport run_audit(const RegressionInstance& inst,
                      const std::vector<int>& K, int re_trials, uint64_t seed,
                      const RowMomentOptions& opt) {
  AuditReport report;
  const Vector omega = inst.omega_star
                           ? *inst.omega_star
                           : Vector::Zero(inst.d());
  report.alpha_min = audit_survival(inst, omega, opt);
  report.sigma_min = audit_min_eigenvalue(inst.X, K);
  report.beta_incoherence = audit_incoherence(inst.X, K);
  report.c_normalization = audit_normalization(inst.X);
  report.re_lower_bound_heuristic =
      audit_restricted_eigenvalue(inst.X, K, re_trials, seed);
  if (report.alpha_min > 0.0 && report.sigma_min > 0.0 &&
      report.c_normalization > 0.0) {
    report.theorem_ratio =
        theorem_hypothesis_ratio(report, static_cast<double>(K.size()));
  } else {
    report.theorem_ratio = std::numeric_limits<double>::infinity();
  }
  return report;
}

}  // namespace truncest
