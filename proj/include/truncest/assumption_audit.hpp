#pragma once

#include <cstdint>
#include <vector>

#include "truncest/model_types.hpp"
#include "truncest/reg_estimator.hpp"

namespace truncest {

/// Empirical constants behind the regression recovery guarantees. theorem_ratio
/// may be +inf when incoherence fails (beta >= 1); every other field is finite.
struct AuditReport {
  double alpha_min = 0.0;
  double sigma_min = 0.0;
  double beta_incoherence = 0.0;
  double c_normalization = 0.0;
  double re_lower_bound_heuristic = 0.0;
  double theorem_ratio = 0.0;
};

/// min over rows i of mass(N(x_i . omega, 1), S). Zero is a valid return.
double audit_survival(const RegressionInstance& inst, const Vector& omega,
                      const RowMomentOptions& opt = {});

/// Smallest eigenvalue of (1/n) X_K^T X_K.
double audit_min_eigenvalue(const Matrix& X, const std::vector<int>& K);

/// max_{j not in K} || x_j^T X_K (X_K^T X_K)^{-1} ||_1. Throws SingularMatrix
/// when the Gram matrix is singular: the identifiability assumption is
/// violated and a pseudo-inverse would hide that.
double audit_incoherence(const Matrix& X, const std::vector<int>& K);

/// max |X_ij|.
double audit_normalization(const Matrix& X);

/// Randomized upper bound on the restricted-eigenvalue constant over the cone
/// ||D_Kc||_1 <= 3 ||D_K||_1: minimum Rayleigh quotient over the canonical
/// support directions plus `trials` sampled cone directions.
double audit_restricted_eigenvalue(const Matrix& X, const std::vector<int>& K,
                                   int trials, uint64_t seed);

/// C^2 k / (alpha^5 sigma_min (1 - beta)); +inf when beta >= 1.
double theorem_hypothesis_ratio(const AuditReport& report, double k);

/// Runs the full audit of a synthetic instance at its ground-truth signal.
AuditReport run_audit(const RegressionInstance& inst,
                      const std::vector<int>& K, int re_trials, uint64_t seed,
                      const RowMomentOptions& opt = {});

}  // namespace truncest
