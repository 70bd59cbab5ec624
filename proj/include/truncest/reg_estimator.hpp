#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "truncest/model_types.hpp"

namespace truncest {

/// Per-row truncated-moment evaluation strategy. Interval-union oracles
/// always use exact closed forms; generic oracles need mc_batch > 0 and get
/// common-random-numbers Monte Carlo (the same noise panel for every row and
/// every call, so the surrogate objective is deterministic in the seed).
struct RowMomentOptions {
  int mc_batch = 0;
  uint64_t seed = 0;
};

struct RegFitResult {
  Vector omega_hat;
  std::vector<int> support_hat;           // exact nonzeros of omega_hat
  std::optional<Vector> dual_vector;      // -grad/lambda at the solution
  std::optional<std::vector<int>> restricted_to;
  std::vector<std::pair<int64_t, double>> objective_trace;
  double subgradient_residual = 0.0;      // l_inf, at return
};

struct DualCertificate {
  Vector w_check;
  double max_off_support = 0.0;
  bool feasible = false;          // max_off_support < 1
  bool subgradient_valid = true;  // |w_j| <= 1 + 1e-4 on the support set
};

struct ErrorMetrics {
  double linf = 0.0;
  double l2 = 0.0;
  bool no_false_inclusion = true;
  bool above_threshold_recovered = true;
};

/// Finite-sample negative log-likelihood of the truncated linear model.
double reg_nll(const Vector& omega, const RegressionInstance& inst,
               const RowMomentOptions& opt = {});

/// -(1/n) sum_i x_i (y_i - E[z_i]) with z_i ~ N(x_i omega, 1, S).
Vector reg_gradient(const Vector& omega, const RegressionInstance& inst,
                    const RowMomentOptions& opt = {});

/// (1/n) sum_i x_i x_i^T Var(z_i); symmetric PSD by construction.
Matrix reg_hessian(const Vector& omega, const RegressionInstance& inst,
                   const RowMomentOptions& opt = {});

/// Proximal-gradient solve of nll + lambda ||omega||_1 with backtracking.
/// Soft-thresholded coordinates are exact zeros. Stops once the
/// zero-subgradient residual falls to 1e-6 (l_inf), the objective plateaus
/// (decrease over 50 iterations < 1e-10), or cfg.max_iters.
RegFitResult fit_trunc_lasso(const RegressionInstance& inst, double lambda,
                             const FitConfig& cfg);

/// Same solve restricted to the coordinates in K; the rest stay exactly 0.
RegFitResult fit_restricted(const RegressionInstance& inst,
                            std::vector<int> K, double lambda,
                            const FitConfig& cfg);

/// Primal-dual witness check: w_check = -grad(omega_check)/lambda, feasible
/// iff its off-support max magnitude is < 1. Infeasibility is a result, not
/// an error.
DualCertificate dual_certificate(const RegressionInstance& inst,
                                 const RegFitResult& restricted,
                                 double lambda,
                                 const RowMomentOptions& opt = {});

ErrorMetrics error_metrics(const Vector& omega_hat, const Vector& omega_star,
                           double tau = 0.0);

/// c * alpha^4 * sigma_min / (C * k).
double lambda_reg_default(double alpha, double sigma_min, double C, double k,
                          double c = 1.0);

/// l_inf zero-subgradient residual of omega for the penalized objective,
/// given the smooth gradient at omega. Restricted variants pass the active
/// coordinate set.
double subgradient_residual(const Vector& omega, const Vector& grad,
                            double lambda,
                            const std::vector<int>* active = nullptr);

}  // namespace truncest
