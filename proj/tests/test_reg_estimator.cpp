#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "truncest/experiments.hpp"
#include "truncest/reference.hpp"
#include "truncest/reg_estimator.hpp"
#include "truncest/rng.hpp"
#include "truncest/trunc_sampler.hpp"

using namespace truncest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix gauss_matrix(int64_t n, int d, uint64_t seed) {
  Matrix x(n, d);
  for (int64_t i = 0; i < n; ++i) {
    CounterRng rng(seed, RngPurpose::kDesignEntry, static_cast<uint64_t>(i));
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
  }
  return x;
}

// Untruncated linear-Gaussian instance.
RegressionInstance untruncated_instance(int64_t n, int d, const Vector& omega,
                                        uint64_t seed) {
  RegressionInstance inst;
  inst.X = gauss_matrix(n, d, seed);
  inst.y.resize(n);
  CounterRng noise(seed, RngPurpose::kResponseDraw, 0);
  for (int64_t i = 0; i < n; ++i) {
    inst.y[i] = inst.X.row(i).dot(omega) + noise.normal();
  }
  inst.s_oracle = TruncationOracle::full_space(1);
  inst.omega_star = omega;
  return inst;
}

RegressionInstance truncated_halfline_instance(int64_t n, int d,
                                               const Vector& omega,
                                               uint64_t seed) {
  RegressionInstance inst;
  inst.X = 0.5 * gauss_matrix(n, d, seed);
  const IntervalUnion s = IntervalUnion::at_least(0.0);
  inst.y.resize(n);
  for (int64_t i = 0; i < n; ++i) {
    CounterRng rng(seed + 1, RngPurpose::kResponseDraw,
                   static_cast<uint64_t>(i));
    inst.y[i] =
        sample_truncated_normal_scalar(inst.X.row(i).dot(omega), s, rng);
  }
  inst.s_oracle = TruncationOracle::intervals(s);
  inst.omega_star = omega;
  return inst;
}

}  // namespace

TEST_CASE("reg_nll: untruncated reduction to least squares differences") {
  const int d = 3;
  Vector omega_star(d);
  omega_star << 1.0, -0.5, 0.0;
  const auto inst = untruncated_instance(40, d, omega_star, 71);

  CounterRng rng(99, RngPurpose::kInit, 0);
  for (int trial = 0; trial < 5; ++trial) {
    Vector a(d), b(d);
    for (int j = 0; j < d; ++j) {
      a[j] = rng.normal();
      b[j] = rng.normal();
    }
    const double lhs = reg_nll(a, inst) - reg_nll(b, inst);
    const double n = static_cast<double>(inst.n());
    const double rhs = (inst.y - inst.X * a).squaredNorm() / (2.0 * n) -
                       (inst.y - inst.X * b).squaredNorm() / (2.0 * n);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("reg_nll matches the quadrature oracle on a truncated instance") {
  const int d = 3;
  Vector omega_star(d);
  omega_star << 0.8, -0.4, 0.2;
  const auto inst = truncated_halfline_instance(20, d, omega_star, 72);

  CounterRng rng(100, RngPurpose::kInit, 0);
  Vector omega(d);
  for (int j = 0; j < d; ++j) omega[j] = 0.5 * rng.normal();

  // Independent evaluation: mass by quadrature per row.
  double want = 0.0;
  for (int64_t i = 0; i < inst.n(); ++i) {
    const double mu = inst.X.row(i).dot(omega);
    const auto q = oracles::quad_moments(mu, {{0.0, kInf}});
    want += 0.5 * inst.y[i] * inst.y[i] - inst.y[i] * mu +
            0.5 * std::log(2.0 * M_PI) + 0.5 * mu * mu + std::log(q.mass);
  }
  want /= static_cast<double>(inst.n());
  CHECK(reg_nll(omega, inst) == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("reg_gradient: OLS form when untruncated, zero at conditional means") {
  const int d = 4;
  Vector omega_star = Vector::Zero(d);
  omega_star[1] = 2.0;
  const auto inst = untruncated_instance(50, d, omega_star, 73);

  Vector omega(d);
  omega << 0.3, 1.0, -0.2, 0.0;
  const Vector got = reg_gradient(omega, inst);
  const Vector want = -(inst.X.transpose() * (inst.y - inst.X * omega)) /
                      static_cast<double>(inst.n());
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);

  // Symmetric set and omega = 0: gradient is exactly -(1/n) X^T y.
  RegressionInstance sym = inst;
  sym.s_oracle = TruncationOracle::intervals(
      IntervalUnion({{-5.0, 5.0}}));
  for (Eigen::Index i = 0; i < sym.y.size(); ++i) {
    sym.y[i] = std::min(std::max(sym.y[i], -4.99), 4.99);
  }
  const Vector g0 = reg_gradient(Vector::Zero(d), sym);
  const Vector w0 = -(sym.X.transpose() * sym.y) / static_cast<double>(sym.n());
  CHECK((g0 - w0).cwiseAbs().maxCoeff() < 1e-12);

  // Replace y by conditional means: gradient vanishes at omega_star.
  RegressionInstance cm = truncated_halfline_instance(30, d, omega_star, 74);
  const IntervalUnion s = IntervalUnion::at_least(0.0);
  for (int64_t i = 0; i < cm.n(); ++i) {
    cm.y[i] = moments_1d(cm.X.row(i).dot(omega_star), s).mean;
  }
  const Vector gz = reg_gradient(omega_star, cm);
  CHECK(gz.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reg_gradient matches central differences at random points") {
  const int d = 3;
  Vector omega_star(d);
  omega_star << 0.6, -0.3, 0.1;
  const auto inst = truncated_halfline_instance(20, d, omega_star, 75);

  CounterRng rng(101, RngPurpose::kInit, 0);
  for (int trial = 0; trial < 12; ++trial) {
    Vector omega(d);
    for (int j = 0; j < d; ++j) omega[j] = 0.7 * rng.normal();
    const Vector grad = reg_gradient(omega, inst);
    const Vector fd = oracles::central_diff_gradient(
        [&](const Vector& w) { return reg_nll(w, inst); }, omega, 1e-6);
    const double rel =
        (grad - fd).cwiseAbs().maxCoeff() /
        std::max(1e-12, grad.cwiseAbs().maxCoeff());
    CHECK(rel <= 1e-5);
  }
}

TEST_CASE("reg_hessian: untruncated gram, PSD on random instances") {
  const int d = 3;
  Vector omega_star(d);
  omega_star << 0.5, 0.0, -0.5;
  const auto inst = untruncated_instance(40, d, omega_star, 76);
  const Matrix h = reg_hessian(omega_star, inst);
  const Matrix want =
      (inst.X.transpose() * inst.X) / static_cast<double>(inst.n());
  CHECK((h - want).cwiseAbs().maxCoeff() < 1e-12);

  for (uint64_t s = 0; s < 50; ++s) {
    const auto tr = truncated_halfline_instance(15, 3, omega_star, 500 + s);
    CounterRng rng(600 + s, RngPurpose::kInit, 1);
    Vector omega(3);
    for (int j = 0; j < 3; ++j) omega[j] = rng.normal();
    const Matrix hh = reg_hessian(omega, tr);
    Eigen::SelfAdjointEigenSolver<Matrix> es(hh, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("row variance lower bound: var >= mass^2 / 12 on a grid") {
  // Half-line sets at various offsets; variance against the squared mass.
  for (double c : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    for (double m = -3.0; m <= 3.0; m += 0.5) {
      const auto mom = moments_1d(m, IntervalUnion::at_least(c));
      CHECK(mom.variance >= mom.mass * mom.mass / 12.0 - 1e-12);
    }
  }
}

TEST_CASE("survival inequality across parameter shifts (grid)") {
  // mass(N(a,1),S) >= mass(N(b,1),S)^2 * exp(-(a-b)^2 - 2) for half-lines
  // and a bounded window.
  const std::vector<IntervalUnion> sets = {
      IntervalUnion::at_least(0.0), IntervalUnion::at_most(1.0),
      IntervalUnion::between(-2.0, 2.0)};
  int checked = 0;
  for (const auto& s : sets) {
    for (double a = -3.0; a <= 3.0; a += 0.4) {
      for (double b = -3.0; b <= 3.0; b += 0.4) {
        const double ma = moments_1d(a, s).mass;
        const double mb = moments_1d(b, s).mass;
        const double bound = mb * mb * std::exp(-(a - b) * (a - b) - 2.0);
        CHECK(ma >= bound - 1e-14);
        ++checked;
      }
    }
  }
  CHECK(checked >= 700);
}

TEST_CASE("lasso: large lambda gives the zero solution") {
  const int d = 4;
  Vector omega_star = Vector::Zero(d);
  omega_star[0] = 1.0;
  const auto inst = truncated_halfline_instance(60, d, omega_star, 77);
  FitConfig cfg;
  cfg.seed = 1;
  cfg.max_iters = 5000;
  const double lambda_big =
      reg_gradient(Vector::Zero(d), inst).cwiseAbs().maxCoeff() * 1.5;
  const auto fit = fit_trunc_lasso(inst, lambda_big, cfg);
  CHECK(fit.omega_hat.cwiseAbs().maxCoeff() == 0.0);
  CHECK(fit.support_hat.empty());
}

TEST_CASE("lasso: untruncated match with coordinate descent oracle") {
  FitConfig cfg;
  cfg.seed = 2;
  cfg.max_iters = 20000;
  for (uint64_t s = 0; s < 20; ++s) {
    const int d = 3 + static_cast<int>(s % 4);
    Vector omega_star = Vector::Zero(d);
    omega_star[0] = 1.2;
    omega_star[d - 1] = -0.7;
    const auto inst = untruncated_instance(80, d, omega_star, 800 + s);
    const double lambda = 0.05 + 0.01 * static_cast<double>(s % 3);
    const auto fit = fit_trunc_lasso(inst, lambda, cfg);
    const Vector cd = oracles::cd_lasso(inst.X, inst.y, lambda);
    CHECK((fit.omega_hat - cd).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(fit.subgradient_residual <= 1e-6);
  }
}

TEST_CASE("lasso: no false inclusion across seeded truncated trials") {
  FitConfig cfg;
  cfg.seed = 3;
  cfg.max_iters = 20000;
  int good = 0;
  const int trials = 30;
  for (uint64_t s = 0; s < trials; ++s) {
    const auto inst = gen_regression_instance(
        600, 50, 3, DesignScheme::kGaussClipped, 1.0, 1.0,
        IntervalUnion::at_most(1.0), 9000 + s);
    const double alpha0 = audit_survival(inst, Vector::Zero(50));
    const double sig = audit_min_eigenvalue(inst.X, *inst.support);
    const double lambda = lambda_reg_default(alpha0, sig, 1.0, 3.0);
    const auto fit = fit_trunc_lasso(inst, lambda, cfg);
    const auto m = error_metrics(fit.omega_hat, *inst.omega_star);
    if (m.no_false_inclusion) ++good;
  }
  CHECK(good >= 27);  // >= 90%
}

TEST_CASE("fit_restricted: reductions and order invariance") {
  const int d = 5;
  Vector omega_star = Vector::Zero(d);
  omega_star[1] = 1.0;
  omega_star[3] = -0.8;
  const auto inst = untruncated_instance(100, d, omega_star, 78);
  FitConfig cfg;
  cfg.seed = 4;
  cfg.max_iters = 20000;

  // K = [d] behaves exactly like the unrestricted solver.
  std::vector<int> all{0, 1, 2, 3, 4};
  const auto full = fit_trunc_lasso(inst, 0.05, cfg);
  const auto restr_all = fit_restricted(inst, all, 0.05, cfg);
  CHECK((full.omega_hat - restr_all.omega_hat).cwiseAbs().maxCoeff() <= 1e-8);

  // Restricted to the true support, lambda = 0, S = R: OLS on X_K.
  std::vector<int> k{1, 3};
  const auto restr = fit_restricted(inst, k, 0.0, cfg);
  Matrix xk(inst.n(), 2);
  xk.col(0) = inst.X.col(1);
  xk.col(1) = inst.X.col(3);
  const Vector beta = oracles::ols(xk, inst.y);
  CHECK(restr.omega_hat[1] == doctest::Approx(beta[0]).epsilon(1e-7));
  CHECK(restr.omega_hat[3] == doctest::Approx(beta[1]).epsilon(1e-7));
  CHECK(restr.omega_hat[0] == 0.0);
  CHECK(restr.omega_hat[2] == 0.0);
  CHECK(restr.omega_hat[4] == 0.0);

  // Restricted lasso against the CD oracle on the subdesign.
  const auto restr_l1 = fit_restricted(inst, k, 0.07, cfg);
  const Vector cd = oracles::cd_lasso(xk, inst.y, 0.07);
  CHECK(restr_l1.omega_hat[1] == doctest::Approx(cd[0]).epsilon(1e-5));
  CHECK(restr_l1.omega_hat[3] == doctest::Approx(cd[1]).epsilon(1e-5));

  // Order of K does not matter.
  const auto shuffled = fit_restricted(inst, {3, 1}, 0.07, cfg);
  CHECK((shuffled.omega_hat - restr_l1.omega_hat).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(fit_restricted(inst, {}, 0.05, cfg), std::invalid_argument);
}

TEST_CASE("dual certificate: trivial, strong-signal, and tiny-lambda cases") {
  const int d = 5;
  Vector omega_star = Vector::Zero(d);
  omega_star[0] = 2.0;
  FitConfig cfg;
  cfg.seed = 5;
  cfg.max_iters = 20000;

  const auto inst = untruncated_instance(200, d, omega_star, 79);
  std::vector<int> all{0, 1, 2, 3, 4};
  const auto restr_all = fit_restricted(inst, all, 0.05, cfg);
  const auto cert_all = dual_certificate(inst, restr_all, 0.05);
  CHECK(cert_all.max_off_support == 0.0);
  CHECK(cert_all.feasible);

  // Orthogonal design, strong signal, moderate lambda: feasible in every
  // seeded trial.
  int feas = 0;
  const int trials = 25;
  for (uint64_t s = 0; s < trials; ++s) {
    const int64_t n = 400;
    const Matrix raw = gauss_matrix(n, d, 1500 + s);
    Eigen::HouseholderQR<Matrix> qr(raw);
    Matrix q = qr.householderQ() * Matrix::Identity(n, d);
    RegressionInstance tri;
    tri.X = q * std::sqrt(static_cast<double>(n));
    tri.y.resize(n);
    CounterRng noise(1600 + s, RngPurpose::kResponseDraw, 0);
    for (int64_t i = 0; i < n; ++i) {
      tri.y[i] = tri.X(i, 0) * 2.0 + noise.normal();
    }
    tri.s_oracle = TruncationOracle::full_space(1);
    const auto restr = fit_restricted(tri, {0}, 0.3, cfg);
    const auto cert = dual_certificate(tri, restr, 0.3);
    if (cert.feasible) ++feas;
    CHECK(cert.subgradient_valid);
  }
  CHECK(feas == trials);

  // lambda -> 1e-8 with noise: infeasible is a reported result, not an error.
  const auto restr_tiny = fit_restricted(inst, {0}, 1e-8, cfg);
  const auto cert_tiny = dual_certificate(inst, restr_tiny, 1e-8);
  CHECK(cert_tiny.feasible == false);

  CHECK_THROWS_AS(dual_certificate(inst, restr_tiny, 0.0),
                  std::invalid_argument);
  const auto unrestricted = fit_trunc_lasso(inst, 0.05, cfg);
  CHECK_THROWS_AS(dual_certificate(inst, unrestricted, 0.05),
                  std::invalid_argument);
}

TEST_CASE("error metrics: stated cases") {
  Vector a(3), b(3);
  a << 1.0, 0.0, -2.0;
  b << 1.0, 0.0, -2.0;
  const auto same = error_metrics(a, b);
  CHECK(same.linf == 0.0);
  CHECK(same.l2 == 0.0);
  CHECK(same.no_false_inclusion);
  CHECK(same.above_threshold_recovered);

  Vector hat = b;
  hat[1] = 0.3;  // off support
  const auto off = error_metrics(hat, b);
  CHECK(off.no_false_inclusion == false);
  CHECK(off.linf == doctest::Approx(0.3));

  CounterRng rng(31, RngPurpose::kInit, 2);
  Vector u(6), v(6);
  for (int j = 0; j < 6; ++j) {
    u[j] = rng.normal();
    v[j] = rng.normal();
  }
  const auto r = error_metrics(u, v);
  CHECK(r.linf == doctest::Approx((u - v).cwiseAbs().maxCoeff()));
  CHECK(r.l2 == doctest::Approx((u - v).norm()));
}

TEST_CASE("lambda_reg_default: arithmetic and monotonicity") {
  CHECK(lambda_reg_default(1.0, 1.0, 1.0, 1.0) == 1.0);
  CHECK(lambda_reg_default(0.5, 0.8, 1.0, 4.0) ==
        doctest::Approx(0.0125).epsilon(1e-12));
  double prev = 0.0;
  for (double alpha = 0.1; alpha <= 1.0; alpha += 0.1) {
    const double cur = lambda_reg_default(alpha, 1.0, 1.0, 3.0);
    CHECK(cur > prev);
    prev = cur;
  }
  CHECK(lambda_reg_default(0.5, 1.0, 1.0, 2.0) >
        lambda_reg_default(0.5, 1.0, 1.0, 4.0));
  CHECK_THROWS_AS(lambda_reg_default(0.0, 1.0, 1.0, 1.0),
                  std::invalid_argument);
}

TEST_CASE("convexity along random segments (truncated path)") {
  const int d = 3;
  Vector omega_star(d);
  omega_star << 0.4, -0.2, 0.6;
  const auto inst = truncated_halfline_instance(25, d, omega_star, 80);
  CounterRng rng(102, RngPurpose::kInit, 0);
  for (int trial = 0; trial < 15; ++trial) {
    Vector a(d), dir(d);
    for (int j = 0; j < d; ++j) {
      a[j] = rng.normal();
      dir[j] = rng.normal();
    }
    dir.normalize();
    const double h = 1e-3;
    const double f0 = reg_nll(a, inst);
    const double fp = reg_nll(a + h * dir, inst);
    const double fm = reg_nll(a - h * dir, inst);
    CHECK((fp - 2.0 * f0 + fm) / (h * h) >= -1e-8);
  }
}

TEST_CASE("generic oracle path uses CRN Monte Carlo and is deterministic") {
  const int d = 2;
  Vector omega_star(d);
  omega_star << 0.5, -0.5;
  auto inst = truncated_halfline_instance(30, d, omega_star, 81);
  inst.s_oracle = TruncationOracle::generic(
      1, [](const Vector& v) { return v[0] >= 0.0; });

  CHECK_THROWS_AS(reg_nll(omega_star, inst), BadConfig);  // mc_batch unset

  RowMomentOptions opt;
  opt.mc_batch = 20000;
  opt.seed = 9;
  const Vector g1 = reg_gradient(omega_star, inst, opt);
  const Vector g2 = reg_gradient(omega_star, inst, opt);
  CHECK((g1 - g2).cwiseAbs().maxCoeff() == 0.0);

  // And close to the exact closed-form path.
  auto exact = inst;
  exact.s_oracle = TruncationOracle::intervals(IntervalUnion::at_least(0.0));
  const Vector ge = reg_gradient(omega_star, exact);
  CHECK((g1 - ge).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("serial reference gradient equals the parallel kernel bitwise") {
  const int d = 4;
  Vector omega_star(d);
  omega_star << 0.3, 0.0, -0.3, 0.1;
  const auto inst = truncated_halfline_instance(3000, d, omega_star, 82);
  Vector omega(d);
  omega << 0.2, 0.1, -0.2, 0.0;
  const Vector par = reg_gradient(omega, inst);
  const Vector ser = serial::reg_gradient(omega, inst);
  CHECK((par - ser).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lasso with lambda = 0 and S = R reduces to least squares") {
  const int d = 4;
  Vector omega_star(d);
  omega_star << 1.0, -0.5, 0.0, 0.25;
  const auto inst = untruncated_instance(120, d, omega_star, 83);
  FitConfig cfg;
  cfg.seed = 6;
  cfg.max_iters = 50000;
  const auto fit = fit_trunc_lasso(inst, 0.0, cfg);
  const Vector beta = oracles::ols(inst.X, inst.y);
  CHECK((fit.omega_hat - beta).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("error_metrics dimension mismatch") {
  CHECK_THROWS_AS(error_metrics(Vector::Zero(3), Vector::Zero(4)),
                  std::invalid_argument);
}
