#include <doctest.h>
#include <omp.h>

#include <cmath>

#include "oracles.hpp"
#include "truncest/experiments.hpp"
#include "truncest/reference.hpp"
#include "truncest/rng.hpp"
#include "truncest/trunc_sampler.hpp"

using namespace truncest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Survival of box(-2,2)^10 under the d=10 chain model, pinned from a
// 2e7-proposal Monte-Carlo run (stderr 1.1e-4).
constexpr double kChainBoxSurvival = 0.57896;

GaussianParams std_gauss(int d) {
  GaussianParams p;
  p.mu = Vector::Zero(d);
  p.sigma = Matrix::Identity(d, d);
  return p;
}

}  // namespace

TEST_CASE("sampling untruncated: accept rate is exactly one") {
  FitConfig cfg;
  cfg.seed = 11;
  const auto batch = sample_truncated_mvn(std_gauss(3),
                                          TruncationOracle::full_space(3), 100,
                                          cfg);
  CHECK(batch.accept_rate == 1.0);
  CHECK(batch.proposals_used == 100);
  CHECK(batch.n() == 100);
}

TEST_CASE("half-space sampling matches the half-normal mean") {
  FitConfig cfg;
  cfg.seed = 5;
  const auto oracle = TruncationOracle::intervals(IntervalUnion::at_least(0.0));
  const auto batch = sample_truncated_mvn(std_gauss(1), oracle, 100000, cfg);
  const double mean = batch.data.col(0).mean();
  CHECK(mean == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.013));
  CHECK(batch.data.minCoeff() >= 0.0);
  CHECK(batch.accept_rate == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("chain/box configuration: membership and frozen survival") {
  const NaturalParams truth = gen_chain_precision(10, 0.2);
  const GaussianParams moment = to_moment(truth);
  const auto oracle = gen_box_truncation(10, -2.0, 2.0);

  FitConfig cfg;
  cfg.seed = 20240820;
  const auto batch = sample_truncated_mvn(moment, oracle, 50000, cfg);
  CHECK(batch.data.cwiseAbs().maxCoeff() < 2.0);

  const auto est = estimate_survival(moment, oracle, 1000000, 77);
  CHECK(std::abs(est.alpha_hat - kChainBoxSurvival) <=
        3.0 * (est.stderr + 1.1e-4));
  CHECK(std::abs(batch.accept_rate - kChainBoxSurvival) < 0.01);
}

TEST_CASE("survival: full space and symmetric half-line") {
  const auto full = estimate_survival(std_gauss(2),
                                      TruncationOracle::full_space(2), 2000, 1);
  CHECK(full.alpha_hat == 1.0);
  CHECK(full.stderr == 0.0);

  const auto half = estimate_survival(
      std_gauss(1), TruncationOracle::intervals(IntervalUnion::at_least(0.0)),
      200000, 2);
  CHECK(half.alpha_hat == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("survival of a numerically empty set returns zero without error") {
  const auto est = estimate_survival(
      std_gauss(1), TruncationOracle::intervals(IntervalUnion::at_least(40.0)),
      1000, 3);
  CHECK(est.alpha_hat == 0.0);
}

TEST_CASE("sampler throws SurvivalTooLow when starved") {
  FitConfig cfg;
  cfg.seed = 9;
  cfg.max_rejects_per_sample = 50;
  const auto oracle =
      TruncationOracle::intervals(IntervalUnion::at_least(12.0));
  CHECK_THROWS_AS(sample_truncated_mvn(std_gauss(1), oracle, 10, cfg),
                  SurvivalTooLow);
}

TEST_CASE("empirical moments: single row errors, half-normal variance") {
  Matrix one(1, 2);
  one << 3.0, -1.0;
  CHECK(empirical_mean(one)[0] == 3.0);
  CHECK_THROWS_AS(empirical_moments(one), std::invalid_argument);

  FitConfig cfg;
  cfg.seed = 31;
  const auto oracle = TruncationOracle::intervals(IntervalUnion::at_least(0.0));
  const auto batch = sample_truncated_mvn(std_gauss(1), oracle, 100000, cfg);
  const auto em = empirical_moments(batch.data);
  CHECK(em.sigma_bar(0, 0) ==
        doctest::Approx(1.0 - 2.0 / M_PI).epsilon(0.03));

  const auto untrunc = sample_truncated_mvn(
      std_gauss(3), TruncationOracle::full_space(3), 100000, cfg);
  const auto em3 = empirical_moments(untrunc.data);
  CHECK(em3.mu_bar.cwiseAbs().maxCoeff() < 0.02);
  CHECK(norm_of(em3.sigma_bar - Matrix::Identity(3, 3), Norm::kOp2) < 0.05);
}

TEST_CASE("moments_1d: stated values") {
  const auto whole = moments_1d(0.0, IntervalUnion::whole_line());
  CHECK(whole.mass == 1.0);
  CHECK(whole.mean == doctest::Approx(0.0));
  CHECK(whole.variance == doctest::Approx(1.0).epsilon(1e-12));

  const auto half = moments_1d(0.0, IntervalUnion::at_least(0.0));
  CHECK(half.mass == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(half.mean == doctest::Approx(0.797885).epsilon(1e-6));
  CHECK(half.variance == doctest::Approx(0.363380).epsilon(1e-6));

  const auto sym = moments_1d(0.0, IntervalUnion::between(-2.0, 2.0));
  CHECK(sym.mass == doctest::Approx(0.954500).epsilon(1e-6));
  CHECK(sym.mean == doctest::Approx(0.0));
  CHECK(sym.variance == doctest::Approx(0.7737413).epsilon(1e-6));

  CHECK_THROWS_AS(moments_1d(0.0, IntervalUnion::at_least(40.0)),
                  SurvivalTooLow);
}

TEST_CASE("moments_1d agrees with the quadrature oracle on a grid") {
  const std::vector<std::vector<std::pair<double, double>>> sets = {
      {{0.0, kInf}},
      {{-kInf, 0.0}},
      {{-2.0, 2.0}},
      {{1.0, 2.0}, {3.0, 4.0}}};
  for (int mi = -3; mi <= 3; ++mi) {
    const double m = mi;
    for (const auto& segs : sets) {
      const auto got = moments_1d(m, IntervalUnion(segs));
      const auto want = oracles::quad_moments(m, segs);
      CHECK(std::abs(got.mass - want.mass) <= 1e-8);
      CHECK(std::abs(got.mean - want.mean) <= 1e-8);
      CHECK(std::abs(got.variance - want.variance) <= 1e-8);
    }
  }
}

TEST_CASE("monotonicity: enlarging the union never decreases mass") {
  CounterRng rng(888, RngPurpose::kInit, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = 4.0 * (rng.uniform() - 0.5);
    const double b = a + 3.0 * rng.uniform() + 0.01;
    const double c = b + rng.uniform();
    const double dd = c + 2.0 * rng.uniform() + 0.01;
    const double m = 3.0 * (rng.uniform() - 0.5);
    const auto small = moments_1d(m, IntervalUnion({{a, b}}));
    const auto big = moments_1d(m, IntervalUnion({{a, b}, {c, dd}}));
    CHECK(big.mass >= small.mass - 1e-15);
  }
}

TEST_CASE("1-d sampler: union membership and segment hit ratios") {
  const IntervalUnion u({{1.0, 2.0}, {3.0, 4.0}});
  const auto oracle = TruncationOracle::intervals(u);
  const Vector draws = sample_truncated_normal_1d(0.0, oracle, 100000, 44);

  int64_t lo_hits = 0;
  for (Eigen::Index i = 0; i < draws.size(); ++i) {
    CHECK(u.contains(draws[i]));
    if (draws[i] <= 2.0) ++lo_hits;
  }
  const auto m_lo = moments_1d(0.0, IntervalUnion({{1.0, 2.0}}));
  const auto m_all = moments_1d(0.0, u);
  const double expect = m_lo.mass / m_all.mass;
  const double got = static_cast<double>(lo_hits) / draws.size();
  const double se = std::sqrt(expect * (1 - expect) / draws.size());
  CHECK(std::abs(got - expect) <= 3.0 * se);
}

TEST_CASE("1-d sampler: whole line and half line means") {
  const Vector z = sample_truncated_normal_1d(
      0.7, TruncationOracle::full_space(1), 100000, 10);
  CHECK(z.mean() == doctest::Approx(0.7).epsilon(0.02));
  CHECK((z.array() - z.mean()).square().mean() ==
        doctest::Approx(1.0).epsilon(0.03));

  const Vector h = sample_truncated_normal_1d(
      0.0, TruncationOracle::intervals(IntervalUnion::at_least(0.0)), 100000,
      11);
  CHECK(h.mean() == doctest::Approx(0.797885).epsilon(0.013));
}

TEST_CASE("1-d sampler: generic oracle path with rejection") {
  const auto gen = TruncationOracle::generic(
      1, [](const Vector& v) { return v[0] > 0.0; });
  const Vector z = sample_truncated_normal_1d(0.0, gen, 20000, 12);
  CHECK(z.minCoeff() > 0.0);
  CHECK(z.mean() == doctest::Approx(0.797885).epsilon(0.03));

  const auto impossible = TruncationOracle::generic(
      1, [](const Vector&) { return false; });
  CHECK_THROWS_AS(sample_truncated_normal_1d(0.0, impossible, 10, 13, 100),
                  SurvivalTooLow);
}

TEST_CASE("determinism: serial reference and thread counts agree bitwise") {
  const NaturalParams truth = gen_chain_precision(6, 0.2);
  const GaussianParams moment = to_moment(truth);
  const auto oracle = gen_box_truncation(6, -2.0, 2.0);
  FitConfig cfg;
  cfg.seed = 321;

  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto b1 = sample_truncated_mvn(moment, oracle, 4000, cfg);
  const auto s1 = estimate_survival(moment, oracle, 20000, 55);
  omp_set_num_threads(8);
  const auto b8 = sample_truncated_mvn(moment, oracle, 4000, cfg);
  const auto s8 = estimate_survival(moment, oracle, 20000, 55);
  omp_set_num_threads(saved);

  CHECK(b1.proposals_used == b8.proposals_used);
  CHECK((b1.data - b8.data).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s1.alpha_hat == s8.alpha_hat);

  const auto bs = serial::sample_truncated_mvn(moment, oracle, 4000, cfg);
  CHECK(bs.proposals_used == b1.proposals_used);
  CHECK((bs.data - b1.data).cwiseAbs().maxCoeff() == 0.0);
  const auto ss = serial::estimate_survival(moment, oracle, 20000, 55);
  CHECK(ss.alpha_hat == s1.alpha_hat);

  const auto em_par = empirical_moments(b1.data);
  const auto em_ser = serial::empirical_moments(b1.data);
  CHECK((em_par.sigma_bar - em_ser.sigma_bar).cwiseAbs().maxCoeff() == 0.0);
  CHECK((em_par.mu_bar - em_ser.mu_bar).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("precondition violations surface as invalid_argument") {
  CHECK_THROWS_AS(
      estimate_survival(std_gauss(1), TruncationOracle::full_space(1), 50, 1),
      std::invalid_argument);
  FitConfig cfg;
  CHECK_THROWS_AS(
      sample_truncated_mvn(std_gauss(2), TruncationOracle::full_space(2), 0,
                           cfg),
      std::invalid_argument);
  CHECK_THROWS_AS(moments_gauss_1d(0.0, -1.0, IntervalUnion::whole_line()),
                  std::invalid_argument);
}
