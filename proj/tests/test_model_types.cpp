#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "truncest/io.hpp"
#include "truncest/model_types.hpp"
#include "truncest/rng.hpp"

using namespace truncest;

namespace {

Matrix random_matrix(int rows, int cols, uint64_t seed) {
  CounterRng rng(seed, RngPurpose::kInit, 99);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

Matrix random_spd(int d, uint64_t seed) {
  const Matrix a = random_matrix(d, d, seed);
  return a * a.transpose() + 0.5 * Matrix::Identity(d, d);
}

}  // namespace

TEST_CASE("norms: stated values") {
  const Matrix id3 = Matrix::Identity(3, 3);
  CHECK(norm_of(id3, Norm::kFro) == doctest::Approx(std::sqrt(3.0)));
  CHECK(norm_of(id3, Norm::kL1Off) == 0.0);

  Matrix a(2, 2);
  a << 1, -2, 3, -4;
  CHECK(norm_of(a, Norm::kInf) == 7.0);  // max row abs-sum
  CHECK(norm_of(a, Norm::kL1) == 10.0);
  CHECK(norm_of(a, Norm::kLInf) == 4.0);
  CHECK(norm_of(a, Norm::kL1Off) == 5.0);

  CHECK_THROWS_AS(norm_of(Matrix::Zero(2, 3), Norm::kL1Off),
                  std::invalid_argument);
  Matrix bad(1, 1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(norm_of(bad, Norm::kFro), NonFinite);
}

// The classical equivalences for symmetric matrices. (The textbook chain is
// sometimes quoted with an extra inf <= fro link in the middle; that one is
// false — a symmetric counterexample is easy to draw at d = 3 — so only the
// provable links are asserted here.)
TEST_CASE("norm ordering chain on symmetric matrices") {
  for (uint64_t s = 0; s < 40; ++s) {
    const int d = 2 + static_cast<int>(s % 5);
    Matrix m = random_matrix(d, d, 1000 + s);
    m = 0.5 * (m + m.transpose()).eval();
    const double op2 = norm_of(m, Norm::kOp2);
    const double inf = norm_of(m, Norm::kInf);
    const double fro = norm_of(m, Norm::kFro);
    const double sqd = std::sqrt(static_cast<double>(d));
    const double slack = 1e-12 * (1.0 + fro);
    CHECK(op2 <= inf + slack);
    CHECK(op2 <= fro + slack);
    CHECK(fro <= sqd * op2 + slack);
    CHECK(inf <= sqd * op2 + slack);
  }
}

TEST_CASE("to_natural: identity case") {
  GaussianParams p;
  p.mu = Vector::Zero(2);
  p.sigma = Matrix::Identity(2, 2);
  const NaturalParams q = to_natural(p);
  CHECK(q.theta.isApprox(Matrix::Identity(2, 2), 1e-14));
  CHECK(q.v.norm() == doctest::Approx(0.0));
}

TEST_CASE("to_natural diagonal example") {
  GaussianParams p;
  p.mu = Vector(2);
  p.mu << 1, 0;
  p.sigma = Matrix::Zero(2, 2);
  p.sigma(0, 0) = 2.0;
  p.sigma(1, 1) = 4.0;
  const NaturalParams q = to_natural(p);
  CHECK(q.theta(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(q.theta(1, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(q.v[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(q.v[1] == doctest::Approx(0.0));
}

TEST_CASE("round trip property on random SPD matrices") {
  for (uint64_t s = 0; s < 25; ++s) {
    GaussianParams p;
    p.sigma = random_spd(5, 2000 + s);
    p.mu = random_matrix(5, 1, 3000 + s).col(0);
    const GaussianParams back = to_moment(to_natural(p));
    CHECK((back.sigma - p.sigma).norm() <= 1e-8 * p.sigma.norm());
    CHECK((back.mu - p.mu).norm() <= 1e-8 * (1.0 + p.mu.norm()));
  }
  GaussianParams singular;
  singular.mu = Vector::Zero(2);
  singular.sigma = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(to_natural(singular), SingularMatrix);
}

TEST_CASE("interval union canonicalization and membership") {
  const IntervalUnion u({{3.0, 4.0}, {1.0, 2.0}, {1.5, 2.5}});
  REQUIRE(u.segments().size() == 2);
  CHECK(u.segments()[0].first == 1.0);
  CHECK(u.segments()[0].second == 2.5);
  CHECK(u.segments()[1].first == 3.0);
  CHECK(u.contains(1.0));
  CHECK(u.contains(2.7) == false);
  CHECK(IntervalUnion({{1.0, 2.0}, {2.0, 3.0}}) == IntervalUnion({{1.0, 3.0}}));
  CHECK_THROWS_AS(IntervalUnion({{2.0, 1.0}}), BadConfig);
}

TEST_CASE("oracle kinds and membership conventions") {
  const auto full = TruncationOracle::full_space(3);
  Vector x(3);
  x << 1e100, -4.0, 0.0;
  CHECK(full.contains(x));

  const auto box = TruncationOracle::box(Vector::Constant(2, -2.0),
                                         Vector::Constant(2, 2.0));
  Vector in(2), edge(2), out(2);
  in << 0.0, 1.9;
  edge << 2.0, 0.0;
  out << 2.1, 0.0;
  CHECK(box.contains(in));
  CHECK(box.contains(edge) == false);  // open box
  CHECK(box.contains(out) == false);

  const auto gen = TruncationOracle::generic(
      2, [](const Vector& v) { return v.sum() > 0.0; });
  CHECK(gen.contains(in));
  CHECK_THROWS_AS(gen.as_interval_union(), BadConfig);

  CHECK_THROWS_AS(
      TruncationOracle::box(Vector::Constant(2, 1.0), Vector::Constant(2, 1.0)),
      BadConfig);
}

TEST_CASE("matrix csv round trip is exact") {
  const Matrix m = random_matrix(7, 3, 555);
  const auto path = std::filesystem::temp_directory_path() / "truncest_m.csv";
  write_matrix_csv(path.string(), m);
  const Matrix back = read_matrix_csv(path.string());
  REQUIRE(back.rows() == m.rows());
  REQUIRE(back.cols() == m.cols());
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);  // %.17g is lossless
  std::filesystem::remove(path);
}

TEST_CASE("oracle json round trip with infinity sentinels") {
  const auto box = TruncationOracle::box(Vector::Constant(2, -2.0),
                                         Vector::Constant(2, 2.0));
  const auto box2 = oracle_from_json(oracle_to_json(box));
  CHECK(box2.kind() == TruncationOracle::Kind::kBox);
  CHECK(box2.box_lo()[0] == -2.0);

  const auto iv = TruncationOracle::intervals(
      IntervalUnion({{-std::numeric_limits<double>::infinity(), 1.0},
                     {3.0, 4.0}}));
  const json j = oracle_to_json(iv);
  CHECK(j.at("segments")[0][0] == "-inf");
  const auto iv2 = oracle_from_json(j);
  CHECK(iv2.as_interval_union() == iv.as_interval_union());

  const auto full = TruncationOracle::full_space(4);
  const auto full2 = oracle_from_json(oracle_to_json(full));
  CHECK(full2.kind() == TruncationOracle::Kind::kFullSpace);
  CHECK(full2.dimension() == 4);

  CHECK_THROWS_AS(oracle_to_json(TruncationOracle::generic(
                      1, [](const Vector&) { return true; })),
                  BadConfig);
  CHECK_THROWS_AS(oracle_from_json(json{{"kind", "box"},
                                        {"lo", {2.0}},
                                        {"hi", {-2.0}}}),
                  BadConfig);
}

TEST_CASE("fit config invariants") {
  FitConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.binarize_lo = 0.1;
  CHECK_THROWS_AS(cfg.validate(), BadConfig);
}

TEST_CASE("estimate report rejects non-finite metrics") {
  EstimateReport rep;
  rep.metrics["ok"] = 1.0;
  CHECK_NOTHROW(rep.check_metrics_finite());
  rep.metrics["bad"] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(rep.check_metrics_finite(), NonFinite);
}
