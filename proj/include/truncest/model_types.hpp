#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace truncest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Error taxonomy. Codes match the CLI's machine-parsable diagnostics.

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

class SurvivalTooLow : public Error {
 public:
  explicit SurvivalTooLow(const std::string& what)
      : Error("survival_too_low", what) {}
};

class NonFinite : public Error {
 public:
  explicit NonFinite(const std::string& what) : Error("non_finite", what) {}
};

class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(const std::string& what)
      : Error("singular_gram", what) {}
};

class BadConfig : public Error {
 public:
  explicit BadConfig(const std::string& what) : Error("bad_config", what) {}
};

// ---------------------------------------------------------------------------
// 1-D truncation sets.

/// Disjoint, sorted union of open-ended real intervals. Canonicalized on
/// construction: segments sorted, touching/overlapping segments merged, so
/// equal sets compare equal.
class IntervalUnion {
 public:
  using Segment = std::pair<double, double>;

  IntervalUnion() = default;
  explicit IntervalUnion(std::vector<Segment> segments);

  static IntervalUnion whole_line();
  static IntervalUnion at_least(double a);  // [a, +inf)
  static IntervalUnion at_most(double b);   // (-inf, b]
  static IntervalUnion between(double a, double b);

  const std::vector<Segment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }
  bool contains(double x) const;

  /// The set {(x - shift) / scale : x in S}; scale > 0.
  IntervalUnion standardized(double shift, double scale = 1.0) const;

  bool operator==(const IntervalUnion& other) const = default;

 private:
  std::vector<Segment> segments_;
};

// ---------------------------------------------------------------------------
// Membership oracle over R^d (or R for regression responses).

/// Immutable value; membership tests are pure, so an oracle may be shared
/// freely across threads. Generic predicates must honor the same contract.
class TruncationOracle {
 public:
  enum class Kind { kFullSpace, kBox, kIntervals, kGeneric };
  using Predicate = std::function<bool(const Vector&)>;

  static TruncationOracle full_space(int dim);
  static TruncationOracle box(Vector lo, Vector hi);
  static TruncationOracle intervals(IntervalUnion u);
  static TruncationOracle generic(int dim, Predicate pred);

  Kind kind() const { return kind_; }
  int dimension() const { return dim_; }
  bool contains(const Vector& x) const;
  bool contains1d(double x) const;

  /// Interval-union view of a 1-D oracle (full space and 1-D boxes are
  /// converted). Throws BadConfig for generic oracles: closed forms are
  /// unavailable there and callers must say so explicitly.
  IntervalUnion as_interval_union() const;

  bool has_closed_form() const { return kind_ != Kind::kGeneric; }
  const Vector& box_lo() const { return lo_; }
  const Vector& box_hi() const { return hi_; }

 private:
  TruncationOracle(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  Kind kind_ = Kind::kFullSpace;
  int dim_ = 0;
  Vector lo_, hi_;
  IntervalUnion union_;
  Predicate pred_;
};

// ---------------------------------------------------------------------------
// Gaussian parameterizations.

/// Moment parameterization (mu, Sigma). validate() enforces symmetry within
/// 1e-12 and a strictly positive spectrum.
struct GaussianParams {
  Vector mu;
  Matrix sigma;

  int dim() const { return static_cast<int>(mu.size()); }
  void validate() const;
};

/// Natural parameterization (Theta = Sigma^-1, v = Theta * mu).
struct NaturalParams {
  Matrix theta;
  Vector v;

  int dim() const { return static_cast<int>(v.size()); }
  void validate(double eigen_floor = 0.0) const;
};

NaturalParams to_natural(const GaussianParams& p);
GaussianParams to_moment(const NaturalParams& q);

// ---------------------------------------------------------------------------
// Regression data.

struct RegressionInstance {
  Matrix X;          // n x d design
  Vector y;          // n responses, all inside the truncation set
  TruncationOracle s_oracle = TruncationOracle::full_space(1);

  std::optional<Vector> omega_star;        // ground truth, synthetic runs only
  std::optional<std::vector<int>> support;

  int64_t n() const { return X.rows(); }
  int d() const { return static_cast<int>(X.cols()); }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Fit configuration shared by both estimators.

struct FitConfig {
  double lambda = 0.0;
  // Single-sample gradient kicks scale with ||x||^2 (up to 2 sqrt(d) per
  // coordinate under a box); the step must keep them well under the smallest
  // precision eigenvalue or the iterate walks onto the spectral floor and the
  // implied model mean diverges.
  double step0 = 0.005;
  double step_decay = 5e-5;
  int64_t max_iters = 200000;
  int mc_batch = 1;
  double eigen_floor = 1e-5;
  uint64_t seed = 0;
  double binarize_lo = -0.1;
  double binarize_hi = 0.1;
  int64_t max_rejects_per_sample = 1000000;
  int64_t snapshot_every = 1000;
  bool tail_average = false;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Estimation output.

struct EstimateReport {
  NaturalParams natural;                 // GGM path
  Vector omega;                          // regression path (size 0 otherwise)
  std::map<std::string, double> metrics;
  std::map<std::string, double> diagnostics;
  std::vector<std::pair<int64_t, std::map<std::string, double>>> trace;

  /// Throws NonFinite if any metric is NaN or infinite; no such value may
  /// leave the estimator.
  void check_metrics_finite() const;
};

// ---------------------------------------------------------------------------
// Norms (op2 = spectral, inf = max row abs-sum, fro, entrywise l1 / linf,
// l1_off excludes the diagonal of a square matrix). Vectors are n x 1.

enum class Norm { kOp2, kInf, kFro, kL1, kLInf, kL1Off };

double norm_of(const Matrix& a, Norm which);

}  // namespace truncest
