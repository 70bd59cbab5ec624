#include "truncest/model_types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

namespace truncest {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// IntervalUnion

IntervalUnion::IntervalUnion(std::vector<Segment> segments) {
  for (const auto& [a, b] : segments) {
    if (std::isnan(a) || std::isnan(b)) {
      throw BadConfig("interval endpoint is NaN");
    }
    if (!(a < b)) throw BadConfig("interval requires a < b");
  }
  std::sort(segments.begin(), segments.end());
  for (const auto& seg : segments) {
    if (!segments_.empty() && seg.first <= segments_.back().second) {
      segments_.back().second = std::max(segments_.back().second, seg.second);
    } else {
      segments_.push_back(seg);
    }
  }
}

IntervalUnion IntervalUnion::whole_line() {
  return IntervalUnion({{-kInf, kInf}});
}
IntervalUnion IntervalUnion::at_least(double a) {
  return IntervalUnion({{a, kInf}});
}
IntervalUnion IntervalUnion::at_most(double b) {
  return IntervalUnion({{-kInf, b}});
}
IntervalUnion IntervalUnion::between(double a, double b) {
  return IntervalUnion({{a, b}});
}

bool IntervalUnion::contains(double x) const {
  for (const auto& [a, b] : segments_) {
    if (x >= a && x <= b) return true;
    if (x < a) break;
  }
  return false;
}

IntervalUnion IntervalUnion::standardized(double shift, double scale) const {
  if (!(scale > 0.0)) throw BadConfig("standardized requires scale > 0");
  std::vector<Segment> out;
  out.reserve(segments_.size());
  for (const auto& [a, b] : segments_) {
    out.emplace_back((a - shift) / scale, (b - shift) / scale);
  }
  return IntervalUnion(std::move(out));
}

// ---------------------------------------------------------------------------
// TruncationOracle

TruncationOracle TruncationOracle::full_space(int dim) {
  if (dim < 1) throw BadConfig("oracle dimension must be positive");
  return TruncationOracle(Kind::kFullSpace, dim);
}

TruncationOracle TruncationOracle::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw BadConfig("box oracle: lo and hi must have equal positive length");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i])) {
      throw BadConfig("box oracle: lo[" + std::to_string(i) +
                      "] must be < hi[" + std::to_string(i) + "]");
    }
  }
  TruncationOracle o(Kind::kBox, static_cast<int>(lo.size()));
  o.lo_ = std::move(lo);
  o.hi_ = std::move(hi);
  return o;
}

TruncationOracle TruncationOracle::intervals(IntervalUnion u) {
  if (u.empty()) throw BadConfig("interval oracle: union is empty");
  TruncationOracle o(Kind::kIntervals, 1);
  o.union_ = std::move(u);
  return o;
}

TruncationOracle TruncationOracle::generic(int dim, Predicate pred) {
  if (dim < 1) throw BadConfig("oracle dimension must be positive");
  if (!pred) throw BadConfig("generic oracle: null predicate");
  TruncationOracle o(Kind::kGeneric, dim);
  o.pred_ = std::move(pred);
  return o;
}

bool TruncationOracle::contains(const Vector& x) const {
  if (x.size() != dim_) {
    throw std::invalid_argument("oracle membership: dimension mismatch");
  }
  switch (kind_) {
    case Kind::kFullSpace:
      return true;
    case Kind::kBox:
      // Open box: the boundary is excluded.
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!(x[i] > lo_[i] && x[i] < hi_[i])) return false;
      }
      return true;
    case Kind::kIntervals:
      return union_.contains(x[0]);
    case Kind::kGeneric:
      return pred_(x);
  }
  return false;
}

bool TruncationOracle::contains1d(double x) const {
  if (dim_ != 1) throw std::invalid_argument("contains1d on a d>1 oracle");
  switch (kind_) {
    case Kind::kFullSpace:
      return true;
    case Kind::kBox:
      return x > lo_[0] && x < hi_[0];
    case Kind::kIntervals:
      return union_.contains(x);
    case Kind::kGeneric: {
      Vector v(1);
      v[0] = x;
      return pred_(v);
    }
  }
  return false;
}

IntervalUnion TruncationOracle::as_interval_union() const {
  if (dim_ != 1) throw BadConfig("interval view requires a 1-D oracle");
  switch (kind_) {
    case Kind::kFullSpace:
      return IntervalUnion::whole_line();
    case Kind::kBox:
      return IntervalUnion::between(lo_[0], hi_[0]);
    case Kind::kIntervals:
      return union_;
    case Kind::kGeneric:
      throw BadConfig("generic oracle has no closed-form interval view");
  }
  return IntervalUnion();
}

// ---------------------------------------------------------------------------
// Parameterizations

namespace {

void require_symmetric(const Matrix& m, const char* name, double tol) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(name) + " must be square");
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!(asym <= tol * scale)) {
    throw std::invalid_argument(std::string(name) + " is not symmetric");
  }
}

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

void GaussianParams::validate() const {
  if (mu.size() != sigma.rows()) {
    throw std::invalid_argument("GaussianParams: mu/sigma dimension mismatch");
  }
  require_symmetric(sigma, "sigma", 1e-12);
  if (!(min_eigenvalue(sigma) > 0.0)) {
    throw SingularMatrix("covariance is not positive definite");
  }
}

void NaturalParams::validate(double eigen_floor) const {
  if (v.size() != theta.rows()) {
    throw std::invalid_argument("NaturalParams: theta/v dimension mismatch");
  }
  require_symmetric(theta, "theta", 1e-12);
  if (!(min_eigenvalue(theta) >= eigen_floor)) {
    throw SingularMatrix("precision matrix below eigenvalue floor");
  }
}

NaturalParams to_natural(const GaussianParams& p) {
  if (p.mu.size() != p.sigma.rows() || p.sigma.rows() != p.sigma.cols()) {
    throw std::invalid_argument("to_natural: dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(p.sigma);
  if (!(es.eigenvalues().minCoeff() > 1e-10)) {
    throw SingularMatrix("to_natural: covariance is numerically singular");
  }
  const Matrix theta = es.eigenvectors() *
                       es.eigenvalues().cwiseInverse().asDiagonal() *
                       es.eigenvectors().transpose();
  NaturalParams q;
  q.theta = 0.5 * (theta + theta.transpose());
  q.v = q.theta * p.mu;
  return q;
}

GaussianParams to_moment(const NaturalParams& q) {
  if (q.v.size() != q.theta.rows() || q.theta.rows() != q.theta.cols()) {
    throw std::invalid_argument("to_moment: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt(q.theta);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrix("to_moment: precision is not positive definite");
  }
  GaussianParams p;
  const Matrix id = Matrix::Identity(q.theta.rows(), q.theta.cols());
  const Matrix sigma = llt.solve(id);
  p.sigma = 0.5 * (sigma + sigma.transpose());
  p.mu = llt.solve(q.v);
  return p;
}

// ---------------------------------------------------------------------------
// RegressionInstance / FitConfig / EstimateReport

void RegressionInstance::validate() const {
  if (y.size() != X.rows()) {
    throw std::invalid_argument("RegressionInstance: X/y row mismatch");
  }
  if (s_oracle.dimension() != 1) {
    throw BadConfig("RegressionInstance: response oracle must be 1-D");
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!s_oracle.contains1d(y[i])) {
      throw std::invalid_argument("RegressionInstance: y[" +
                                  std::to_string(i) +
                                  "] violates the truncation set");
    }
  }
  if (omega_star) {
    if (omega_star->size() != X.cols()) {
      throw std::invalid_argument("RegressionInstance: omega_star dimension");
    }
    if (support) {
      for (int j = 0; j < d(); ++j) {
        const bool in_support =
            std::find(support->begin(), support->end(), j) != support->end();
        if (!in_support && (*omega_star)[j] != 0.0) {
          throw std::invalid_argument(
              "RegressionInstance: omega_star nonzero outside support");
        }
      }
    }
  }
}

void FitConfig::validate() const {
  if (!(lambda >= 0.0)) throw BadConfig("fit.lambda must be >= 0");
  if (!(step0 > 0.0)) throw BadConfig("fit.step0 must be > 0");
  if (!(step_decay >= 0.0)) throw BadConfig("fit.step_decay must be >= 0");
  if (max_iters < 1) throw BadConfig("fit.max_iters must be positive");
  if (mc_batch < 1) throw BadConfig("fit.mc_batch must be positive");
  if (!(eigen_floor > 0.0)) throw BadConfig("fit.eigen_floor must be > 0");
  if (!(binarize_lo < 0.0 && 0.0 < binarize_hi)) {
    throw BadConfig("fit.binarize interval must straddle zero");
  }
  if (max_rejects_per_sample < 1) {
    throw BadConfig("fit.max_rejects_per_sample must be positive");
  }
  if (snapshot_every < 1) throw BadConfig("fit.snapshot_every must be positive");
}

void EstimateReport::check_metrics_finite() const {
  for (const auto& [name, value] : metrics) {
    if (!std::isfinite(value)) {
      throw NonFinite("metric '" + name + "' is not finite");
    }
  }
}

// ---------------------------------------------------------------------------
// Norms

double norm_of(const Matrix& a, Norm which) {
  if (!a.allFinite()) throw NonFinite("norm_of: input has non-finite entries");
  switch (which) {
    case Norm::kOp2: {
      if (a.rows() == 1 || a.cols() == 1) return a.norm();
      Eigen::JacobiSVD<Matrix> svd(a);
      return svd.singularValues().maxCoeff();
    }
    case Norm::kInf:
      return a.cwiseAbs().rowwise().sum().maxCoeff();
    case Norm::kFro:
      return a.norm();
    case Norm::kL1:
      return a.cwiseAbs().sum();
    case Norm::kLInf:
      return a.cwiseAbs().maxCoeff();
    case Norm::kL1Off: {
      if (a.rows() != a.cols()) {
        throw std::invalid_argument("l1_off requires a square matrix");
      }
      return a.cwiseAbs().sum() - a.diagonal().cwiseAbs().sum();
    }
  }
  return 0.0;
}

}  // namespace truncest
