#pragma once

#include "truncest/model_types.hpp"
#include "truncest/trunc_sampler.hpp"

namespace truncest::serial {

// Single-threaded reference implementations of the parallel kernels. They
// walk the same counter streams and the same fixed reduction chunks, so
// their outputs are bit-identical to the OpenMP versions; tests and the
// benchmark target rely on that.

SampleBatch sample_truncated_mvn(const GaussianParams& p,
                                 const TruncationOracle& oracle, int64_t n,
                                 const FitConfig& cfg);

SurvivalEstimate estimate_survival(const GaussianParams& p,
                                   const TruncationOracle& oracle, int64_t m,
                                   uint64_t seed);

EmpiricalMoments empirical_moments(const Matrix& data);

/// Truncated-regression gradient, one row at a time (see reg_estimator).
Vector reg_gradient(const Vector& omega, const RegressionInstance& inst);

}  // namespace truncest::serial
