#pragma once

#include <cmath>

namespace truncest {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kSqrt2Pi = 2.50662827463100050242;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

/// Lower-tail CDF of the standard normal.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

/// Upper-tail probability Q(x) = P(Z > x), stable for large x.
inline double norm_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

/// Inverse of norm_cdf on (0, 1). Accurate to ~1 ulp down to p = 1e-300
/// (Wichura's rational approximations on three branches).
double inv_norm_cdf(double p);

/// Mills ratio Q(x)/pdf(x) for x >= 0. Continued fraction in the far tail so
/// the value stays finite long after Q(x) underflows.
double mills_ratio(double x);

struct SegmentMoments {
  double mass = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

/// Mass, mean and variance of a standard normal restricted to [a, b],
/// a < b, either endpoint may be infinite. Switches to Mills-ratio forms
/// when the whole segment sits beyond |8| to dodge cancellation.
SegmentMoments std_segment_moments(double a, double b);

/// P(a <= Z <= b) for standard normal, computed on the side with no
/// cancellation.
double std_segment_mass(double a, double b);

}  // namespace truncest
