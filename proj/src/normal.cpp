#include "truncest/normal.hpp"

#include <algorithm>
#include <limits>

namespace truncest {

double inv_norm_cdf(double p) {
  // AS241 PPND16.
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  if (r <= 0.0) {
    return (q < 0.0) ? -std::numeric_limits<double>::infinity()
                     : std::numeric_limits<double>::infinity();
  }
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return (q < 0.0) ? -val : val;
}

double mills_ratio(double x) {
  if (x < 7.0) return norm_sf(x) / norm_pdf(x);
  // Backward recurrence of the Gauss continued fraction
  // R(x) = 1/(x + 1/(x + 2/(x + 3/(...)))).
  double f = x;
  for (int k = 48; k >= 1; --k) f = x + static_cast<double>(k) / f;
  return 1.0 / f;
}

double std_segment_mass(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a >= 0.0) return std::max(0.0, norm_sf(a) - norm_sf(b));
  if (b <= 0.0) return std::max(0.0, norm_cdf(b) - norm_cdf(a));
  return std::max(0.0, 1.0 - norm_sf(b) - norm_cdf(a));
}

namespace {

// Right-tail segment [a, b] with a >= tail threshold; all quantities divided
// through by pdf(a) so nothing underflows before the final mass.
SegmentMoments tail_moments(double a, double b) {
  const double ra = mills_ratio(a);
  double w = 0.0, rb = 0.0;
  if (std::isfinite(b)) {
    // pdf(b)/pdf(a) = exp(-(b-a)(b+a)/2); may underflow to 0, which simply
    // degrades [a,b] to [a,inf).
    w = std::exp(-0.5 * (b - a) * (b + a));
    rb = mills_ratio(b);
  }
  const double denom = ra - w * rb;
  const double bw = (w > 0.0) ? b * w : 0.0;  // avoids inf*0 for b = +inf
  SegmentMoments out;
  out.mass = norm_pdf(a) * denom;
  out.mean = (1.0 - w) / denom;
  const double second = 1.0 + (a - bw) / denom;
  out.variance = std::max(0.0, second - out.mean * out.mean);
  return out;
}

}  // namespace

SegmentMoments std_segment_moments(double a, double b) {
  SegmentMoments out;
  if (!(a < b)) return out;

  constexpr double kTail = 8.0;
  if (a >= kTail) return tail_moments(a, b);
  if (b <= -kTail) {
    SegmentMoments m = tail_moments(-b, -a);
    m.mean = -m.mean;
    return m;
  }

  const double z = std_segment_mass(a, b);
  if (z <= 0.0) return out;
  const double pa = std::isfinite(a) ? norm_pdf(a) : 0.0;
  const double pb = std::isfinite(b) ? norm_pdf(b) : 0.0;
  const double apa = std::isfinite(a) ? a * pa : 0.0;
  const double bpb = std::isfinite(b) ? b * pb : 0.0;
  out.mass = z;
  out.mean = (pa - pb) / z;
  const double second = 1.0 + (apa - bpb) / z;
  out.variance = std::max(0.0, second - out.mean * out.mean);
  return out;
}

}  // namespace truncest
