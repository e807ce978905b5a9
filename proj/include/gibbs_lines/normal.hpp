#pragma once

#include <cmath>
#include <stdexcept>

namespace gibbs_lines {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
inline constexpr double kSqrtHalf = 0.7071067811865475244;
inline constexpr double kSqrtPi = 1.7724538509055160273;
inline constexpr double kSqrtHalfPi = 1.2533141373155002512;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// exp(x^2) erfc(x). Direct product below the erfc underflow region, Stieltjes
// continued fraction beyond it; stays O(1/x) where erfc itself underflows.
inline double erfcx(double x) {
  if (std::isnan(x)) throw std::invalid_argument("erfcx: NaN");
  if (x < 0) return 2.0 * std::exp(x * x) - erfcx(-x);
  if (x < 6.0) return std::exp(x * x) * std::erfc(x);
  // sqrt(pi) e^{x^2} erfc(x) = 1/(x+ (1/2)/(x+ 1/(x+ (3/2)/(x+ ...)))).
  double f = 0.0;
  for (int k = 60; k >= 1; --k) f = (0.5 * k) / (x + f);
  return 1.0 / (kSqrtPi * (x + f));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * kSqrtHalf); }
inline double normal_sf(double x) { return 0.5 * std::erfc(x * kSqrtHalf); }

// log P(Z > x), finite far past the point where the survival function itself
// underflows (usable to x ~ 1e8).
inline double log_normal_sf(double x) {
  if (x <= 6.0) return std::log(normal_sf(x));
  return std::log(0.5 * erfcx(x * kSqrtHalf)) - 0.5 * x * x;
}

// Mills ratio (1 - Phi(x)) / phi(x) for x >= 0.
inline double mills_ratio_value(double x) {
  if (!(x >= 0)) throw std::domain_error("mills_ratio: x must be >= 0");
  return kSqrtHalfPi * erfcx(x * kSqrtHalf);
}

// Inverse standard normal CDF on (0,1). Rational minimax approximation with
// ~1e-16 relative accuracy over the full double range.
inline double probit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("probit: p must be in (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) *
                    r +
                4.5921953931549871457e+4) *
                   r +
               1.3731693765509461125e+4) *
                  r +
              1.9715909503065514427e+3) *
                 r +
             1.3314166789178437745e+2) *
                r +
            3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) *
                    r +
                2.1213794301586595867e+4) *
                   r +
               5.3941960214247511077e+3) *
                  r +
              6.8718700749205790830e+2) *
                 r +
             4.2313330701600911252e+1) *
                r +
            1.0);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e+0) *
                  r +
              3.64784832476320460504e+0) *
                 r +
             5.76949722146069140550e+0) *
                r +
            4.63033784615654529590e+0) *
               r +
           1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e+0) *
                r +
            2.05319162663775882187e+0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e+0) *
                r +
            5.46378491116411436990e+0) *
               r +
           6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return q < 0 ? -val : val;
}

// Exact draw from N(mu, sigma^2) conditioned on X <= level. Inverse CDF in
// the bulk; for truncation deeper than 6 sigma, exponential-proposal
// rejection on the standardized tail, which needs no CDF evaluation and
// works at any depth.
template <class Rng>
double sample_normal_below(Rng& rng, double mu, double sigma, double level) {
  if (!(sigma > 0)) throw std::invalid_argument("sample_normal_below: sigma must be positive");
  const double alpha = (level - mu) / sigma;
  if (alpha >= -6.0) {
    const double p = normal_cdf(alpha) * rng.uniform01();
    return mu + sigma * probit(p);
  }
  const double a = -alpha;
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double z = a - std::log(rng.uniform01()) / rate;
    const double d = z - rate;
    if (rng.uniform01() <= std::exp(-0.5 * d * d)) return mu - sigma * z;
  }
  throw std::runtime_error("sample_normal_below: rejection sampler stalled");
}

}  // namespace gibbs_lines
