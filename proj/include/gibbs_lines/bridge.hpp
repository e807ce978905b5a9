#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gibbs_lines/normal.hpp"

namespace gibbs_lines {

// Brownian bridge on [p, q] pinned to x at p and y at q.
struct BridgeSpec {
  double p = 0.0;
  double q = 1.0;
  double x = 0.0;
  double y = 0.0;
};

// Joint event {B(c) <= r, B(d) <= r} for two interior times.
struct TwoTimeQuery {
  double c = 0.0;
  double d = 0.0;
  double r = 0.0;
};

namespace detail {

inline void require_bridge_spec(const BridgeSpec& s) {
  if (!(s.q > s.p) || !std::isfinite(s.p) || !std::isfinite(s.q) ||
      !std::isfinite(s.x) || !std::isfinite(s.y))
    throw std::domain_error("bridge: need finite endpoints with q > p");
}

inline void require_interior_times(const BridgeSpec& s,
                                   const std::vector<double>& times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > s.p) || !(times[i] < s.q))
      throw std::domain_error("bridge: times must lie strictly inside (p, q)");
    if (i > 0 && !(times[i] > times[i - 1]))
      throw std::domain_error("bridge: times must be strictly increasing");
  }
}

template <class F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol,
                            int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace detail

inline double heat_kernel(double t, double x, double y) {
  if (!(t > 0)) throw std::domain_error("heat_kernel: t must be positive");
  const double d = y - x;
  return std::exp(-0.5 * d * d / t) / std::sqrt(2.0 * M_PI * t);
}

struct BridgeMoments {
  std::vector<double> mean;
  Eigen::MatrixXd cov;
};

// Mean vector and covariance matrix of the bridge at interior times.
inline BridgeMoments bridge_mean_cov(const BridgeSpec& spec,
                                     const std::vector<double>& times) {
  detail::require_bridge_spec(spec);
  detail::require_interior_times(spec, times);
  const auto n = static_cast<Eigen::Index>(times.size());
  const double len = spec.q - spec.p;
  BridgeMoments out;
  out.mean.resize(times.size());
  out.cov.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ti = times[static_cast<std::size_t>(i)];
    out.mean[static_cast<std::size_t>(i)] =
        spec.x + (ti - spec.p) / len * (spec.y - spec.x);
    for (Eigen::Index j = i; j < n; ++j) {
      const double tj = times[static_cast<std::size_t>(j)];
      const double v = (ti - spec.p) * (spec.q - tj) / len;
      out.cov(i, j) = v;
      out.cov(j, i) = v;
    }
  }
  return out;
}

// Draws the bridge at the given interior times by sequential conditioning;
// one normal variate per time, O(n) total.
template <class Rng>
std::vector<double> sample_bridge_on_grid(const BridgeSpec& spec,
                                          const std::vector<double>& times,
                                          Rng& rng) {
  detail::require_bridge_spec(spec);
  detail::require_interior_times(spec, times);
  std::vector<double> values(times.size());
  double t_prev = spec.p;
  double v_prev = spec.x;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const double gap = spec.q - t_prev;
    const double mean = v_prev + (t - t_prev) / gap * (spec.y - v_prev);
    const double var = (t - t_prev) * (spec.q - t) / gap;
    values[i] = mean + std::sqrt(var) * rng.normal();
    t_prev = t;
    v_prev = values[i];
  }
  return values;
}

// P(max over [0, T] of a bridge from 0 to a reaches level beta); requires
// beta above both endpoints.
inline double max_exceedance_prob(double T, double a, double beta) {
  if (!(T > 0)) throw std::domain_error("max_exceedance_prob: T must be positive");
  if (!(beta > std::max(a, 0.0)))
    throw std::domain_error("max_exceedance_prob: level must exceed both endpoints");
  return std::exp(-2.0 * beta * (beta - a) / T);
}

struct MillsRatio {
  double ratio = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
};

// Gaussian tail ratio (1 - Phi(x)) / phi(x) with the two-sided 1/(1+x)
// envelope at constant 2.
inline MillsRatio mills_ratio(double x) {
  MillsRatio out;
  out.ratio = mills_ratio_value(x);
  out.lower_bound = 1.0 / (2.0 * (1.0 + x));
  out.upper_bound = 2.0 / (1.0 + x);
  return out;
}

// Exact draw of (B(c), B(d)) conditioned on both lying at or below `level`,
// by Gibbs sweeps over the two exact one-dimensional truncated conditionals.
// The chain contracts geometrically; 32 sweeps put the residual bias far
// below double precision for any interior (c, d).
template <class Rng>
std::pair<double, double> sample_truncated_endpoint_pair(const BridgeSpec& spec,
                                                         double c, double d,
                                                         double level,
                                                         Rng& rng) {
  detail::require_bridge_spec(spec);
  if (!(spec.p < c && c < d && d < spec.q))
    throw std::domain_error("truncated pair: need p < c < d < q");
  if (!std::isfinite(level))
    throw std::domain_error("truncated pair: level must be finite");
  const double len = spec.q - spec.p;
  const double m1 = spec.x + (c - spec.p) / len * (spec.y - spec.x);
  const double m2 = spec.x + (d - spec.p) / len * (spec.y - spec.x);
  const double c11 = (c - spec.p) * (spec.q - c) / len;
  const double c12 = (c - spec.p) * (spec.q - d) / len;
  const double c22 = (d - spec.p) * (spec.q - d) / len;
  const double sd_u_given_v = std::sqrt(c11 - c12 * c12 / c22);
  const double sd_v_given_u = std::sqrt(c22 - c12 * c12 / c11);
  double u = std::min(m1, level);
  double v = std::min(m2, level);
  for (int sweep = 0; sweep < 32; ++sweep) {
    const double mu_u = m1 + c12 / c22 * (v - m2);
    u = sample_normal_below(rng, mu_u, sd_u_given_v, level);
    const double mu_v = m2 + c12 / c11 * (u - m1);
    v = sample_normal_below(rng, mu_v, sd_v_given_u, level);
  }
  return {u, v};
}

// Fills the bridge at `times` given pinned interior values at c and d.
// `times` must contain c and d exactly and may include the endpoints p, q,
// whose values are fixed by the spec.
template <class Rng>
std::vector<double> sample_conditioned_three_segments(
    const BridgeSpec& spec, double c, double d, double v_c, double v_d,
    const std::vector<double>& times, Rng& rng) {
  detail::require_bridge_spec(spec);
  if (!(spec.p < c && c < d && d < spec.q))
    throw std::domain_error("three segments: need p < c < d < q");
  if (!std::isfinite(v_c) || !std::isfinite(v_d))
    throw std::domain_error("three segments: pinned values must be finite");
  bool saw_c = false, saw_d = false;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0 && !(times[i] > times[i - 1]))
      throw std::domain_error("three segments: times must be strictly increasing");
    if (!(times[i] >= spec.p) || !(times[i] <= spec.q))
      throw std::domain_error("three segments: times must lie in [p, q]");
    saw_c |= times[i] == c;
    saw_d |= times[i] == d;
  }
  if (!saw_c || !saw_d)
    throw std::domain_error("three segments: times must include both pinned times");

  std::vector<double> values(times.size());
  double t_prev = spec.p;
  double v_prev = spec.x;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    // Right pin of the segment containing t.
    double t_pin, v_pin;
    if (t <= c) {
      t_pin = c;
      v_pin = v_c;
    } else if (t <= d) {
      t_pin = d;
      v_pin = v_d;
    } else {
      t_pin = spec.q;
      v_pin = spec.y;
    }
    double value;
    if (t == spec.p) {
      value = spec.x;
    } else if (t == c) {
      value = v_c;
    } else if (t == d) {
      value = v_d;
    } else if (t == spec.q) {
      value = spec.y;
    } else {
      const double gap = t_pin - t_prev;
      const double mean = v_prev + (t - t_prev) / gap * (v_pin - v_prev);
      const double var = (t - t_prev) * (t_pin - t) / gap;
      value = mean + std::sqrt(var) * rng.normal();
    }
    values[i] = value;
    t_prev = t;
    v_prev = value;
  }
  return values;
}

// P(B(c) <= r and B(d) <= r) by nested quadrature: outer integral over the
// B(c) marginal, inner factor the conditional Gaussian CDF. Absolute error
// well below 1e-10.
inline double two_time_below_prob(const BridgeSpec& spec, const TwoTimeQuery& q) {
  detail::require_bridge_spec(spec);
  if (!(spec.p < q.c && q.c < q.d && q.d < spec.q))
    throw std::domain_error("two_time_below_prob: need p < c < d < q");
  if (std::isnan(q.r)) throw std::domain_error("two_time_below_prob: NaN level");
  const double len = spec.q - spec.p;
  const double m1 = spec.x + (q.c - spec.p) / len * (spec.y - spec.x);
  const double m2 = spec.x + (q.d - spec.p) / len * (spec.y - spec.x);
  const double c11 = (q.c - spec.p) * (spec.q - q.c) / len;
  const double c12 = (q.c - spec.p) * (spec.q - q.d) / len;
  const double c22 = (q.d - spec.p) * (spec.q - q.d) / len;
  const double s1 = std::sqrt(c11);
  const double beta = c12 / c11;
  const double sc = std::sqrt(c22 - c12 * c12 / c11);
  const auto integrand = [&](double u) {
    const double z = (u - m1) / s1;
    const double mc = m2 + beta * (u - m1);
    return normal_pdf(z) / s1 * normal_cdf((q.r - mc) / sc);
  };
  // The outer mass lives within 14 sigma of min(m1, r); clipping there keeps
  // the truncation error below 1e-43 and the quadrature windows compact.
  const double lo = std::min(m1, q.r) - 14.0 * s1;
  const double hi = std::min(q.r, m1 + 14.0 * s1);
  const double value = detail::adaptive_simpson(integrand, lo, hi, 1e-12);
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace gibbs_lines
