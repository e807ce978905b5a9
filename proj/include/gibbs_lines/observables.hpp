#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbs_lines/bridge.hpp"
#include "gibbs_lines/extended_real.hpp"
#include "gibbs_lines/hamiltonian.hpp"

namespace gibbs_lines {

// Probe window around t1 for the conditioned-ratio estimator. The window
// narrows as the scale w grows: the conditioning level drops like -log(w)
// while the window width is pinned to beta/H(A_w).
struct ObservableSchedule {
  double t1 = 0.0;
  int z = 1;
  double lambda = 1.0;
  double w = 0.0;
  double beta = 0.5;
  double A_w = 0.0;
  double V_w = 0.0;
  double c_w = 0.0;
  double d_w = 0.0;
  double a_w = 0.0;
  double b_w = 0.0;
};

inline ObservableSchedule schedule(double t1, int z, double lambda, double w,
                                   const Hamiltonian& H) {
  if (!std::isfinite(t1)) throw std::invalid_argument("schedule: t1 must be finite");
  if (z < 1) throw std::invalid_argument("schedule: z must be a positive integer");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("schedule: lambda must be positive");
  if (!(w > 0.0) || !std::isfinite(w))
    throw std::invalid_argument("schedule: w must be positive");

  ObservableSchedule s;
  s.t1 = t1;
  s.z = z;
  s.lambda = lambda;
  s.w = w;
  s.beta = 0.5 * static_cast<double>(z);
  s.A_w = std::log(w) / lambda;
  s.V_w = std::pow(w, -1.0 / 3.0);
  const double hA = evaluate(H, s.A_w);
  if (!(hA > 0.0))
    throw std::invalid_argument("schedule: H(A_w) must be positive");

  const double width = 2.0 * s.beta / hA;
  const double lo = std::pow(w, -1.25);
  const double hi = std::pow(w, -0.75);
  if (width < lo) {
    std::ostringstream msg;
    msg << "schedule: window width d_w - c_w = " << width << " < w^(-5/4) = " << lo
        << "; the scale w is outside the admissible range";
    throw std::invalid_argument(msg.str());
  }
  if (width > hi) {
    std::ostringstream msg;
    msg << "schedule: window width d_w - c_w = " << width << " > w^(-3/4) = " << hi
        << "; the scale w is outside the admissible range";
    throw std::invalid_argument(msg.str());
  }

  s.c_w = t1 - s.beta / hA;
  s.d_w = t1 + s.beta / hA;
  s.a_w = s.c_w - 1.0 / (w * w);
  s.b_w = s.d_w + 1.0 / (w * w);
  return s;
}

// Quadrature times for the window: uniform on [a_w, b_w] at roughly 1/256 of
// the inner window per step, with c_w and d_w spliced in exactly. The inner
// window is where the integrand varies, so the step is tied to its width.
inline std::vector<double> schedule_quadrature_times(const ObservableSchedule& s) {
  const double target = (s.d_w - s.c_w) / 256.0;
  const std::size_t count =
      2 * static_cast<std::size_t>(std::ceil((s.b_w - s.a_w) / target));
  std::vector<double> times(count);
  for (std::size_t i = 0; i < count; ++i)
    times[i] = s.a_w + (s.b_w - s.a_w) * static_cast<double>(i) /
                           static_cast<double>(count - 1);
  times.front() = s.a_w;
  times.back() = s.b_w;
  for (double probe : {s.c_w, s.d_w}) {
    const auto it = std::lower_bound(times.begin(), times.end(), probe);
    if (it == times.end() || *it != probe) times.insert(it, probe);
  }
  return times;
}

// Kahan-compensated running mean and second moment; merges preserve
// determinism when applied in a fixed order.
class MeanAccumulator {
 public:
  void add(double x) {
    ++n_;
    accumulate(sum_, sum_comp_, x);
    accumulate(sumsq_, sumsq_comp_, x * x);
  }

  void merge(const MeanAccumulator& other) {
    n_ += other.n_;
    accumulate(sum_, sum_comp_, other.sum_);
    accumulate(sum_, sum_comp_, other.sum_comp_);
    accumulate(sumsq_, sumsq_comp_, other.sumsq_);
    accumulate(sumsq_, sumsq_comp_, other.sumsq_comp_);
  }

  std::uint64_t count() const { return n_; }
  double total() const { return sum_ + sum_comp_; }

  double mean() const {
    if (n_ == 0) throw std::runtime_error("MeanAccumulator: no samples");
    return total() / static_cast<double>(n_);
  }

  double variance() const {
    if (n_ < 2) return 0.0;
    const double m = mean();
    const double raw = (sumsq_ + sumsq_comp_) - static_cast<double>(n_) * m * m;
    return std::max(0.0, raw / static_cast<double>(n_ - 1));
  }

  double standard_error() const {
    if (n_ == 0) return 0.0;
    return std::sqrt(variance() / static_cast<double>(n_));
  }

 private:
  static void accumulate(double& sum, double& comp, double x) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }

  std::uint64_t n_ = 0;
  double sum_ = 0.0;
  double sum_comp_ = 0.0;
  double sumsq_ = 0.0;
  double sumsq_comp_ = 0.0;
};

// Ratio of means over one shared sample stream: accumulates (a, b) pairs and
// a delta-method standard error that keeps the a-b covariance term.
class RatioAccumulator {
 public:
  void add(double a, double b) {
    ++n_;
    acc_a_.add(a);
    acc_b_.add(b);
    accumulate(sum_ab_, comp_ab_, a * b);
  }

  void merge(const RatioAccumulator& other) {
    n_ += other.n_;
    acc_a_.merge(other.acc_a_);
    acc_b_.merge(other.acc_b_);
    accumulate(sum_ab_, comp_ab_, other.sum_ab_);
    accumulate(sum_ab_, comp_ab_, other.comp_ab_);
  }

  std::uint64_t count() const { return n_; }

  double estimate() const {
    if (n_ == 0) throw std::runtime_error("RatioAccumulator: no samples");
    const double den = acc_b_.total();
    if (!(den > 0.0))
      throw std::runtime_error("RatioAccumulator: denominator total is not positive");
    return acc_a_.total() / den;
  }

  double covariance() const {
    if (n_ < 2) return 0.0;
    const double raw = (sum_ab_ + comp_ab_) -
                       static_cast<double>(n_) * acc_a_.mean() * acc_b_.mean();
    return raw / static_cast<double>(n_ - 1);
  }

  double standard_error() const {
    if (n_ < 2) return 0.0;
    const double r = estimate();
    const double mb = acc_b_.mean();
    const double var = acc_a_.variance() - 2.0 * r * covariance() +
                       r * r * acc_b_.variance();
    return std::sqrt(std::max(0.0, var) / (static_cast<double>(n_) * mb * mb));
  }

  bool degenerate() const {
    if (n_ < 2 || !(acc_b_.total() > 0.0)) return true;
    if (acc_a_.variance() == 0.0 && acc_b_.variance() == 0.0) return true;
    return !std::isfinite(standard_error());
  }

 private:
  static void accumulate(double& sum, double& comp, double x) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }

  std::uint64_t n_ = 0;
  MeanAccumulator acc_a_;
  MeanAccumulator acc_b_;
  double sum_ab_ = 0.0;
  double comp_ab_ = 0.0;
};

namespace detail {

inline void require_times_grid(const std::vector<double>& times) {
  if (times.size() < 2)
    throw std::invalid_argument("continuum weight: need at least two times");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("continuum weight: times must be strictly increasing");
}

}  // namespace detail

// Left-endpoint Riemann approximation of -int H(lower(u) - Q(u)) du on a
// uniform grid with step dt. The last point only closes the final interval.
inline double continuum_log_weight(const std::vector<double>& path,
                                   const std::vector<ExtendedReal>& lower,
                                   const Hamiltonian& H, double dt) {
  if (path.size() != lower.size())
    throw std::invalid_argument("continuum weight: grids must match");
  if (path.size() < 2)
    throw std::invalid_argument("continuum weight: need at least two times");
  if (!(dt > 0.0)) throw std::invalid_argument("continuum weight: dt must be positive");
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double term = evaluate(H, lower[i] - ExtendedReal(path[i]));
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return -dt * sum;
}

// Same quadrature on an arbitrary strictly increasing time grid.
inline double continuum_log_weight(const std::vector<double>& path,
                                   const std::vector<ExtendedReal>& lower,
                                   const Hamiltonian& H,
                                   const std::vector<double>& times) {
  if (path.size() != lower.size() || path.size() != times.size())
    throw std::invalid_argument("continuum weight: grids must match");
  detail::require_times_grid(times);
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double term =
        evaluate(H, lower[i] - ExtendedReal(path[i])) * (times[i + 1] - times[i]);
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return -sum;
}

inline std::function<ExtendedReal(double)> constant_curve(ExtendedReal v) {
  return [v](double) { return v; };
}

inline std::vector<ExtendedReal> curve_on_times(
    const std::function<ExtendedReal(double)>& curve, const std::vector<double>& times) {
  std::vector<ExtendedReal> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(curve(t));
  return out;
}

namespace detail {

// Interaction of consecutive-pair gaps down a stack of curves, top boundary
// first, optionally through the bottom boundary. Arguments are lower minus
// upper, matching the lattice convention.
inline double stack_log_weight(const std::vector<std::vector<double>>& curves,
                               const std::vector<ExtendedReal>& f_values,
                               const std::vector<ExtendedReal>& g_values,
                               const Hamiltonian& H, const std::vector<double>& times,
                               bool include_bottom) {
  double total = 0.0;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    double sum = 0.0, comp = 0.0;
    for (std::size_t m = 0; m + 1 < times.size(); ++m) {
      const ExtendedReal upper =
          i == 0 ? f_values[m] : ExtendedReal(curves[i - 1][m]);
      const double term =
          evaluate(H, ExtendedReal(curves[i][m]) - upper) * (times[m + 1] - times[m]);
      const double y = term - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    total -= sum;
  }
  if (include_bottom)
    total += continuum_log_weight(curves.back(), g_values, H, times);
  return total;
}

// Plain bridge values on a grid whose first and last entries are the
// bridge endpoints; interior values are sampled, endpoints are pinned.
template <class Rng>
std::vector<double> stitched_bridge(const BridgeSpec& spec,
                                    const std::vector<double>& times, Rng& rng) {
  if (times.size() < 2 || times.front() != spec.p || times.back() != spec.q)
    throw std::invalid_argument("stitched bridge: times must start at p and end at q");
  const std::vector<double> interior(times.begin() + 1, times.end() - 1);
  std::vector<double> values;
  values.reserve(times.size());
  values.push_back(spec.x);
  if (!interior.empty()) {
    const auto mid = sample_bridge_on_grid(spec, interior, rng);
    values.insert(values.end(), mid.begin(), mid.end());
  }
  values.push_back(spec.y);
  return values;
}

}  // namespace detail

// Ratio of two independent Monte Carlo means with a delta-method error bar.
struct RatioEstimate {
  double numerator_mean = 0.0;
  double denominator_mean = 0.0;
  double ratio = 0.0;
  double std_error = 0.0;
  std::uint64_t n_numerator = 0;
  std::uint64_t n_denominator = 0;
};

inline RatioEstimate combine_ratio(const MeanAccumulator& numerator,
                                   const MeanAccumulator& denominator) {
  if (numerator.count() == 0 || denominator.count() == 0)
    throw std::invalid_argument("combine_ratio: zero effective samples");
  RatioEstimate out;
  out.numerator_mean = numerator.mean();
  out.denominator_mean = denominator.mean();
  if (!(out.denominator_mean > 0.0))
    throw std::runtime_error("combine_ratio: denominator mean is not positive");
  out.ratio = out.numerator_mean / out.denominator_mean;
  const double cv_num = numerator.standard_error() / out.numerator_mean;
  const double cv_den = denominator.standard_error() / out.denominator_mean;
  out.std_error = std::abs(out.ratio) * std::sqrt(cv_num * cv_num + cv_den * cv_den);
  out.n_numerator = numerator.count();
  out.n_denominator = denominator.count();
  return out;
}

namespace detail {

inline void require_schedule_span(const BridgeSpec& spec, const ObservableSchedule& s) {
  if (spec.p != s.a_w || spec.q != s.b_w)
    throw std::invalid_argument(
        "conditioned ratio: bridge spec must span [a_w, b_w] exactly");
}

}  // namespace detail

// Mean Boltzmann weight over bridges conditioned to sit at or below -A_w at
// both probe times; one accumulator chunk from one RNG stream.
template <class Rng>
MeanAccumulator conditioned_weight_accumulator(
    const BridgeSpec& spec, const ObservableSchedule& sched,
    const std::function<ExtendedReal(double)>& lower_curve, const Hamiltonian& H,
    std::uint64_t n, Rng& rng) {
  detail::require_schedule_span(spec, sched);
  const auto times = schedule_quadrature_times(sched);
  const auto lower = curve_on_times(lower_curve, times);
  MeanAccumulator acc;
  for (std::uint64_t s = 0; s < n; ++s) {
    const auto endpoints =
        sample_truncated_endpoint_pair(spec, sched.c_w, sched.d_w, -sched.A_w, rng);
    const auto path = sample_conditioned_three_segments(
        spec, sched.c_w, sched.d_w, endpoints.first, endpoints.second, times, rng);
    acc.add(std::exp(continuum_log_weight(path, lower, H, times)));
  }
  return acc;
}

// Mean Boltzmann weight over unconditioned bridges on the same grid.
template <class Rng>
MeanAccumulator free_weight_accumulator(const BridgeSpec& spec,
                                        const ObservableSchedule& sched,
                                        const std::function<ExtendedReal(double)>& lower_curve,
                                        const Hamiltonian& H, std::uint64_t n, Rng& rng) {
  detail::require_schedule_span(spec, sched);
  const auto times = schedule_quadrature_times(sched);
  const auto lower = curve_on_times(lower_curve, times);
  MeanAccumulator acc;
  for (std::uint64_t s = 0; s < n; ++s) {
    const auto path = detail::stitched_bridge(spec, times, rng);
    acc.add(std::exp(continuum_log_weight(path, lower, H, times)));
  }
  return acc;
}

// Conditional-weight ratio E[W | both probes below -A_w] / E[W], the
// tractable form of the two-point conditioning probability ratio.
template <class Rng>
RatioEstimate estimate_conditioned_ratio(const BridgeSpec& spec,
                                         const ObservableSchedule& sched,
                                         const std::function<ExtendedReal(double)>& lower_curve,
                                         const Hamiltonian& H, std::uint64_t n_numerator,
                                         std::uint64_t n_denominator, Rng& numerator_rng,
                                         Rng& denominator_rng) {
  const auto num =
      conditioned_weight_accumulator(spec, sched, lower_curve, H, n_numerator, numerator_rng);
  const auto den =
      free_weight_accumulator(spec, sched, lower_curve, H, n_denominator, denominator_rng);
  return combine_ratio(num, den);
}

// Limiting value exp(-z exp(lambda * L2)) of the conditioned ratio.
inline double predicted_limit(double z, double lambda, ExtendedReal L2) {
  if (z == 0.0) return 1.0;
  const double inner = L2.is_neg_inf()
                           ? 0.0
                           : (L2.is_pos_inf()
                                  ? std::numeric_limits<double>::infinity()
                                  : std::exp(lambda * L2.value()));
  return std::exp(-z * inner);
}

// One shrinking window for the normalization limit: k curves from x to y
// on [a, b].
struct NormalizationWindow {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> x;
  std::vector<double> y;
};

struct NormalizationPoint {
  double length = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;
  bool degenerate = false;
};

// Mean of exp(-int H(g - Q_k)) under the k-curve ensemble with a free bottom
// boundary, estimated as a ratio of free-bridge expectations sharing one
// sample stream: numerator carries the bottom term, denominator only the
// inter-curve and top-boundary terms.
template <class Rng>
std::vector<NormalizationPoint> normalization_limit_estimate(
    const std::vector<NormalizationWindow>& windows, int k,
    const std::function<ExtendedReal(double)>& f_curve,
    const std::function<ExtendedReal(double)>& g_curve, const Hamiltonian& H,
    std::uint64_t samples, Rng& rng, int grid_points = 257) {
  if (k < 1) throw std::invalid_argument("normalization limit: need k >= 1");
  if (grid_points < 2)
    throw std::invalid_argument("normalization limit: need at least two grid points");
  for (std::size_t j = 0; j < windows.size(); ++j) {
    const auto& win = windows[j];
    if (!(win.b > win.a))
      throw std::invalid_argument("normalization limit: need b > a in every window");
    if (static_cast<int>(win.x.size()) != k || static_cast<int>(win.y.size()) != k)
      throw std::invalid_argument("normalization limit: need one endpoint pair per curve");
    if (j > 0 && !(win.b - win.a < windows[j - 1].b - windows[j - 1].a))
      throw std::invalid_argument("normalization limit: window lengths must decrease");
  }

  std::vector<NormalizationPoint> out;
  out.reserve(windows.size());
  for (const auto& win : windows) {
    std::vector<double> times(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i)
      times[static_cast<std::size_t>(i)] =
          win.a + (win.b - win.a) * static_cast<double>(i) /
                      static_cast<double>(grid_points - 1);
    times.front() = win.a;
    times.back() = win.b;
    const auto f_values = curve_on_times(f_curve, times);
    const auto g_values = curve_on_times(g_curve, times);

    RatioAccumulator acc;
    std::vector<std::vector<double>> curves(static_cast<std::size_t>(k));
    for (std::uint64_t s = 0; s < samples; ++s) {
      for (int i = 0; i < k; ++i) {
        const BridgeSpec spec{win.a, win.b, win.x[static_cast<std::size_t>(i)],
                              win.y[static_cast<std::size_t>(i)]};
        curves[static_cast<std::size_t>(i)] = detail::stitched_bridge(spec, times, rng);
      }
      const double inter =
          detail::stack_log_weight(curves, f_values, g_values, H, times, false);
      const double bottom = continuum_log_weight(curves.back(), g_values, H, times);
      acc.add(std::exp(inter + bottom), std::exp(inter));
    }

    NormalizationPoint point;
    point.length = win.b - win.a;
    point.estimate = acc.estimate();
    point.std_error = acc.standard_error();
    point.n = acc.count();
    point.degenerate = acc.degenerate();
    out.push_back(point);
  }
  return out;
}

struct FEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;
  bool degenerate = false;
};

// Importance-sampling estimate of the probability that every curve sits at
// or below r at both probe times, under the reweighted k-curve ensemble:
// E[1 * W] / E[W] over k independent free bridges.
template <class Rng>
FEstimate multi_curve_F_estimate(const std::vector<BridgeSpec>& specs,
                                 const std::vector<double>& times, double c, double d,
                                 double r, const std::function<ExtendedReal(double)>& f_curve,
                                 const std::function<ExtendedReal(double)>& g_curve,
                                 const Hamiltonian& H, std::uint64_t samples, Rng& rng) {
  if (specs.empty()) throw std::invalid_argument("multi-curve F: need k >= 1");
  for (const auto& spec : specs)
    if (spec.p != specs.front().p || spec.q != specs.front().q)
      throw std::invalid_argument("multi-curve F: curves must share the time interval");
  detail::require_times_grid(times);
  const auto c_it = std::find(times.begin(), times.end(), c);
  const auto d_it = std::find(times.begin(), times.end(), d);
  if (c_it == times.end() || d_it == times.end() || !(c < d))
    throw std::invalid_argument("multi-curve F: times must contain c < d exactly");
  const auto c_idx = static_cast<std::size_t>(c_it - times.begin());
  const auto d_idx = static_cast<std::size_t>(d_it - times.begin());
  if (std::isnan(r)) throw std::invalid_argument("multi-curve F: NaN level");

  const auto f_values = curve_on_times(f_curve, times);
  const auto g_values = curve_on_times(g_curve, times);
  RatioAccumulator acc;
  std::vector<std::vector<double>> curves(specs.size());
  for (std::uint64_t s = 0; s < samples; ++s) {
    bool below = true;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      curves[i] = detail::stitched_bridge(specs[i], times, rng);
      below = below && curves[i][c_idx] <= r && curves[i][d_idx] <= r;
    }
    const double w =
        std::exp(detail::stack_log_weight(curves, f_values, g_values, H, times, true));
    acc.add(below ? w : 0.0, w);
  }

  FEstimate out;
  out.estimate = acc.estimate();
  out.std_error = acc.standard_error();
  out.n = acc.count();
  out.degenerate = acc.degenerate();
  return out;
}

template <class Rng>
FEstimate multi_curve_F_estimate(const std::vector<BridgeSpec>& specs,
                                 const ObservableSchedule& sched,
                                 const std::function<ExtendedReal(double)>& f_curve,
                                 const std::function<ExtendedReal(double)>& g_curve,
                                 const Hamiltonian& H, std::uint64_t samples, Rng& rng) {
  for (const auto& spec : specs) detail::require_schedule_span(spec, sched);
  return multi_curve_F_estimate(specs, schedule_quadrature_times(sched), sched.c_w,
                                sched.d_w, -sched.A_w, f_curve, g_curve, H, samples, rng);
}

// Conditional tail-event check on the symmetric window [-a_n, a_n]: given
// both inner probes forced to or below -W_n, how often does the bridge leave
// the corridor prescribed on the three subwindows.
struct TailEventEstimate {
  int n = 0;
  double level = 0.0;
  double slack = 0.0;
  double a_n = 0.0;
  double b_n = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t failures = 0;
  std::uint64_t left_failures = 0;
  std::uint64_t right_failures = 0;
  std::uint64_t inner_failures = 0;
  double frequency = 0.0;
  double smoothed_frequency = 0.0;
  double std_error = 0.0;
};

template <class Rng>
TailEventEstimate tail_event_conditional(double lambda, double M, int n, double x,
                                         double y, std::uint64_t samples, Rng& rng,
                                         int points_per_segment = 256,
                                         std::optional<double> slack_override = {},
                                         std::optional<double> b_override = {}) {
  if (!(lambda > 0.0)) throw std::invalid_argument("tail event: lambda must be positive");
  if (!(M > 0.0)) throw std::invalid_argument("tail event: M must be positive");
  if (n < 2) throw std::invalid_argument("tail event: need n >= 2");
  if (std::abs(x) > M || std::abs(y) > M)
    throw std::invalid_argument("tail event: endpoints must lie in [-M, M]");
  if (points_per_segment < 2)
    throw std::invalid_argument("tail event: need at least two points per segment");
  if (samples == 0) throw std::invalid_argument("tail event: need samples >= 1");

  TailEventEstimate out;
  out.n = n;
  out.level = std::log(static_cast<double>(n)) / lambda;
  out.slack = slack_override.value_or(std::pow(static_cast<double>(n), -1.0 / 3.0));
  out.b_n = b_override.value_or(1.0 / static_cast<double>(n));
  if (out.b_n < std::pow(static_cast<double>(n), -1.25) ||
      out.b_n > std::pow(static_cast<double>(n), -0.75))
    throw std::invalid_argument(
        "tail event: inner half-width must lie in [n^(-5/4), n^(-3/4)]");
  out.a_n = out.b_n + 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  out.samples = samples;

  const BridgeSpec spec{-out.a_n, out.a_n, x, y};
  std::vector<double> times;
  times.reserve(3 * static_cast<std::size_t>(points_per_segment));
  const double knots[4] = {-out.a_n, -out.b_n, out.b_n, out.a_n};
  for (int seg = 0; seg < 3; ++seg) {
    const double lo = knots[seg], hi = knots[seg + 1];
    const int first = seg == 0 ? 0 : 1;
    for (int i = first; i < points_per_segment; ++i) {
      double t = lo + (hi - lo) * static_cast<double>(i) /
                          static_cast<double>(points_per_segment - 1);
      if (i == points_per_segment - 1) t = hi;
      times.push_back(t);
    }
  }
  // Index of the last time <= -b_n and the first time >= b_n.
  const std::size_t left_end = static_cast<std::size_t>(points_per_segment) - 1;
  const std::size_t right_begin = 2 * (static_cast<std::size_t>(points_per_segment) - 1);

  const double floor_outer = -out.level - 1.0;
  const double ceil_outer = M + 1.0;
  const double inner_lo = -out.level - 2.0 * out.slack;
  const double inner_hi = -out.level + 2.0 * out.slack;

  for (std::uint64_t s = 0; s < samples; ++s) {
    const auto endpoints =
        sample_truncated_endpoint_pair(spec, -out.b_n, out.b_n, -out.level, rng);
    const auto path = sample_conditioned_three_segments(
        spec, -out.b_n, out.b_n, endpoints.first, endpoints.second, times, rng);
    bool left_ok = true, right_ok = true, inner_ok = true;
    for (std::size_t i = 0; i <= left_end; ++i)
      left_ok = left_ok && path[i] >= floor_outer && path[i] <= ceil_outer;
    for (std::size_t i = right_begin; i < path.size(); ++i)
      right_ok = right_ok && path[i] >= floor_outer && path[i] <= ceil_outer;
    for (std::size_t i = left_end; i <= right_begin; ++i)
      inner_ok = inner_ok && path[i] >= inner_lo && path[i] <= inner_hi;
    out.left_failures += left_ok ? 0 : 1;
    out.right_failures += right_ok ? 0 : 1;
    out.inner_failures += inner_ok ? 0 : 1;
    out.failures += (left_ok && right_ok && inner_ok) ? 0 : 1;
  }

  out.frequency =
      static_cast<double>(out.failures) / static_cast<double>(out.samples);
  out.smoothed_frequency = (static_cast<double>(out.failures) + 1.0) /
                           (static_cast<double>(out.samples) + 2.0);
  out.std_error = std::sqrt(out.smoothed_frequency * (1.0 - out.smoothed_frequency) /
                            (static_cast<double>(out.samples) + 2.0));
  return out;
}

// Half the L1 gap between empirical frequencies and a reference law on the
// same finite support.
inline double total_variation_distance(const std::vector<std::uint64_t>& counts,
                                       const std::vector<double>& probs) {
  if (counts.size() != probs.size())
    throw std::invalid_argument("total variation: size mismatch");
  if (counts.empty()) throw std::invalid_argument("total variation: empty support");
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw std::invalid_argument("total variation: no samples");
  double l1 = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    l1 += std::fabs(static_cast<double>(counts[i]) / static_cast<double>(total) -
                    probs[i]);
  }
  return 0.5 * l1;
}

struct LatticeKsResult {
  double raw = 0.0;
  double corrected = 0.0;
};

// Kolmogorov-Smirnov distances of a lattice-supported empirical sample
// against a continuous CDF. The raw statistic compares the step CDF at the
// atoms and is floored at half the largest atom mass no matter how many
// samples arrive. The corrected statistic smears each atom uniformly over
// its cell of the given width and compares at the cell edges, which removes
// the discreteness floor and measures the actual weak-convergence gap.
inline LatticeKsResult lattice_ks(const std::vector<std::pair<double, std::uint64_t>>& atoms,
                                  const std::function<double(double)>& cdf,
                                  double cell_width) {
  if (atoms.empty()) throw std::invalid_argument("lattice_ks: no atoms");
  if (!(cell_width > 0.0)) throw std::invalid_argument("lattice_ks: cell width must be positive");
  std::uint64_t total = 0;
  for (const auto& [x, c] : atoms) {
    (void)x;
    total += c;
  }
  if (total == 0) throw std::invalid_argument("lattice_ks: no samples");
  for (std::size_t i = 1; i < atoms.size(); ++i) {
    if (!(atoms[i - 1].first < atoms[i].first))
      throw std::invalid_argument("lattice_ks: atoms must be strictly increasing");
  }
  LatticeKsResult out;
  const double half = 0.5 * cell_width;
  double below = 0.0;
  for (const auto& [x, c] : atoms) {
    const double above = below + static_cast<double>(c) / static_cast<double>(total);
    const double g = cdf(x);
    out.raw = std::max({out.raw, std::fabs(below - g), std::fabs(above - g)});
    out.corrected = std::max({out.corrected, std::fabs(below - cdf(x - half)),
                              std::fabs(above - cdf(x + half))});
    below = above;
  }
  return out;
}

}  // namespace gibbs_lines
