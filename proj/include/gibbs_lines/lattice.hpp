#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gibbs_lines/extended_real.hpp"
#include "gibbs_lines/hamiltonian.hpp"
#include "gibbs_lines/rng.hpp"

namespace gibbs_lines {

// Uniform time grid on [a, b] with n^2 steps. The space step couples to the
// time step by dx^2 = (3/2) dt, which matches the per-step variance of a
// uniform {-1,0,1} increment times dx to dt: (2/3) dx^2 = dt.
struct Grid {
  double a = 0.0;
  double b = 1.0;
  int n = 1;
  double dt = 0.0;
  double dx = 0.0;

  int num_steps() const { return n * n; }
  int num_times() const { return n * n + 1; }
  double time(int m) const { return a + m * dt; }
};

inline Grid make_grid(double a, double b, int n) {
  if (!(b > a) || !std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("make_grid: need finite b > a");
  if (n < 1) throw std::invalid_argument("make_grid: need n >= 1");
  Grid g;
  g.a = a;
  g.b = b;
  g.n = n;
  g.dt = (b - a) / (static_cast<double>(n) * n);
  g.dx = std::sqrt(1.5 * g.dt);
  return g;
}

// Lattice walk: integer start plus one {-1,0,1} increment per grid step.
struct DiscretePath {
  long long start_index = 0;
  std::vector<int> increments;

  long long end_index() const {
    long long v = start_index;
    for (int d : increments) v += d;
    return v;
  }

  std::vector<long long> indices() const {
    std::vector<long long> out(increments.size() + 1);
    out[0] = start_index;
    for (std::size_t i = 0; i < increments.size(); ++i) out[i + 1] = out[i] + increments[i];
    return out;
  }
};

// Boundary data on the grid: a constant extended real or one value per grid
// time. The top boundary may be +inf but never -inf; the bottom boundary
// the reverse. Which role a curve plays is validated where it is attached.
class BoundaryCurve {
 public:
  static BoundaryCurve constant(ExtendedReal v) {
    BoundaryCurve c;
    c.constant_ = v;
    return c;
  }

  static BoundaryCurve from_values(std::vector<ExtendedReal> values) {
    if (values.empty())
      throw std::invalid_argument("BoundaryCurve: need at least one value");
    BoundaryCurve c;
    c.values_ = std::move(values);
    return c;
  }

  template <class F>
  static BoundaryCurve from_function(const F& f, const Grid& grid) {
    std::vector<ExtendedReal> values;
    values.reserve(static_cast<std::size_t>(grid.num_times()));
    for (int m = 0; m < grid.num_times(); ++m) values.emplace_back(f(grid.time(m)));
    return from_values(std::move(values));
  }

  bool is_constant() const { return values_.empty(); }

  const ExtendedReal& at(int m) const {
    if (is_constant()) return constant_;
    if (m < 0 || static_cast<std::size_t>(m) >= values_.size())
      throw std::out_of_range("BoundaryCurve: time index out of range");
    return values_[static_cast<std::size_t>(m)];
  }

  int size() const { return is_constant() ? 0 : static_cast<int>(values_.size()); }

  bool has_pos_inf() const {
    if (is_constant()) return constant_.is_pos_inf();
    return std::any_of(values_.begin(), values_.end(),
                       [](const ExtendedReal& v) { return v.is_pos_inf(); });
  }

  bool has_neg_inf() const {
    if (is_constant()) return constant_.is_neg_inf();
    return std::any_of(values_.begin(), values_.end(),
                       [](const ExtendedReal& v) { return v.is_neg_inf(); });
  }

 private:
  ExtendedReal constant_;
  std::vector<ExtendedReal> values_;
};

// k lattice curves between a top boundary f and a bottom boundary g.
// Curve 1 sits under f; curve k sits above g. Construction validates shapes
// and the boundary sign conventions, not curve ordering: disfavored
// configurations are handled by the weight, not excluded.
struct EnsembleState {
  Grid grid;
  int k = 0;
  std::vector<DiscretePath> paths;
  BoundaryCurve f;
  BoundaryCurve g;

  EnsembleState(Grid grid_in, std::vector<DiscretePath> paths_in, BoundaryCurve f_in,
                BoundaryCurve g_in)
      : grid(grid_in),
        k(static_cast<int>(paths_in.size())),
        paths(std::move(paths_in)),
        f(std::move(f_in)),
        g(std::move(g_in)) {
    if (k < 1) throw std::invalid_argument("EnsembleState: need at least one curve");
    for (const auto& p : paths) {
      if (static_cast<int>(p.increments.size()) != grid.num_steps())
        throw std::invalid_argument("EnsembleState: increment count must equal the step count");
      for (int d : p.increments)
        if (d < -1 || d > 1)
          throw std::invalid_argument("EnsembleState: increments must lie in {-1,0,1}");
    }
    if (f.has_neg_inf())
      throw std::invalid_argument("EnsembleState: top boundary cannot take -inf");
    if (g.has_pos_inf())
      throw std::invalid_argument("EnsembleState: bottom boundary cannot take +inf");
    if (!f.is_constant() && f.size() != grid.num_times())
      throw std::invalid_argument("EnsembleState: top boundary needs one value per grid time");
    if (!g.is_constant() && g.size() != grid.num_times())
      throw std::invalid_argument("EnsembleState: bottom boundary needs one value per grid time");
  }
};

namespace detail {

// Interaction sum for one grid time: H over consecutive gaps from the top
// boundary through the curves to the bottom boundary, argument lower minus
// upper.
inline double interaction_at_time(const Grid& grid, const BoundaryCurve& f,
                                  const BoundaryCurve& g,
                                  const std::vector<long long>& idx, int m,
                                  const Hamiltonian& H) {
  double total = 0.0;
  ExtendedReal upper = f.at(m);
  for (long long index : idx) {
    const ExtendedReal v(index * grid.dx);
    total += evaluate(H, v - upper);
    upper = v;
  }
  total += evaluate(H, g.at(m) - upper);
  return total;
}

}  // namespace detail

// Log Boltzmann weight: -dt times the interaction summed over every grid
// time, all n^2+1 of them. Nonpositive whenever H >= 0. Kahan-compensated.
inline double log_weight(const EnsembleState& s, const Hamiltonian& H) {
  std::vector<long long> idx(static_cast<std::size_t>(s.k));
  for (int i = 0; i < s.k; ++i) idx[static_cast<std::size_t>(i)] = s.paths[static_cast<std::size_t>(i)].start_index;
  double sum = 0.0, comp = 0.0;
  for (int m = 0; m <= s.grid.num_steps(); ++m) {
    if (m > 0)
      for (int i = 0; i < s.k; ++i)
        idx[static_cast<std::size_t>(i)] +=
            s.paths[static_cast<std::size_t>(i)].increments[static_cast<std::size_t>(m - 1)];
    const double term = detail::interaction_at_time(s.grid, s.f, s.g, idx, m, H);
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return -s.grid.dt * sum;
}

// All {-1,0,1} walks from x_index to y_index in n^2 steps, in decreasing
// lexicographic order of increments (+1 before 0 before -1). Empty exactly
// when the displacement exceeds the step count.
inline std::vector<DiscretePath> enumerate_paths(const Grid& grid, long long x_index,
                                                 long long y_index) {
  const int steps = grid.num_steps();
  std::vector<DiscretePath> out;
  if (std::llabs(y_index - x_index) > steps) return out;
  std::vector<int> inc(static_cast<std::size_t>(steps));
  long long cur = x_index;
  // Depth-first with pruning on |remaining displacement| <= remaining steps.
  int depth = 0;
  std::vector<int> choice(static_cast<std::size_t>(steps), 2);
  while (depth >= 0) {
    if (depth == steps) {
      out.push_back(DiscretePath{x_index, inc});
      --depth;
      if (depth >= 0) cur -= inc[static_cast<std::size_t>(depth)];
      continue;
    }
    bool advanced = false;
    while (choice[static_cast<std::size_t>(depth)] >= 0) {
      const int d = choice[static_cast<std::size_t>(depth)]--;
      const int delta = d - 1;
      const long long next = cur + delta;
      const int remaining = steps - depth - 1;
      if (std::llabs(y_index - next) <= remaining) {
        inc[static_cast<std::size_t>(depth)] = delta;
        cur = next;
        ++depth;
        if (depth < steps) choice[static_cast<std::size_t>(depth)] = 2;
        advanced = true;
        break;
      }
    }
    if (!advanced) {
      --depth;
      if (depth >= 0) cur -= inc[static_cast<std::size_t>(depth)];
    }
  }
  return out;
}

// Steepest admissible walk: all +1 steps first, one 0 if parity requires
// it, then all -1 steps.
inline DiscretePath maximal_path(const Grid& grid, long long x_index, long long y_index) {
  const int steps = grid.num_steps();
  const long long d = y_index - x_index;
  if (std::llabs(d) > steps)
    throw std::domain_error("maximal_path: displacement exceeds the step count");
  const long long ones = (d + steps) / 2;
  const bool has_zero = ((d + steps) % 2) != 0;
  DiscretePath p;
  p.start_index = x_index;
  p.increments.reserve(static_cast<std::size_t>(steps));
  for (long long i = 0; i < ones; ++i) p.increments.push_back(1);
  if (has_zero) p.increments.push_back(0);
  while (static_cast<int>(p.increments.size()) < steps) p.increments.push_back(-1);
  return p;
}

// Product-space Boltzmann distribution over k independent path components
// reweighted jointly; exact, for small state spaces.
struct ExactBoltzmann {
  Grid grid;
  int k = 0;
  std::vector<std::vector<DiscretePath>> curve_paths;
  BoundaryCurve f;
  BoundaryCurve g;
  std::vector<double> log_weights;
  std::vector<double> probs;
  double log_normalizer = 0.0;

  std::size_t size() const { return probs.size(); }

  std::vector<std::size_t> unflatten(std::size_t id) const {
    std::vector<std::size_t> out(static_cast<std::size_t>(k));
    for (int i = k - 1; i >= 0; --i) {
      const std::size_t m = curve_paths[static_cast<std::size_t>(i)].size();
      out[static_cast<std::size_t>(i)] = id % m;
      id /= m;
    }
    return out;
  }

  std::size_t flatten(const std::vector<std::size_t>& locals) const {
    std::size_t id = 0;
    for (int i = 0; i < k; ++i)
      id = id * curve_paths[static_cast<std::size_t>(i)].size() + locals[static_cast<std::size_t>(i)];
    return id;
  }

  EnsembleState state(std::size_t id) const {
    const auto locals = unflatten(id);
    std::vector<DiscretePath> paths;
    paths.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
      paths.push_back(curve_paths[static_cast<std::size_t>(i)][locals[static_cast<std::size_t>(i)]]);
    return EnsembleState(grid, std::move(paths), f, g);
  }

  // Flattened id of a state, matching component paths by increments.
  std::optional<std::size_t> locate(const std::vector<DiscretePath>& paths) const {
    if (static_cast<int>(paths.size()) != k) return std::nullopt;
    std::vector<std::size_t> locals(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      const auto& key = paths[static_cast<std::size_t>(i)].increments;
      const auto& lookup = path_index_[static_cast<std::size_t>(i)];
      const auto it = lookup.find(encode(key));
      if (it == lookup.end()) return std::nullopt;
      locals[static_cast<std::size_t>(i)] = it->second;
    }
    return flatten(locals);
  }

  static std::string encode(const std::vector<int>& increments) {
    std::string s;
    s.reserve(increments.size());
    for (int d : increments) s.push_back(static_cast<char>('1' + d));
    return s;
  }

  std::vector<std::unordered_map<std::string, std::size_t>> path_index_;
};

inline ExactBoltzmann exact_boltzmann(const Grid& grid, int k,
                                      const std::vector<long long>& entrance,
                                      const std::vector<long long>& exit,
                                      BoundaryCurve f, BoundaryCurve g,
                                      const Hamiltonian& H,
                                      std::size_t cap = 1000000) {
  if (k < 1) throw std::invalid_argument("exact_boltzmann: need k >= 1");
  if (static_cast<int>(entrance.size()) != k || static_cast<int>(exit.size()) != k)
    throw std::invalid_argument("exact_boltzmann: entrance/exit need one value per curve");

  ExactBoltzmann out;
  out.grid = grid;
  out.k = k;
  out.f = f;
  out.g = g;
  std::size_t total = 1;
  for (int i = 0; i < k; ++i) {
    auto paths = enumerate_paths(grid, entrance[static_cast<std::size_t>(i)],
                                 exit[static_cast<std::size_t>(i)]);
    if (paths.empty())
      throw std::runtime_error("exact_boltzmann: state space is empty (displacement exceeds steps)");
    if (total > cap / paths.size())
      throw std::runtime_error(
          "exact_boltzmann: state space exceeds the cap; use the Markov chain sampler instead");
    total *= paths.size();
    out.curve_paths.push_back(std::move(paths));
  }

  out.path_index_.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto& lookup = out.path_index_[static_cast<std::size_t>(i)];
    const auto& paths = out.curve_paths[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < paths.size(); ++j)
      lookup.emplace(ExactBoltzmann::encode(paths[j].increments), j);
  }

  // Index tables per curve so each flattened state sums interactions
  // without rebuilding paths.
  std::vector<std::vector<std::vector<long long>>> tables(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    for (const auto& p : out.curve_paths[static_cast<std::size_t>(i)])
      tables[static_cast<std::size_t>(i)].push_back(p.indices());
  }

  out.log_weights.resize(total);
  std::vector<long long> idx(static_cast<std::size_t>(k));
  for (std::size_t id = 0; id < total; ++id) {
    const auto locals = out.unflatten(id);
    double sum = 0.0, comp = 0.0;
    for (int m = 0; m <= grid.num_steps(); ++m) {
      for (int i = 0; i < k; ++i)
        idx[static_cast<std::size_t>(i)] =
            tables[static_cast<std::size_t>(i)][locals[static_cast<std::size_t>(i)]]
                  [static_cast<std::size_t>(m)];
      const double term = detail::interaction_at_time(grid, f, g, idx, m, H);
      const double y = term - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    out.log_weights[id] = -grid.dt * sum;
  }

  const double mx = *std::max_element(out.log_weights.begin(), out.log_weights.end());
  double z = 0.0;
  for (double lw : out.log_weights) z += std::exp(lw - mx);
  out.log_normalizer = mx + std::log(z);
  out.probs.resize(total);
  for (std::size_t id = 0; id < total; ++id)
    out.probs[id] = std::exp(out.log_weights[id] - mx) / z;
  return out;
}

// Uniform sampling from the free path space by backward completion counts,
// kept in log space so step counts far beyond double range still work.
class FreePathSampler {
 public:
  FreePathSampler(const Grid& grid, long long x_index, long long y_index)
      : grid_(grid), x_(x_index), y_(y_index) {
    const int steps = grid.num_steps();
    if (std::llabs(y_ - x_) > steps)
      throw std::domain_error("FreePathSampler: displacement exceeds the step count");
    const int width = 2 * steps + 1;
    logc_.assign(static_cast<std::size_t>(steps + 1) * static_cast<std::size_t>(width),
                 -std::numeric_limits<double>::infinity());
    // logc_(r, D): log #walks of r steps with net displacement D, |D| <= r.
    at(0, 0) = 0.0;
    for (int r = 1; r <= steps; ++r) {
      for (int D = -r; D <= r; ++D) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int d = -1; d <= 1; ++d) {
          if (std::abs(D - d) <= r - 1) mx = std::max(mx, at(r - 1, D - d));
        }
        if (std::isinf(mx)) continue;
        double acc = 0.0;
        for (int d = -1; d <= 1; ++d)
          if (std::abs(D - d) <= r - 1) acc += std::exp(at(r - 1, D - d) - mx);
        at(r, D) = mx + std::log(acc);
      }
    }
  }

  double log_count() const {
    return at(grid_.num_steps(), static_cast<int>(y_ - x_));
  }

  template <class Rng>
  DiscretePath sample(Rng& rng) const {
    const int steps = grid_.num_steps();
    DiscretePath p;
    p.start_index = x_;
    p.increments.reserve(static_cast<std::size_t>(steps));
    long long cur = x_;
    for (int s = 0; s < steps; ++s) {
      const int remaining = steps - s - 1;
      double w[3];
      double mx = -std::numeric_limits<double>::infinity();
      for (int d = -1; d <= 1; ++d) {
        const long long disp = y_ - (cur + d);
        w[d + 1] = (std::llabs(disp) <= remaining)
                       ? at(remaining, static_cast<int>(disp))
                       : -std::numeric_limits<double>::infinity();
        mx = std::max(mx, w[d + 1]);
      }
      double total = 0.0;
      for (double& wi : w) {
        wi = std::isinf(wi) ? 0.0 : std::exp(wi - mx);
        total += wi;
      }
      const double u = rng.uniform01() * total;
      int d = -1;
      if (u >= w[0]) d = (u < w[0] + w[1]) ? 0 : 1;
      p.increments.push_back(d);
      cur += d;
    }
    return p;
  }

 private:
  double& at(int r, int D) {
    return logc_[static_cast<std::size_t>(r) * static_cast<std::size_t>(2 * grid_.num_steps() + 1) +
                 static_cast<std::size_t>(D + grid_.num_steps())];
  }
  double at(int r, int D) const {
    return logc_[static_cast<std::size_t>(r) * static_cast<std::size_t>(2 * grid_.num_steps() + 1) +
                 static_cast<std::size_t>(D + grid_.num_steps())];
  }

  Grid grid_;
  long long x_;
  long long y_;
  std::vector<double> logc_;
};

template <class Rng>
DiscretePath sample_free_path(const Grid& grid, long long x_index, long long y_index,
                              Rng& rng) {
  return FreePathSampler(grid, x_index, y_index).sample(rng);
}

}  // namespace gibbs_lines
