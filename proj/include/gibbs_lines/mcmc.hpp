#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gibbs_lines/lattice.hpp"

namespace gibbs_lines {

// Mutable sampler state: per-curve value indices at every grid time.
// Endpoints are pinned; interior sites move one lattice unit at a time.
struct ChainState {
  Grid grid;
  int k = 0;
  std::vector<std::vector<long long>> indices;
  BoundaryCurve f;
  BoundaryCurve g;
  std::uint64_t events = 0;

  explicit ChainState(const EnsembleState& s)
      : grid(s.grid), k(s.k), f(s.f), g(s.g) {
    indices.reserve(static_cast<std::size_t>(k));
    for (const auto& p : s.paths) indices.push_back(p.indices());
  }

  EnsembleState to_ensemble() const {
    std::vector<DiscretePath> paths;
    paths.reserve(static_cast<std::size_t>(k));
    for (const auto& idx : indices) {
      DiscretePath p;
      p.start_index = idx.front();
      p.increments.reserve(idx.size() - 1);
      for (std::size_t m = 1; m < idx.size(); ++m)
        p.increments.push_back(static_cast<int>(idx[m] - idx[m - 1]));
      paths.push_back(std::move(p));
    }
    return EnsembleState(grid, std::move(paths), f, g);
  }

  int interior_sites() const { return grid.num_steps() - 1; }
};

// One proposal/acceptance event.
struct EventRecord {
  std::uint64_t event_index = 0;
  int curve = 0;
  int site = 0;
  int delta = 0;
  double u = 0.0;
  bool accepted = false;
};

namespace detail {

inline void require_move_site(const ChainState& s, int curve, int site) {
  if (curve < 1 || curve > s.k)
    throw std::domain_error("mcmc: curve index out of range");
  if (site < 1 || site >= s.grid.num_steps())
    throw std::domain_error("mcmc: site must be an interior grid time");
}

}  // namespace detail

// Candidate value index after moving (curve, site) by delta, if both
// adjacent increments stay in {-1,0,1}; delta = 0 is always admissible.
inline std::optional<long long> propose(const ChainState& s, int curve, int site,
                                        int delta) {
  detail::require_move_site(s, curve, site);
  if (delta < -1 || delta > 1)
    throw std::domain_error("mcmc: delta must lie in {-1,0,1}");
  const auto& idx = s.indices[static_cast<std::size_t>(curve - 1)];
  const long long cand = idx[static_cast<std::size_t>(site)] + delta;
  if (std::llabs(cand - idx[static_cast<std::size_t>(site - 1)]) > 1) return std::nullopt;
  if (std::llabs(idx[static_cast<std::size_t>(site + 1)] - cand) > 1) return std::nullopt;
  return cand;
}

// Log weight change from setting (curve, site) to candidate: only the two
// interactions straddling that curve at that time slice move.
inline double acceptance_log_ratio(const ChainState& s, int curve, int site,
                                   long long candidate, const Hamiltonian& H) {
  detail::require_move_site(s, curve, site);
  const auto ci = static_cast<std::size_t>(curve - 1);
  const ExtendedReal upper =
      curve == 1 ? s.f.at(site)
                 : ExtendedReal(s.indices[ci - 1][static_cast<std::size_t>(site)] * s.grid.dx);
  const ExtendedReal lower =
      curve == s.k
          ? s.g.at(site)
          : ExtendedReal(s.indices[ci + 1][static_cast<std::size_t>(site)] * s.grid.dx);
  const ExtendedReal v_old(s.indices[ci][static_cast<std::size_t>(site)] * s.grid.dx);
  const ExtendedReal v_new(candidate * s.grid.dx);
  const double fresh = evaluate(H, v_new - upper) + evaluate(H, lower - v_new);
  const double stale = evaluate(H, v_old - upper) + evaluate(H, lower - v_old);
  return -s.grid.dt * (fresh - stale);
}

// Shared randomness for one event: site scan order is curve-major, then the
// increment, then the acceptance uniform. Coupled chains replay one draw.
struct EventDraw {
  int curve = 0;
  int site = 0;
  int delta = 0;
  double u = 0.0;
};

template <class Rng>
EventDraw draw_event(const ChainState& shape, Rng& rng) {
  const int per_curve = shape.interior_sites();
  if (per_curve < 1)
    throw std::domain_error("mcmc: no interior sites to move (n = 1 grid)");
  const auto pick =
      rng.uniform_below(static_cast<std::uint64_t>(shape.k) *
                        static_cast<std::uint64_t>(per_curve));
  EventDraw d;
  d.curve = 1 + static_cast<int>(pick / static_cast<std::uint64_t>(per_curve));
  d.site = 1 + static_cast<int>(pick % static_cast<std::uint64_t>(per_curve));
  d.delta = rng.pick_increment();
  d.u = rng.uniform01();
  return d;
}

inline bool apply_event(ChainState& s, const EventDraw& d, const Hamiltonian& H) {
  ++s.events;
  const auto cand = propose(s, d.curve, d.site, d.delta);
  if (!cand) return false;
  const double delta_lw = acceptance_log_ratio(s, d.curve, d.site, *cand, H);
  if (d.u <= std::exp(delta_lw)) {
    s.indices[static_cast<std::size_t>(d.curve - 1)][static_cast<std::size_t>(d.site)] = *cand;
    return true;
  }
  return false;
}

template <class Rng>
EventRecord step(ChainState& s, Rng& rng, const Hamiltonian& H) {
  const EventDraw d = draw_event(s, rng);
  EventRecord rec;
  rec.curve = d.curve;
  rec.site = d.site;
  rec.delta = d.delta;
  rec.u = d.u;
  rec.accepted = apply_event(s, d, H);
  rec.event_index = s.events;
  return rec;
}

// Event budget plus sampling cadence. Burn-in and thinning fall back to
// 50 k n^2 and k n^2 when unset.
struct RunConfig {
  std::uint64_t event_budget = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> burn_in;
  std::optional<std::uint64_t> thinning;
  bool allow_nonconvex = false;
};

inline std::uint64_t default_burn_in(int k, int n) {
  return 50ull * static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(n) *
         static_cast<std::uint64_t>(n);
}

inline std::uint64_t default_thinning(int k, int n) {
  return static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(n) *
         static_cast<std::uint64_t>(n);
}

// True when no event can ever change the state: either there are no
// interior sites or every curve is pinned to its single admissible path.
inline bool chain_is_frozen(const ChainState& s) {
  if (s.interior_sites() < 1) return true;
  for (const auto& idx : s.indices) {
    if (std::llabs(idx.back() - idx.front()) != s.grid.num_steps()) return false;
  }
  return true;
}

struct ChainRunResult {
  std::uint64_t events = 0;
  std::uint64_t accepted = 0;
  std::uint64_t samples = 0;
};

// Runs one chain for the event budget, invoking the sink at the thinning
// cadence after burn-in.
template <class Rng>
ChainRunResult run_chain(ChainState& s, const Hamiltonian& H, const RunConfig& cfg,
                         Rng& rng,
                         const std::function<void(const ChainState&)>& sink = {}) {
  const std::uint64_t burn = cfg.burn_in.value_or(default_burn_in(s.k, s.grid.n));
  const std::uint64_t thin = cfg.thinning.value_or(default_thinning(s.k, s.grid.n));
  if (thin == 0) throw std::invalid_argument("run_chain: thinning must be positive");
  ChainRunResult out;
  for (std::uint64_t e = 1; e <= cfg.event_budget; ++e) {
    const EventDraw d = draw_event(s, rng);
    out.accepted += apply_event(s, d, H) ? 1 : 0;
    ++out.events;
    if (sink && e > burn && (e - burn) % thin == 0) {
      sink(s);
      ++out.samples;
    }
  }
  return out;
}

// Two chains driven by identical event draws, bottom expected to stay at or
// below top pointwise.
struct CoupledState {
  ChainState bottom;
  ChainState top;
};

struct ViolationTrace {
  std::uint64_t event_index = 0;
  int curve = 0;
  int site = 0;
  int delta = 0;
  double u = 0.0;
  std::vector<std::vector<long long>> bottom_indices;
  std::vector<std::vector<long long>> top_indices;
};

class CouplingOrderError : public std::runtime_error {
 public:
  explicit CouplingOrderError(ViolationTrace t)
      : std::runtime_error("coupled chains lost pointwise order at event " +
                           std::to_string(t.event_index)),
        trace(std::move(t)) {}
  ViolationTrace trace;
};

inline bool coupled_order_holds(const CoupledState& c) {
  for (int i = 0; i < c.bottom.k; ++i) {
    const auto& lo = c.bottom.indices[static_cast<std::size_t>(i)];
    const auto& hi = c.top.indices[static_cast<std::size_t>(i)];
    for (std::size_t m = 0; m < lo.size(); ++m)
      if (lo[m] > hi[m]) return false;
  }
  return true;
}

namespace detail {

inline void require_coupled_shapes(const CoupledState& c) {
  if (c.bottom.k != c.top.k || c.bottom.grid.n != c.top.grid.n ||
      c.bottom.grid.a != c.top.grid.a || c.bottom.grid.b != c.top.grid.b)
    throw std::invalid_argument("run_coupled: chains must share grid and curve count");
  for (int m = 0; m <= c.bottom.grid.num_steps(); ++m) {
    if (!(c.bottom.f.at(m) <= c.top.f.at(m)))
      throw std::invalid_argument("run_coupled: top boundaries out of order");
    if (!(c.bottom.g.at(m) <= c.top.g.at(m)))
      throw std::invalid_argument("run_coupled: bottom boundaries out of order");
  }
  if (!coupled_order_holds(c))
    throw std::invalid_argument("run_coupled: initial states out of order");
}

}  // namespace detail

struct CoupledRunResult {
  std::uint64_t events = 0;
  std::uint64_t violations = 0;
  std::optional<ViolationTrace> first_violation;
  std::uint64_t samples = 0;
};

// Runs the shared-randomness coupling. With a convex interaction the
// pointwise order is invariant; losing it is a hard failure carrying a full
// trace. The non-convex override downgrades the invariant to a counter.
template <class Rng>
CoupledRunResult run_coupled(CoupledState& c, const Hamiltonian& H,
                             const RunConfig& cfg, Rng& rng,
                             const std::function<void(const CoupledState&)>& sink = {}) {
  detail::require_coupled_shapes(c);
  if (!H.declared_convex && !cfg.allow_nonconvex)
    throw std::invalid_argument(
        "run_coupled: interaction not declared convex; order preservation is not "
        "guaranteed (pass the non-convex override to run diagnostically)");
  const std::uint64_t burn =
      cfg.burn_in.value_or(default_burn_in(c.bottom.k, c.bottom.grid.n));
  const std::uint64_t thin =
      cfg.thinning.value_or(default_thinning(c.bottom.k, c.bottom.grid.n));
  if (thin == 0) throw std::invalid_argument("run_coupled: thinning must be positive");

  CoupledRunResult out;
  for (std::uint64_t e = 1; e <= cfg.event_budget; ++e) {
    const EventDraw d = draw_event(c.bottom, rng);
    apply_event(c.bottom, d, H);
    apply_event(c.top, d, H);
    ++out.events;
    const auto ci = static_cast<std::size_t>(d.curve - 1);
    const auto si = static_cast<std::size_t>(d.site);
    const bool local_ok = c.bottom.indices[ci][si] <= c.top.indices[ci][si];
    // The event touches one site, so the local check is complete; a full
    // scan every 2^16 events guards the bookkeeping itself.
    const bool full_ok =
        (e % 65536 != 0 && e != cfg.event_budget) || coupled_order_holds(c);
    if (!local_ok || !full_ok) {
      ++out.violations;
      ViolationTrace t;
      t.event_index = e;
      t.curve = d.curve;
      t.site = d.site;
      t.delta = d.delta;
      t.u = d.u;
      t.bottom_indices = c.bottom.indices;
      t.top_indices = c.top.indices;
      if (!out.first_violation) out.first_violation = t;
      if (!cfg.allow_nonconvex) throw CouplingOrderError(std::move(t));
    }
    if (sink && e > burn && (e - burn) % thin == 0) {
      sink(c);
      ++out.samples;
    }
  }
  return out;
}

// Jump-rate matrix of the continuous-time single-site dynamics on the exact
// state space: rate (1/3) min(1, W(s')/W(s)) toward each admissible
// single-site neighbor, diagonal balancing the row to zero.
struct GeneratorResult {
  ExactBoltzmann dist;
  Eigen::MatrixXd Q;
};

inline GeneratorResult build_generator(const Grid& grid, int k,
                                       const std::vector<long long>& entrance,
                                       const std::vector<long long>& exit,
                                       const BoundaryCurve& f, const BoundaryCurve& g,
                                       const Hamiltonian& H, std::size_t cap = 1000000) {
  GeneratorResult out{exact_boltzmann(grid, k, entrance, exit, f, g, H, cap),
                      Eigen::MatrixXd()};
  const auto& dist = out.dist;
  const auto n_states = static_cast<Eigen::Index>(dist.size());
  out.Q = Eigen::MatrixXd::Zero(n_states, n_states);
  const int steps = grid.num_steps();
  for (std::size_t id = 0; id < dist.size(); ++id) {
    const auto locals = dist.unflatten(id);
    for (int i = 0; i < k; ++i) {
      const auto& path =
          dist.curve_paths[static_cast<std::size_t>(i)][locals[static_cast<std::size_t>(i)]];
      const auto idx = path.indices();
      for (int site = 1; site < steps; ++site) {
        for (int delta = -1; delta <= 1; delta += 2) {
          const long long cand = idx[static_cast<std::size_t>(site)] + delta;
          if (std::llabs(cand - idx[static_cast<std::size_t>(site - 1)]) > 1) continue;
          if (std::llabs(idx[static_cast<std::size_t>(site + 1)] - cand) > 1) continue;
          std::vector<int> inc = path.increments;
          inc[static_cast<std::size_t>(site - 1)] += delta;
          inc[static_cast<std::size_t>(site)] -= delta;
          const auto& lookup = dist.path_index_[static_cast<std::size_t>(i)];
          const auto it = lookup.find(ExactBoltzmann::encode(inc));
          if (it == lookup.end()) continue;
          auto neighbor_locals = locals;
          neighbor_locals[static_cast<std::size_t>(i)] = it->second;
          const std::size_t nid = dist.flatten(neighbor_locals);
          const double ratio = std::exp(dist.log_weights[nid] - dist.log_weights[id]);
          out.Q(static_cast<Eigen::Index>(id), static_cast<Eigen::Index>(nid)) +=
              (1.0 / 3.0) * std::min(1.0, ratio);
        }
      }
    }
    out.Q(static_cast<Eigen::Index>(id), static_cast<Eigen::Index>(id)) =
        -out.Q.row(static_cast<Eigen::Index>(id)).sum();
  }
  return out;
}

}  // namespace gibbs_lines
