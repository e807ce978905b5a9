#include "gibbs_lines/mcmc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "gibbs_lines/hamiltonian.hpp"
#include "gibbs_lines/lattice.hpp"
#include "gibbs_lines/rng.hpp"

namespace gl = gibbs_lines;

namespace {

gl::ChainState make_chain(const gl::Grid& grid, std::vector<gl::DiscretePath> paths,
                          gl::BoundaryCurve f, gl::BoundaryCurve g) {
  gl::EnsembleState s(grid, std::move(paths), std::move(f), std::move(g));
  return gl::ChainState(s);
}

gl::ChainState flat_single_curve(const gl::Grid& grid, long long x, long long y,
                                 gl::BoundaryCurve f, gl::BoundaryCurve g) {
  return make_chain(grid, {gl::maximal_path(grid, x, y)}, std::move(f), std::move(g));
}

gl::Hamiltonian wiggle_hamiltonian() {
  gl::Hamiltonian h;
  h.name = "wiggle";
  h.eval_finite = [](double x) { return std::exp(1.5 * x) * (1.1 + std::sin(4.0 * x)); };
  h.value_at_minus_infinity = 0.0;
  h.declared_convex = false;
  return h;
}

}  // namespace

TEST(Mcmc, ChainStateRoundTrip) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  std::vector<gl::DiscretePath> paths{gl::maximal_path(grid, 1, -1),
                                      gl::maximal_path(grid, -2, 0)};
  gl::EnsembleState s(grid, paths, gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                      gl::BoundaryCurve::constant(gl::ExtendedReal(-5.0)));
  gl::ChainState c(s);
  EXPECT_EQ(c.k, 2);
  EXPECT_EQ(c.interior_sites(), 3);
  ASSERT_EQ(c.indices.size(), 2u);
  EXPECT_EQ(c.indices[0], paths[0].indices());
  EXPECT_EQ(c.indices[1], paths[1].indices());

  const gl::EnsembleState back = c.to_ensemble();
  ASSERT_EQ(back.paths.size(), 2u);
  EXPECT_EQ(back.paths[0].start_index, paths[0].start_index);
  EXPECT_EQ(back.paths[0].increments, paths[0].increments);
  EXPECT_EQ(back.paths[1].increments, paths[1].increments);
}

TEST(Mcmc, ProposeValidatesArguments) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  auto c = flat_single_curve(grid, 0, 0, gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                             gl::BoundaryCurve::constant(gl::ExtendedReal::neg_inf()));
  EXPECT_THROW((void)gl::propose(c, 0, 1, 1), std::domain_error);
  EXPECT_THROW((void)gl::propose(c, 2, 1, 1), std::domain_error);
  EXPECT_THROW((void)gl::propose(c, 1, 0, 1), std::domain_error);
  EXPECT_THROW((void)gl::propose(c, 1, 4, 1), std::domain_error);
  EXPECT_THROW((void)gl::propose(c, 1, -1, 1), std::domain_error);
  EXPECT_THROW((void)gl::propose(c, 1, 1, 2), std::domain_error);
  EXPECT_THROW((void)gl::propose(c, 1, 1, -2), std::domain_error);
}

TEST(Mcmc, ProposeKeepsAdjacentIncrementsAdmissible) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  // Apex walk 0,1,2,1,0: site 2 can only drop, sites 1 and 3 are pinned.
  auto c = flat_single_curve(grid, 0, 0, gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                             gl::BoundaryCurve::constant(gl::ExtendedReal::neg_inf()));
  EXPECT_EQ(c.indices[0], (std::vector<long long>{0, 1, 2, 1, 0}));
  EXPECT_FALSE(gl::propose(c, 1, 1, 1).has_value());
  EXPECT_FALSE(gl::propose(c, 1, 1, -1).has_value());
  ASSERT_TRUE(gl::propose(c, 1, 2, -1).has_value());
  EXPECT_EQ(*gl::propose(c, 1, 2, -1), 1);
  EXPECT_FALSE(gl::propose(c, 1, 2, 1).has_value());
  EXPECT_FALSE(gl::propose(c, 1, 3, 1).has_value());
  EXPECT_FALSE(gl::propose(c, 1, 3, -1).has_value());
  // A zero move is always admissible and returns the current value.
  for (int site = 1; site <= 3; ++site) {
    ASSERT_TRUE(gl::propose(c, 1, site, 0).has_value());
    EXPECT_EQ(*gl::propose(c, 1, site, 0),
              c.indices[0][static_cast<std::size_t>(site)]);
  }
}

TEST(Mcmc, AcceptanceLogRatioMatchesFullWeightDifference) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto f = gl::BoundaryCurve::from_function(
      [](double t) { return 3.0 + std::sin(t); }, grid);
  const auto g = gl::BoundaryCurve::constant(gl::ExtendedReal(-5.0));
  const auto H = gl::poly_exp_hamiltonian();

  const std::vector<long long> entrance{2, 0, -2};
  const std::vector<long long> exit{1, 0, -1};
  auto rng = gl::seed_policy(20260819, 11);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<gl::DiscretePath> paths;
    for (int i = 0; i < 3; ++i)
      paths.push_back(gl::sample_free_path(grid, entrance[static_cast<std::size_t>(i)],
                                           exit[static_cast<std::size_t>(i)], rng));
    gl::ChainState c = make_chain(grid, paths, f, g);

    const int curve = 1 + static_cast<int>(rng.uniform_below(3));
    const int site = 1 + static_cast<int>(rng.uniform_below(3));
    const int delta = rng.pick_increment();
    const auto cand = gl::propose(c, curve, site, delta);
    if (!cand) continue;
    ++checked;

    const double local = gl::acceptance_log_ratio(c, curve, site, *cand, H);
    const double before = gl::log_weight(c.to_ensemble(), H);
    gl::ChainState moved = c;
    moved.indices[static_cast<std::size_t>(curve - 1)][static_cast<std::size_t>(site)] = *cand;
    const double after = gl::log_weight(moved.to_ensemble(), H);
    EXPECT_NEAR(local, after - before, 1e-12)
        << "curve " << curve << " site " << site << " delta " << delta;
  }
  EXPECT_GE(checked, 100);
}

TEST(Mcmc, AcceptanceLogRatioFreeBoundariesIsZero) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  auto c = flat_single_curve(grid, 0, 0, gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                             gl::BoundaryCurve::constant(gl::ExtendedReal::neg_inf()));
  const auto H = gl::exponential_hamiltonian(1.0);
  const auto cand = gl::propose(c, 1, 2, -1);
  ASSERT_TRUE(cand.has_value());
  EXPECT_EQ(gl::acceptance_log_ratio(c, 1, 2, *cand, H), 0.0);
}

TEST(Mcmc, ZeroHamiltonianAcceptsEveryAdmissibleMove) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  auto c = flat_single_curve(grid, 0, 0, gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                             gl::BoundaryCurve::constant(gl::ExtendedReal(-0.75)));
  const auto H = gl::zero_hamiltonian();
  auto rng = gl::seed_policy(7, 0);
  for (int e = 0; e < 5000; ++e) {
    gl::ChainState before = c;
    const auto rec = gl::step(c, rng, H);
    const auto cand = gl::propose(before, rec.curve, rec.site, rec.delta);
    EXPECT_EQ(rec.accepted, cand.has_value());
    if (cand) {
      EXPECT_EQ(c.indices[static_cast<std::size_t>(rec.curve - 1)]
                         [static_cast<std::size_t>(rec.site)],
                *cand);
    } else {
      EXPECT_EQ(c.indices, before.indices);
    }
  }
  EXPECT_EQ(c.events, 5000u);
}

TEST(Mcmc, StepIsDeterministicInTheSeed) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto H = gl::exponential_hamiltonian(1.0);
  auto mk = [&] {
    return flat_single_curve(grid, 0, 0,
                             gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                             gl::BoundaryCurve::constant(gl::ExtendedReal(-0.75)));
  };
  auto c1 = mk();
  auto c2 = mk();
  auto r1 = gl::seed_policy(99, 3);
  auto r2 = gl::seed_policy(99, 3);
  for (int e = 0; e < 2000; ++e) {
    const auto a = gl::step(c1, r1, H);
    const auto b = gl::step(c2, r2, H);
    ASSERT_EQ(a.curve, b.curve);
    ASSERT_EQ(a.site, b.site);
    ASSERT_EQ(a.delta, b.delta);
    ASSERT_EQ(a.u, b.u);
    ASSERT_EQ(a.accepted, b.accepted);
    ASSERT_EQ(a.event_index, static_cast<std::uint64_t>(e + 1));
  }
  EXPECT_EQ(c1.indices, c2.indices);
}

TEST(Mcmc, RunChainCadenceAndAcceptCounts) {
  EXPECT_EQ(gl::default_burn_in(2, 4), 1600u);
  EXPECT_EQ(gl::default_thinning(2, 4), 32u);

  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto H = gl::exponential_hamiltonian(1.0);
  auto c = flat_single_curve(grid, 0, 0, gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                             gl::BoundaryCurve::constant(gl::ExtendedReal(-0.75)));
  gl::RunConfig cfg;
  cfg.event_budget = 100;
  cfg.burn_in = 10;
  cfg.thinning = 5;
  auto rng = gl::seed_policy(42, 0);
  std::uint64_t seen = 0;
  const auto res = gl::run_chain(c, H, cfg, rng,
                                 [&](const gl::ChainState&) { ++seen; });
  EXPECT_EQ(res.events, 100u);
  EXPECT_EQ(res.samples, 18u);
  EXPECT_EQ(seen, 18u);
  EXPECT_LE(res.accepted, res.events);

  // The accept count replays exactly under the same seed.
  auto c2 = flat_single_curve(grid, 0, 0, gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                              gl::BoundaryCurve::constant(gl::ExtendedReal(-0.75)));
  auto rng2 = gl::seed_policy(42, 0);
  std::uint64_t accepted = 0;
  for (int e = 0; e < 100; ++e) accepted += gl::step(c2, rng2, H).accepted ? 1 : 0;
  EXPECT_EQ(res.accepted, accepted);
  EXPECT_EQ(c.indices, c2.indices);

  gl::RunConfig bad = cfg;
  bad.thinning = 0;
  auto rng3 = gl::seed_policy(42, 0);
  EXPECT_THROW((void)gl::run_chain(c, H, bad, rng3), std::invalid_argument);
}

TEST(Mcmc, FrozenChainDetection) {
  const gl::Grid tiny = gl::make_grid(0.0, 1.0, 1);
  auto frozen1 = flat_single_curve(tiny, 0, 1,
                                   gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                                   gl::BoundaryCurve::constant(gl::ExtendedReal::neg_inf()));
  EXPECT_TRUE(gl::chain_is_frozen(frozen1));
  auto rng = gl::seed_policy(1, 0);
  EXPECT_THROW((void)gl::draw_event(frozen1, rng), std::domain_error);

  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  auto frozen2 = flat_single_curve(grid, 0, 4,
                                   gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                                   gl::BoundaryCurve::constant(gl::ExtendedReal::neg_inf()));
  EXPECT_TRUE(gl::chain_is_frozen(frozen2));
  for (int site = 1; site <= 3; ++site) {
    EXPECT_FALSE(gl::propose(frozen2, 1, site, 1).has_value());
    EXPECT_FALSE(gl::propose(frozen2, 1, site, -1).has_value());
  }

  auto mobile = flat_single_curve(grid, 0, 0,
                                  gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf()),
                                  gl::BoundaryCurve::constant(gl::ExtendedReal::neg_inf()));
  EXPECT_FALSE(gl::chain_is_frozen(mobile));
}

TEST(Mcmc, ChainMatchesExactDistribution) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto f = gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf());
  const auto g = gl::BoundaryCurve::constant(gl::ExtendedReal(-0.75));
  const auto H = gl::exponential_hamiltonian(1.0);
  const auto dist = gl::exact_boltzmann(grid, 1, {0}, {0}, f, g, H);
  ASSERT_EQ(dist.size(), 19u);

  auto c = flat_single_curve(grid, 0, 0, f, g);
  std::vector<std::uint64_t> counts(dist.size(), 0);
  gl::RunConfig cfg;
  cfg.event_budget = 1000000;
  cfg.burn_in = 2000;
  cfg.thinning = 4;
  auto rng = gl::seed_policy(20260819, 5);
  const auto res = gl::run_chain(
      c, H, cfg, rng, [&](const gl::ChainState& s) {
        const auto id = dist.locate(s.to_ensemble().paths);
        ASSERT_TRUE(id.has_value());
        ++counts[*id];
      });
  ASSERT_EQ(res.samples, 249500u);

  double tv = 0.0;
  for (std::size_t id = 0; id < dist.size(); ++id) {
    const double freq = static_cast<double>(counts[id]) / static_cast<double>(res.samples);
    tv += std::abs(freq - dist.probs[id]);
  }
  tv *= 0.5;
  EXPECT_LT(tv, 0.02);
}

TEST(Mcmc, GeneratorIsInBalanceWithExactDistribution) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto f = gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf());
  const auto g = gl::BoundaryCurve::constant(gl::ExtendedReal(-0.75));
  const auto H = gl::exponential_hamiltonian(1.0);
  const auto gen = gl::build_generator(grid, 1, {0}, {0}, f, g, H);
  const auto n = static_cast<Eigen::Index>(gen.dist.size());
  ASSERT_EQ(n, 19);
  ASSERT_EQ(gen.Q.rows(), n);
  ASSERT_EQ(gen.Q.cols(), n);

  for (Eigen::Index i = 0; i < n; ++i) {
    EXPECT_NEAR(gen.Q.row(i).sum(), 0.0, 1e-13);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) {
        EXPECT_GE(gen.Q(i, j), 0.0);
      }
    }
  }

  // Off-diagonal support matches the single-site proposal structure.
  for (Eigen::Index i = 0; i < n; ++i) {
    gl::ChainState c(gen.dist.state(static_cast<std::size_t>(i)));
    std::map<std::size_t, int> neighbors;
    for (int site = 1; site <= 3; ++site) {
      for (int delta = -1; delta <= 1; delta += 2) {
        const auto cand = gl::propose(c, 1, site, delta);
        if (!cand) continue;
        gl::ChainState moved = c;
        moved.indices[0][static_cast<std::size_t>(site)] = *cand;
        const auto id = gen.dist.locate(moved.to_ensemble().paths);
        ASSERT_TRUE(id.has_value());
        ++neighbors[*id];
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto it = neighbors.find(static_cast<std::size_t>(j));
      if (it == neighbors.end()) {
        EXPECT_EQ(gen.Q(i, j), 0.0);
      } else {
        EXPECT_GT(gen.Q(i, j), 0.0);
        EXPECT_LE(gen.Q(i, j), it->second * (1.0 / 3.0) + 1e-15);
      }
    }
  }

  // Detailed balance, hence stationarity of the exact distribution.
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double lhs = gen.dist.probs[static_cast<std::size_t>(i)] * gen.Q(i, j);
      const double rhs = gen.dist.probs[static_cast<std::size_t>(j)] * gen.Q(j, i);
      EXPECT_NEAR(lhs, rhs, 1e-15);
    }
  Eigen::VectorXd pi(n);
  for (Eigen::Index i = 0; i < n; ++i) pi(i) = gen.dist.probs[static_cast<std::size_t>(i)];
  EXPECT_LT((gen.Q.transpose() * pi).lpNorm<Eigen::Infinity>(), 1e-10);

  // The stationary vector is unique and equals the exact distribution.
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gen.Q.transpose());
  lu.setThreshold(1e-10);
  const Eigen::MatrixXd kernel = lu.kernel();
  ASSERT_EQ(kernel.cols(), 1);
  Eigen::VectorXd v = kernel.col(0);
  v /= v.sum();
  EXPECT_LT((v - pi).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Mcmc, CoupledIdenticalChainsStayIdentical) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto f = gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf());
  const auto g = gl::BoundaryCurve::constant(gl::ExtendedReal(-0.75));
  const auto H = gl::exponential_hamiltonian(1.0);
  gl::CoupledState c{flat_single_curve(grid, 0, 0, f, g), flat_single_curve(grid, 0, 0, f, g)};
  gl::RunConfig cfg;
  cfg.event_budget = 10000;
  auto rng = gl::seed_policy(17, 2);
  const auto res = gl::run_coupled(c, H, cfg, rng);
  EXPECT_EQ(res.violations, 0u);
  EXPECT_EQ(c.bottom.indices, c.top.indices);
}

TEST(Mcmc, CoupledOrderIsPreservedUnderConvexInteraction) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto f = gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf());
  const auto H = gl::exponential_hamiltonian(1.5);
  auto mk = [&](long long e1, long long x1, long long e2, long long x2, double gv) {
    std::vector<gl::DiscretePath> paths{gl::maximal_path(grid, e1, x1),
                                        gl::maximal_path(grid, e2, x2)};
    return make_chain(grid, std::move(paths), f,
                      gl::BoundaryCurve::constant(gl::ExtendedReal(gv)));
  };
  gl::CoupledState c{mk(0, 0, -4, -4, -3.0), mk(2, 2, -2, -2, -2.5)};
  gl::RunConfig cfg;
  cfg.event_budget = 200000;
  auto rng = gl::seed_policy(20260819, 9);
  const auto res = gl::run_coupled(c, H, cfg, rng);
  EXPECT_EQ(res.events, 200000u);
  EXPECT_EQ(res.violations, 0u);
  EXPECT_FALSE(res.first_violation.has_value());
  EXPECT_TRUE(gl::coupled_order_holds(c));
}

TEST(Mcmc, CoupledSharesDrawsAndSamplesOnCadence) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto f = gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf());
  const auto g = gl::BoundaryCurve::constant(gl::ExtendedReal(-0.75));
  const auto H = gl::exponential_hamiltonian(1.0);
  gl::CoupledState c{flat_single_curve(grid, -1, 0, f, g), flat_single_curve(grid, 1, 2, f, g)};
  gl::RunConfig cfg;
  cfg.event_budget = 1000;
  cfg.burn_in = 100;
  cfg.thinning = 50;
  auto rng = gl::seed_policy(3, 3);
  std::uint64_t seen = 0;
  const auto res = gl::run_coupled(c, H, cfg, rng,
                                   [&](const gl::CoupledState& s) {
                                     EXPECT_TRUE(gl::coupled_order_holds(s));
                                     ++seen;
                                   });
  EXPECT_EQ(res.samples, 18u);
  EXPECT_EQ(seen, 18u);

  // The bottom chain alone, driven by the same seed, lands on the same state:
  // coupling consumes one draw per event regardless of the second chain.
  auto solo = flat_single_curve(grid, -1, 0, f, g);
  auto rng2 = gl::seed_policy(3, 3);
  for (int e = 0; e < 1000; ++e) (void)gl::step(solo, rng2, H);
  EXPECT_EQ(solo.indices, c.bottom.indices);
}

TEST(Mcmc, CoupledValidatesShapesAndInitialOrder) {
  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const gl::Grid other = gl::make_grid(0.0, 2.0, 2);
  const auto f = gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf());
  const auto g = gl::BoundaryCurve::constant(gl::ExtendedReal(-0.75));
  const auto H = gl::exponential_hamiltonian(1.0);
  gl::RunConfig cfg;
  cfg.event_budget = 10;
  auto rng = gl::seed_policy(1, 1);

  {
    gl::CoupledState c{flat_single_curve(grid, 0, 0, f, g),
                       flat_single_curve(other, 0, 0, f, g)};
    EXPECT_THROW((void)gl::run_coupled(c, H, cfg, rng), std::invalid_argument);
  }
  {
    // Bottom chain starts above the top chain.
    gl::CoupledState c{flat_single_curve(grid, 2, 2, f, g),
                       flat_single_curve(grid, 0, 0, f, g)};
    EXPECT_THROW((void)gl::run_coupled(c, H, cfg, rng), std::invalid_argument);
  }
  {
    // Bottom boundary of the lower chain exceeds the upper chain's.
    gl::CoupledState c{
        flat_single_curve(grid, 0, 0, f, gl::BoundaryCurve::constant(gl::ExtendedReal(-0.5))),
        flat_single_curve(grid, 0, 0, f, g)};
    EXPECT_THROW((void)gl::run_coupled(c, H, cfg, rng), std::invalid_argument);
  }
  {
    gl::CoupledState c{flat_single_curve(grid, 0, 0, f, g),
                       flat_single_curve(grid, 0, 0, f, g)};
    EXPECT_THROW((void)gl::run_coupled(c, wiggle_hamiltonian(), cfg, rng),
                 std::invalid_argument);
  }
}

TEST(Mcmc, NonconvexInteractionBreaksOrderDiagnostically) {
  const auto H = wiggle_hamiltonian();
  EXPECT_FALSE(gl::check_convexity(H, -4.0, 4.0, 257));

  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto f = gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf());
  auto mk = [&](long long e1, long long x1, long long e2, long long x2) {
    std::vector<gl::DiscretePath> paths{gl::maximal_path(grid, e1, x1),
                                        gl::maximal_path(grid, e2, x2)};
    return make_chain(grid, std::move(paths), f,
                      gl::BoundaryCurve::constant(gl::ExtendedReal(-3.0)));
  };
  gl::CoupledState c{mk(0, 0, -4, -4), mk(2, 2, -2, -2)};
  gl::RunConfig cfg;
  cfg.event_budget = 200000;
  cfg.allow_nonconvex = true;
  auto rng = gl::seed_policy(8, 0);
  const auto res = gl::run_coupled(c, H, cfg, rng);
  EXPECT_EQ(res.violations, 2u);
  ASSERT_TRUE(res.first_violation.has_value());
  EXPECT_EQ(res.first_violation->event_index, 95589u);
  EXPECT_GE(res.first_violation->curve, 1);
  EXPECT_LE(res.first_violation->curve, 2);
  ASSERT_EQ(res.first_violation->bottom_indices.size(), 2u);
  ASSERT_EQ(res.first_violation->top_indices.size(), 2u);
  const auto& t = *res.first_violation;
  EXPECT_GT(t.bottom_indices[static_cast<std::size_t>(t.curve - 1)]
                            [static_cast<std::size_t>(t.site)],
            t.top_indices[static_cast<std::size_t>(t.curve - 1)]
                         [static_cast<std::size_t>(t.site)]);
}

TEST(Mcmc, StrictModeThrowsWithTraceWhenOrderBreaks) {
  // Same trajectory as the diagnostic run, but the interaction lies about
  // convexity, so the first violation is a hard failure.
  auto H = wiggle_hamiltonian();
  H.declared_convex = true;

  const gl::Grid grid = gl::make_grid(0.0, 1.0, 2);
  const auto f = gl::BoundaryCurve::constant(gl::ExtendedReal::pos_inf());
  auto mk = [&](long long e1, long long x1, long long e2, long long x2) {
    std::vector<gl::DiscretePath> paths{gl::maximal_path(grid, e1, x1),
                                        gl::maximal_path(grid, e2, x2)};
    return make_chain(grid, std::move(paths), f,
                      gl::BoundaryCurve::constant(gl::ExtendedReal(-3.0)));
  };
  gl::CoupledState c{mk(0, 0, -4, -4), mk(2, 2, -2, -2)};
  gl::RunConfig cfg;
  cfg.event_budget = 200000;
  auto rng = gl::seed_policy(8, 0);
  try {
    (void)gl::run_coupled(c, H, cfg, rng);
    FAIL() << "expected CouplingOrderError";
  } catch (const gl::CouplingOrderError& err) {
    EXPECT_EQ(err.trace.event_index, 95589u);
    EXPECT_NE(std::string(err.what()).find("95589"), std::string::npos);
    EXPECT_FALSE(err.trace.bottom_indices.empty());
  }
}
