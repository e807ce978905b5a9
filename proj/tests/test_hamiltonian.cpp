#include "gibbs_lines/hamiltonian.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

namespace gl = gibbs_lines;

TEST(ExtendedReal, TaggedStatesAndDifference) {
  gl::ExtendedReal a(2.5);
  EXPECT_TRUE(a.finite());
  EXPECT_DOUBLE_EQ(a.value(), 2.5);

  auto top = gl::ExtendedReal::pos_inf();
  auto bot = gl::ExtendedReal::neg_inf();
  EXPECT_TRUE(top.is_pos_inf());
  EXPECT_TRUE(bot.is_neg_inf());
  EXPECT_THROW(top.value(), std::logic_error);

  EXPECT_TRUE((a - top).is_neg_inf());
  EXPECT_TRUE((bot - a).is_neg_inf());
  EXPECT_TRUE((top - a).is_pos_inf());
  EXPECT_TRUE((a - bot).is_pos_inf());
  EXPECT_TRUE((bot - top).is_neg_inf());
  EXPECT_DOUBLE_EQ((gl::ExtendedReal(3.0) - a).value(), 0.5);
  EXPECT_THROW(top - top, std::domain_error);
  EXPECT_THROW(bot - bot, std::domain_error);
  EXPECT_THROW(gl::ExtendedReal(std::nan("")), std::invalid_argument);

  EXPECT_TRUE(bot <= a);
  EXPECT_TRUE(a <= top);
  EXPECT_EQ(top.str(), "inf");
  EXPECT_EQ(bot.str(), "-inf");
}

TEST(Hamiltonian, EvaluateDomain) {
  auto h = gl::exponential_hamiltonian(1.0);
  EXPECT_DOUBLE_EQ(gl::evaluate(h, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(gl::evaluate(h, gl::ExtendedReal::neg_inf()), 0.0);
  EXPECT_THROW(gl::evaluate(h, gl::ExtendedReal::pos_inf()), std::domain_error);
}

TEST(Hamiltonian, CatalogValues) {
  EXPECT_DOUBLE_EQ(gl::evaluate(gl::zero_hamiltonian(), 17.0), 0.0);
  EXPECT_DOUBLE_EQ(gl::evaluate(gl::exponential_hamiltonian(2.0), 1.5),
                   std::exp(3.0));
  // rate 8^{1/3} = 2
  EXPECT_NEAR(gl::evaluate(gl::kpz_hamiltonian(8.0), 1.0), 7.3890560989306502,
              1e-13);
  EXPECT_DOUBLE_EQ(gl::evaluate(gl::poly_exp_hamiltonian(), 0.0), 4.0);
  auto eps = gl::exp_plus_square_hamiltonian(1.0);
  EXPECT_DOUBLE_EQ(gl::evaluate(eps, 2.0), std::exp(2.0) + 4.0);
  EXPECT_DOUBLE_EQ(gl::evaluate(eps, -2.0), std::exp(-2.0));
  auto mix = gl::exp_mixture_hamiltonian(1.5, 2.0, {{0.5, 1.0}, {0.25, 0.5}});
  EXPECT_NEAR(gl::evaluate(mix, 1.0),
              1.5 * std::exp(2.0) + 0.5 * std::exp(1.0) + 0.25 * std::exp(0.5),
              1e-13);
}

TEST(Hamiltonian, MinusInfinityMatchesDeepNegativeEvaluation) {
  std::vector<gl::Hamiltonian> catalog = {
      gl::zero_hamiltonian(),
      gl::exponential_hamiltonian(1.0),
      gl::kpz_hamiltonian(2.0),
      gl::poly_exp_hamiltonian(),
      gl::exp_plus_square_hamiltonian(1.0),
      gl::exp_mixture_hamiltonian(1.5, 2.0, {{0.5, 1.0}})};
  for (const auto& h : catalog) {
    EXPECT_NEAR(gl::evaluate(h, gl::ExtendedReal::neg_inf()),
                gl::evaluate(h, -1e6), 1e-12)
        << h.name;
  }
}

TEST(Hamiltonian, ExponentialDeviationIsZero) {
  auto h = gl::exponential_hamiltonian(1.3);
  for (double y : {1.0, 5.0, 40.0}) {
    EXPECT_LE(gl::lambda_exponential_deviation(h, 1.3, 2.0, y), 1e-12);
  }
}

TEST(Hamiltonian, DeviationRejectsVanishingDenominator) {
  auto z = gl::zero_hamiltonian();
  try {
    gl::lambda_exponential_deviation(z, 1.0, 1.0, 10.0);
    FAIL() << "expected domain_error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("vanishes"), std::string::npos);
  }
}

// Reference deviations computed with 50-digit interval arithmetic on the
// same 2001-point grid.
TEST(Hamiltonian, ExpPlusSquareDeviationLadderM1) {
  auto h = gl::exp_plus_square_hamiltonian(1.0);
  const double d10 = gl::lambda_exponential_deviation(h, 1.0, 1.0, 10.0);
  const double d20 = gl::lambda_exponential_deviation(h, 1.0, 1.0, 20.0);
  const double d30 = gl::lambda_exponential_deviation(h, 1.0, 1.0, 30.0);
  EXPECT_NEAR(d10, 0.0068166414033146349, 1e-11);
  EXPECT_NEAR(d20, 1.3321487292142315e-6, 1e-12);
  EXPECT_NEAR(d30, 1.3900315152166233e-10, 2e-13);
  EXPECT_LT(d30, 1e-3);
  EXPECT_GT(d10, d20);
  EXPECT_GT(d20, d30);
}

TEST(Hamiltonian, CatalogDeviationValuesM2) {
  auto pe = gl::poly_exp_hamiltonian();
  EXPECT_NEAR(gl::lambda_exponential_deviation(pe, 1.0, 2.0, 10.0),
              3.1261391187783520, 1e-9);
  EXPECT_NEAR(gl::lambda_exponential_deviation(pe, 1.0, 2.0, 20.0),
              1.5363383968073629, 1e-9);
  EXPECT_NEAR(gl::lambda_exponential_deviation(pe, 1.0, 2.0, 40.0),
              0.75548952632458020, 1e-9);
  EXPECT_NEAR(gl::lambda_exponential_deviation(pe, 1.0, 2.0, 80.0),
              0.37383731668543577, 1e-9);

  auto eps = gl::exp_plus_square_hamiltonian(1.0);
  EXPECT_NEAR(gl::lambda_exponential_deviation(eps, 1.0, 2.0, 10.0),
              0.026886607893461901, 1e-10);
  EXPECT_NEAR(gl::lambda_exponential_deviation(eps, 1.0, 2.0, 20.0),
              5.0943893444971688e-6, 1e-12);
  // Below ~1e-13 the double-precision grid evaluation is rounding noise, so
  // only an upper bound is meaningful.
  EXPECT_LT(gl::lambda_exponential_deviation(eps, 1.0, 2.0, 40.0), 1e-12);

  auto mix = gl::exp_mixture_hamiltonian(1.5, 2.0, {{0.5, 1.0}, {0.25, 0.5}});
  EXPECT_NEAR(gl::lambda_exponential_deviation(mix, 2.0, 2.0, 10.0),
              0.00071706399015628669, 1e-10);
  EXPECT_NEAR(gl::lambda_exponential_deviation(mix, 2.0, 2.0, 20.0),
              3.2435874089640437e-8, 1e-12);
  EXPECT_LT(gl::lambda_exponential_deviation(mix, 2.0, 2.0, 40.0), 1e-12);
}

TEST(Hamiltonian, DeviationLadderNonincreasingAcrossCatalog) {
  const std::vector<double> offsets = {10.0, 20.0, 40.0, 80.0};
  std::vector<gl::Hamiltonian> tagged = {
      gl::exponential_hamiltonian(1.0), gl::kpz_hamiltonian(8.0),
      gl::poly_exp_hamiltonian(), gl::exp_plus_square_hamiltonian(1.0),
      gl::exp_mixture_hamiltonian(1.5, 2.0, {{0.5, 1.0}, {0.25, 0.5}})};
  for (const auto& h : tagged) {
    ASSERT_TRUE(h.lambda.has_value());
    double prev = -1.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      const double d =
          gl::lambda_exponential_deviation(h, *h.lambda, 2.0, offsets[i]);
      if (i > 0) {
        EXPECT_LE(d, prev + 1e-9) << h.name << " y=" << offsets[i];
      }
      prev = d;
    }
  }
}

TEST(Hamiltonian, ConvexityCatalogAndCounterexamples) {
  EXPECT_TRUE(gl::check_convexity(gl::zero_hamiltonian(), -5.0, 5.0, 41));
  EXPECT_TRUE(gl::check_convexity(gl::exponential_hamiltonian(1.0), -5.0, 5.0, 41));
  EXPECT_TRUE(gl::check_convexity(gl::kpz_hamiltonian(2.0), -5.0, 5.0, 41));
  EXPECT_TRUE(gl::check_convexity(gl::poly_exp_hamiltonian(), -5.0, 5.0, 41));
  EXPECT_TRUE(gl::check_convexity(gl::exp_plus_square_hamiltonian(1.0), -5.0, 5.0, 41));
  EXPECT_TRUE(gl::check_convexity(
      gl::exp_mixture_hamiltonian(1.5, 2.0, {{0.5, 1.0}, {0.25, 0.5}}), -5.0,
      5.0, 41));

  gl::Hamiltonian bump;
  bump.name = "bump";
  bump.eval_finite = [](double x) { return std::exp(-x * x); };
  EXPECT_FALSE(gl::check_convexity(bump, -2.0, 2.0, 41));

  gl::Hamiltonian root;
  root.name = "root";
  root.eval_finite = [](double x) { return std::sqrt(x + 10.0); };
  EXPECT_FALSE(gl::check_convexity(root, -5.0, 5.0, 41));

  EXPECT_THROW(gl::check_convexity(bump, 2.0, -2.0, 41), std::invalid_argument);
}

TEST(Hamiltonian, DeclaredConvexMatchesCheckedConvexity) {
  std::vector<gl::Hamiltonian> catalog = {
      gl::zero_hamiltonian(),
      gl::exponential_hamiltonian(0.5),
      gl::kpz_hamiltonian(1.0),
      gl::poly_exp_hamiltonian(),
      gl::exp_plus_square_hamiltonian(2.0),
      gl::exp_mixture_hamiltonian(1.0, 3.0, {{0.5, 1.0}})};
  for (const auto& h : catalog) {
    EXPECT_TRUE(h.declared_convex) << h.name;
    EXPECT_TRUE(gl::check_convexity(h, -4.0, 4.0, 33)) << h.name;
  }
}

TEST(Hamiltonian, ParseCatalogNames) {
  EXPECT_EQ(gl::parse_hamiltonian("zero").name, "zero");
  auto e = gl::parse_hamiltonian("exponential:1.0");
  ASSERT_TRUE(e.lambda.has_value());
  EXPECT_DOUBLE_EQ(*e.lambda, 1.0);
  auto k = gl::parse_hamiltonian("kpz:8.0");
  ASSERT_TRUE(k.lambda.has_value());
  EXPECT_NEAR(*k.lambda, 2.0, 1e-15);
  auto s = gl::parse_hamiltonian("exp_plus_square:0.5");
  EXPECT_DOUBLE_EQ(gl::evaluate(s, 2.0), std::exp(1.0) + 4.0);
  auto m = gl::parse_hamiltonian("exp_mixture:1.5,2.0;0.5,1.0");
  EXPECT_NEAR(gl::evaluate(m, 0.0), 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(gl::evaluate(gl::parse_hamiltonian("poly_exp"), 0.0), 4.0);

  EXPECT_THROW(gl::parse_hamiltonian("exponential:-1"), std::invalid_argument);
  EXPECT_THROW(gl::parse_hamiltonian("exponential:abc"), std::invalid_argument);
  EXPECT_THROW(gl::parse_hamiltonian("exponential:"), std::invalid_argument);
  EXPECT_THROW(gl::parse_hamiltonian("nope"), std::invalid_argument);
  EXPECT_THROW(gl::parse_hamiltonian("exp_mixture:1.0"), std::invalid_argument);
  EXPECT_THROW(gl::parse_hamiltonian("exp_mixture:0.5,1.0;1.0,2.0"),
               std::invalid_argument);
  EXPECT_THROW(gl::parse_hamiltonian("kpz:0"), std::invalid_argument);
}

TEST(Hamiltonian, ConstructorValidation) {
  EXPECT_THROW(gl::exponential_hamiltonian(0.0), std::invalid_argument);
  EXPECT_THROW(gl::exponential_hamiltonian(-2.0), std::invalid_argument);
  EXPECT_THROW(gl::kpz_hamiltonian(-1.0), std::invalid_argument);
  EXPECT_THROW(gl::exp_plus_square_hamiltonian(0.0), std::invalid_argument);
  EXPECT_THROW(gl::exp_mixture_hamiltonian(0.0, 1.0, {}), std::invalid_argument);
  EXPECT_THROW(gl::exp_mixture_hamiltonian(1.0, 1.0, {{1.0, 1.0}}),
               std::invalid_argument);
  EXPECT_THROW(gl::exp_mixture_hamiltonian(1.0, 1.0, {{-1.0, 0.5}}),
               std::invalid_argument);
}

TEST(Hamiltonian, DeviationGridArguments) {
  auto h = gl::exponential_hamiltonian(1.0);
  EXPECT_THROW(gl::lambda_exponential_deviation(h, 1.0, -1.0, 10.0),
               std::invalid_argument);
  EXPECT_THROW(gl::lambda_exponential_deviation(h, 1.0, 1.0, 10.0, 1),
               std::invalid_argument);
  // Default grid is 2001 points; an explicit 2001 must agree exactly.
  auto eps = gl::exp_plus_square_hamiltonian(1.0);
  EXPECT_DOUBLE_EQ(gl::lambda_exponential_deviation(eps, 1.0, 1.0, 10.0),
                   gl::lambda_exponential_deviation(eps, 1.0, 1.0, 10.0, 2001));
}
