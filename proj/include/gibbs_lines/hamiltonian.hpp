#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gibbs_lines/extended_real.hpp"

namespace gibbs_lines {

// Interaction energy: a continuous nonnegative function on [-inf, +inf).
// The value at -inf is stored explicitly; +inf is outside the domain.
// `lambda` tags the asymptotic exponential rate when the function has one,
// i.e. H(x+y)/H(y) -> e^{lambda x} uniformly on compacts as y -> +inf.
struct Hamiltonian {
  std::string name;
  std::function<double(double)> eval_finite;
  double value_at_minus_infinity = 0.0;
  std::optional<double> lambda;
  bool declared_convex = false;
};

inline double evaluate(const Hamiltonian& h, const ExtendedReal& x) {
  if (x.is_pos_inf())
    throw std::domain_error("Hamiltonian: +inf is outside the domain");
  if (x.is_neg_inf()) return h.value_at_minus_infinity;
  return h.eval_finite(x.value());
}

inline double evaluate(const Hamiltonian& h, double x) {
  if (std::isinf(x) && x > 0)
    throw std::domain_error("Hamiltonian: +inf is outside the domain");
  if (std::isinf(x)) return h.value_at_minus_infinity;
  return h.eval_finite(x);
}

inline Hamiltonian zero_hamiltonian() {
  Hamiltonian h;
  h.name = "zero";
  h.eval_finite = [](double) { return 0.0; };
  h.value_at_minus_infinity = 0.0;
  h.lambda = std::nullopt;
  h.declared_convex = true;
  return h;
}

inline Hamiltonian exponential_hamiltonian(double lambda) {
  if (!(lambda > 0))
    throw std::invalid_argument("exponential: lambda must be positive");
  Hamiltonian h;
  h.name = "exponential:" + std::to_string(lambda);
  h.eval_finite = [lambda](double x) { return std::exp(lambda * x); };
  h.value_at_minus_infinity = 0.0;
  h.lambda = lambda;
  h.declared_convex = true;
  return h;
}

// Exponential energy with rate t^{1/3}.
inline Hamiltonian kpz_hamiltonian(double t) {
  if (!(t > 0)) throw std::invalid_argument("kpz: t must be positive");
  Hamiltonian h = exponential_hamiltonian(std::cbrt(t));
  h.name = "kpz:" + std::to_string(t);
  return h;
}

// (x^2 + 4) e^x. Second derivative (x^2 + 4x + 6) e^x > 0.
inline Hamiltonian poly_exp_hamiltonian() {
  Hamiltonian h;
  h.name = "poly_exp";
  h.eval_finite = [](double x) { return (x * x + 4.0) * std::exp(x); };
  h.value_at_minus_infinity = 0.0;
  h.lambda = 1.0;
  h.declared_convex = true;
  return h;
}

// e^{lambda x} + x^2 on x >= 0, plain e^{lambda x} on x < 0.
inline Hamiltonian exp_plus_square_hamiltonian(double lambda) {
  if (!(lambda > 0))
    throw std::invalid_argument("exp_plus_square: lambda must be positive");
  Hamiltonian h;
  h.name = "exp_plus_square:" + std::to_string(lambda);
  h.eval_finite = [lambda](double x) {
    double v = std::exp(lambda * x);
    if (x >= 0) v += x * x;
    return v;
  };
  h.value_at_minus_infinity = 0.0;
  h.lambda = lambda;
  h.declared_convex = true;
  return h;
}

// c0 e^{lambda x} + sum_i c_i e^{lambda_i x}; the lead rate must dominate
// every component rate so `lambda` is the true asymptotic rate.
inline Hamiltonian exp_mixture_hamiltonian(
    double c0, double lambda,
    std::vector<std::pair<double, double>> components) {
  if (!(c0 > 0) || !(lambda > 0))
    throw std::invalid_argument("exp_mixture: lead coefficient and rate must be positive");
  for (const auto& [c, l] : components) {
    if (!(c > 0) || !(l > 0))
      throw std::invalid_argument("exp_mixture: component coefficients and rates must be positive");
    if (!(l < lambda))
      throw std::invalid_argument("exp_mixture: lead rate must exceed every component rate");
  }
  Hamiltonian h;
  std::ostringstream name;
  name << "exp_mixture:" << c0 << "," << lambda;
  for (const auto& [c, l] : components) name << ";" << c << "," << l;
  h.name = name.str();
  h.eval_finite = [c0, lambda, components](double x) {
    double v = c0 * std::exp(lambda * x);
    for (const auto& [c, l] : components) v += c * std::exp(l * x);
    return v;
  };
  h.value_at_minus_infinity = 0.0;
  h.lambda = lambda;
  h.declared_convex = true;
  return h;
}

// Sup over an equispaced grid on [-M, M] of |H(x+y)/H(y) - e^{lambda x}|.
// Probes uniform-on-compacts exponential asymptotics at offset y.
inline double lambda_exponential_deviation(const Hamiltonian& h, double lambda,
                                           double M, double y,
                                           int grid_points = 2001) {
  if (!(M > 0)) throw std::invalid_argument("deviation: M must be positive");
  if (grid_points < 2)
    throw std::invalid_argument("deviation: need at least 2 grid points");
  const double hy = evaluate(h, y);
  if (hy == 0.0)
    throw std::domain_error("deviation: H vanishes at the offset point");
  double worst = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double x = -M + 2.0 * M * i / (grid_points - 1);
    const double dev = std::fabs(evaluate(h, x + y) / hy - std::exp(lambda * x));
    worst = std::max(worst, dev);
  }
  return worst;
}

// Midpoint convexity over every pair of grid points on [lo, hi], with an
// absolute tolerance scaled to the magnitudes involved.
inline bool check_convexity(const Hamiltonian& h, double lo, double hi,
                            int grid_points) {
  if (!(hi > lo)) throw std::invalid_argument("check_convexity: hi must exceed lo");
  if (grid_points < 2)
    throw std::invalid_argument("check_convexity: need at least 2 grid points");
  std::vector<double> x(grid_points), v(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    x[i] = lo + (hi - lo) * i / (grid_points - 1);
    v[i] = evaluate(h, x[i]);
  }
  for (int i = 0; i < grid_points; ++i) {
    for (int j = i + 1; j < grid_points; ++j) {
      const double mid = evaluate(h, 0.5 * (x[i] + x[j]));
      const double tol =
          1e-12 * std::max({1.0, std::fabs(v[i]), std::fabs(v[j]), std::fabs(mid)});
      if (mid > 0.5 * (v[i] + v[j]) + tol) return false;
    }
  }
  return true;
}

namespace detail {

inline double parse_positive_double(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("hamiltonian: bad " + what + " '" + s + "'");
  }
  if (pos != s.size() || !(v > 0) || !std::isfinite(v))
    throw std::invalid_argument("hamiltonian: bad " + what + " '" + s + "'");
  return v;
}

}  // namespace detail

// Parses catalog names: "zero", "poly_exp", "exponential:L", "kpz:T",
// "exp_plus_square:L", "exp_mixture:C0,L[;Ci,Li]*".
inline Hamiltonian parse_hamiltonian(const std::string& name) {
  if (name == "zero") return zero_hamiltonian();
  if (name == "poly_exp") return poly_exp_hamiltonian();
  const auto colon = name.find(':');
  const std::string head = name.substr(0, colon);
  const std::string tail =
      colon == std::string::npos ? std::string() : name.substr(colon + 1);
  if (head == "exponential" && !tail.empty())
    return exponential_hamiltonian(detail::parse_positive_double(tail, "rate"));
  if (head == "kpz" && !tail.empty())
    return kpz_hamiltonian(detail::parse_positive_double(tail, "parameter"));
  if (head == "exp_plus_square" && !tail.empty())
    return exp_plus_square_hamiltonian(detail::parse_positive_double(tail, "rate"));
  if (head == "exp_mixture" && !tail.empty()) {
    std::vector<std::pair<double, double>> terms;
    std::istringstream in(tail);
    std::string term;
    while (std::getline(in, term, ';')) {
      const auto comma = term.find(',');
      if (comma == std::string::npos)
        throw std::invalid_argument("hamiltonian: exp_mixture term needs 'coeff,rate'");
      terms.emplace_back(
          detail::parse_positive_double(term.substr(0, comma), "coefficient"),
          detail::parse_positive_double(term.substr(comma + 1), "rate"));
    }
    if (terms.empty())
      throw std::invalid_argument("hamiltonian: exp_mixture needs a lead term");
    const auto lead = terms.front();
    terms.erase(terms.begin());
    return exp_mixture_hamiltonian(lead.first, lead.second, std::move(terms));
  }
  throw std::invalid_argument("hamiltonian: unknown name '" + name + "'");
}

}  // namespace gibbs_lines
