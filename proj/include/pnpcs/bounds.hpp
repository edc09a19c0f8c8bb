#ifndef PNPCS_BOUNDS_HPP
#define PNPCS_BOUNDS_HPP

#include "pnpcs/common.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace pnpcs::bounds {

enum class Ensemble { gaussian, rademacher };

inline const char* to_string(Ensemble e) { return e == Ensemble::gaussian ? "gaussian" : "rademacher"; }

inline Ensemble parse_ensemble(const std::string& s)
{
  if (s == "gaussian") return Ensemble::gaussian;
  if (s == "rademacher") return Ensemble::rademacher;
  throw ConfigError("unknown ensemble '" + s + "' (expected gaussian or rademacher)");
}

struct BoundSpec {
  Ensemble ensemble{Ensemble::rademacher};
  long r{1};
  double beta{0.1};
  double epsilon{0.5};
  /// Ambient dimension; only used by the threshold queries.
  std::optional<double> n;
};

inline void check_unit_open(double v, const char* name)
{
  require(v > 0.0 && v < 1.0, std::string(name) + " must lie in (0, 1)");
}

/// Concentration exponent: ε²/6 (Gaussian), ε²/4 − ε³/6 (Rademacher).
inline double gamma(Ensemble e, double eps)
{
  check_unit_open(eps, "epsilon");
  return e == Ensemble::gaussian ? eps * eps / 6.0 : eps * eps / 4.0 - eps * eps * eps / 6.0;
}

/// (ln(2/β) + r ln(12/0.99)) / γ(0.99/2), before rounding.
inline double m_exact_bound_value(const BoundSpec& s)
{
  check_unit_open(s.beta, "beta");
  require(s.r >= 1, "r must be >= 1");
  return (std::log(2.0 / s.beta) + static_cast<double>(s.r) * std::log(12.0 / 0.99)) / gamma(s.ensemble, 0.99 / 2.0);
}

inline long m_exact_bound(const BoundSpec& s) { return static_cast<long>(std::ceil(m_exact_bound_value(s))); }

/// L(β, ε) = (ln(4/β) + r ln(12/ε)) / γ(ε/2), defined on (0,1]².
inline double L(Ensemble e, long r, double beta, double eps)
{
  require(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
  require(eps > 0.0 && eps <= 1.0, "epsilon must lie in (0, 1]");
  require(r >= 1, "r must be >= 1");
  return (std::log(4.0 / beta) + static_cast<double>(r) * std::log(12.0 / eps)) / gamma(e, eps / 2.0);
}

inline double m_robust_bound_value(const BoundSpec& s)
{
  check_unit_open(s.beta, "beta");
  check_unit_open(s.epsilon, "epsilon");
  return L(s.ensemble, s.r, s.beta, s.epsilon);
}

inline long m_robust_bound(const BoundSpec& s) { return static_cast<long>(std::ceil(m_robust_bound_value(s))); }

/// The robust bound is affine in r: intercept + slope·r.
struct AffineBound {
  double intercept;
  double slope;
};

inline AffineBound m_robust_affine(Ensemble e, double beta, double eps)
{
  check_unit_open(beta, "beta");
  check_unit_open(eps, "epsilon");
  const double g = gamma(e, eps / 2.0);
  return {std::log(4.0 / beta) / g, std::log(12.0 / eps) / g};
}

/// Right side of the robust error bound:
/// (1 + 2/(1−ε))·dist(ξ, R(W)) + (δ + ‖η‖)/(1−ε).
inline double robust_error_rhs(double eps, double delta, double eta_norm, double dist_xi)
{
  check_unit_open(eps, "epsilon");
  require(delta >= 0.0 && eta_norm >= 0.0 && dist_xi >= 0.0, "robust_error_rhs: arguments must be >= 0");
  return (1.0 + 2.0 / (1.0 - eps)) * dist_xi + (delta + eta_norm) / (1.0 - eps);
}

struct Thresholds {
  double beta0;
  double epsilon0;
};

namespace detail {

/// Root of a strictly decreasing f on (lo, hi] with f(lo⁺) > target > f(hi).
template <typename F>
double bisect_decreasing(F&& f, double lo, double hi, double target)
{
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = f(mid);
    if (std::abs(v - target) <= 1e-6 * target) return mid;
    if (v > target) lo = mid;
    else hi = mid;
  }
  throw SolverError("bounds: bisection did not reach 1e-6 relative accuracy");
}

} // namespace detail

/// Unique β₀, ε₀ ∈ (0,1) with L(β₀,1) = L(1,ε₀) = n. Empty when n ≤ L(1,1).
inline std::optional<Thresholds> sample_thresholds(Ensemble e, long r, double n)
{
  if (!(n > L(e, r, 1.0, 1.0))) return std::nullopt;
  Thresholds t{};
  t.beta0 = detail::bisect_decreasing([&](double b) { return L(e, r, b, 1.0); }, 0.0, 1.0, n);
  t.epsilon0 = detail::bisect_decreasing([&](double x) { return L(e, r, 1.0, x); }, 0.0, 1.0, n);
  return t;
}

/// Unique ε₁ ∈ (ε₀, 1) with L(β₁, ε₁) = n for β₁ ∈ (β₀, 1). Empty when no solution exists.
inline std::optional<double> epsilon_for_beta(Ensemble e, long r, double n, double beta1)
{
  const auto t = sample_thresholds(e, r, n);
  if (!t) return std::nullopt;
  if (!(beta1 > t->beta0 && beta1 < 1.0)) return std::nullopt;
  return detail::bisect_decreasing([&](double x) { return L(e, r, beta1, x); }, t->epsilon0, 1.0, n);
}

} // namespace pnpcs::bounds

#endif // PNPCS_BOUNDS_HPP
