#ifndef PNPCS_COMMON_HPP
#define PNPCS_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace pnpcs {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed configuration, violated preconditions.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A numerical routine failed to reach its stated accuracy.
class SolverError : public Error {
public:
  using Error::Error;
};

/// Value in R ∪ {+inf}. The infinite state is a flag, never an overflowed double.
class ExtendedReal {
public:
  constexpr ExtendedReal() = default;
  constexpr explicit ExtendedReal(double v) : value_{v} {}

  static constexpr ExtendedReal infinity()
  {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  [[nodiscard]] constexpr bool is_infinite() const { return infinite_; }
  [[nodiscard]] constexpr bool is_finite() const { return !infinite_; }

  /// Finite value; throws when called on +inf.
  [[nodiscard]] double value() const
  {
    if (infinite_) throw Error("ExtendedReal: value() on +inf");
    return value_;
  }

  /// Finite value, or std::numeric_limits<double>::infinity() for the sentinel.
  [[nodiscard]] double to_double() const
  {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

private:
  double value_{0.0};
  bool infinite_{false};
};

namespace tol {
/// Eigenvalues below this are dropped from the condensed decomposition.
inline constexpr double eig_drop = 1e-12;
/// Relative distance threshold for membership in R(W).
inline constexpr double range = 1e-8;
/// Numerical rank threshold relative to the largest singular value.
inline constexpr double rank = 1e-10;
inline constexpr double kkt = 1e-7;

/// Absolute feasibility slack for ‖Gz − b‖ checks.
inline double feas(double b_norm) { return 1e-8 * (1.0 + b_norm); }
/// Secular-equation residual tolerance.
inline double bisection(double b_norm) { return 1e-10 * (1.0 + b_norm); }
} // namespace tol

inline void require(bool cond, const std::string& what)
{
  if (!cond) throw ConfigError(what);
}

inline bool all_finite(const Eigen::Ref<const Vector>& v)
{
  return v.allFinite();
}

} // namespace pnpcs

#endif // PNPCS_COMMON_HPP
