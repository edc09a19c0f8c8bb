#ifndef PNPCS_SENSING_HPP
#define PNPCS_SENSING_HPP

#include "pnpcs/common.hpp"
#include "pnpcs/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace pnpcs {

enum class SensingKind { gaussian, rademacher, structured };
enum class Transform { walsh_hadamard, dft };

inline const char* to_string(SensingKind k)
{
  switch (k) {
  case SensingKind::gaussian: return "gaussian";
  case SensingKind::rademacher: return "rademacher";
  case SensingKind::structured: return "structured";
  }
  return "unknown";
}

inline const char* to_string(Transform t)
{
  return t == Transform::walsh_hadamard ? "walsh_hadamard" : "dft";
}

inline SensingKind parse_sensing_kind(const std::string& s)
{
  if (s == "gaussian") return SensingKind::gaussian;
  if (s == "rademacher") return SensingKind::rademacher;
  if (s == "structured") return SensingKind::structured;
  throw ConfigError("unknown sensing kind '" + s + "'");
}

inline Transform parse_transform(const std::string& s)
{
  if (s == "walsh_hadamard" || s == "hadamard") return Transform::walsh_hadamard;
  if (s == "dft" || s == "fourier") return Transform::dft;
  throw ConfigError("unknown transform '" + s + "'");
}

constexpr bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

/// Unnormalized in-place Walsh–Hadamard transform (natural order); size must be 2^k.
inline void fwht(Eigen::Ref<Vector> v)
{
  const Index n = v.size();
  for (Index len = 1; len < n; len <<= 1)
    for (Index i = 0; i < n; i += len << 1)
      for (Index j = i; j < i + len; ++j) {
        const double a = v[j], b = v[j + len];
        v[j] = a + b;
        v[j + len] = a - b;
      }
}

/// Random sensing operator A: Rⁿ → R^rows. Reconstructible from
/// (kind, m, n, seed, transform); immutable after construction.
///
/// Structured operators are A = (1/√m) S F D with F the unnormalized
/// transform. For the DFT, the m complex samples are returned as the 2m
/// reals (Re; Im), which keeps ‖Ax‖ equal to the complex measurement norm.
class SensingOperator {
public:
  static SensingOperator make_gaussian(Index m, Index n, std::uint64_t seed)
  {
    check_dims(m, n);
    SensingOperator op(SensingKind::gaussian, m, n, seed);
    auto eng = make_engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
    op.dense_.resize(m, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i) op.dense_(i, j) = normal(eng);
    return op;
  }

  static SensingOperator make_rademacher(Index m, Index n, std::uint64_t seed)
  {
    check_dims(m, n);
    SensingOperator op(SensingKind::rademacher, m, n, seed);
    auto eng = make_engine(seed);
    std::uniform_int_distribution<int> bit(0, 1);
    const double a = 1.0 / std::sqrt(static_cast<double>(m));
    op.dense_.resize(m, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i) op.dense_(i, j) = bit(eng) ? a : -a;
    return op;
  }

  static SensingOperator make_structured(Index m, Index n, Transform t, std::uint64_t seed)
  {
    check_dims(m, n);
    require(m <= n, "structured sensing: need m <= n");
    if (t == Transform::walsh_hadamard)
      require(is_power_of_two(n), "walsh_hadamard sensing requires n to be a power of 2");
    auto eng = make_engine(seed);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    // Partial Fisher–Yates: the first m entries are a uniform m-subset.
    for (Index i = 0; i < m; ++i) {
      std::uniform_int_distribution<Index> pick(i, n - 1);
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(eng))]);
    }
    std::vector<Index> rows(perm.begin(), perm.begin() + m);
    std::sort(rows.begin(), rows.end());
    std::uniform_int_distribution<int> bit(0, 1);
    Vector signs(n);
    for (Index i = 0; i < n; ++i) signs[i] = bit(eng) ? 1.0 : -1.0;
    SensingOperator op = make_structured_explicit(n, t, std::move(rows), std::move(signs));
    op.seed_ = seed;
    return op;
  }

  /// Structured operator with caller-chosen row subset S and sign diagonal D.
  static SensingOperator make_structured_explicit(Index n, Transform t, std::vector<Index> rows, Vector signs)
  {
    const auto m = static_cast<Index>(rows.size());
    check_dims(m, n);
    if (t == Transform::walsh_hadamard)
      require(is_power_of_two(n), "walsh_hadamard sensing requires n to be a power of 2");
    require(signs.size() == n, "structured sensing: sign vector must have length n");
    for (Index i = 0; i < n; ++i) require(signs[i] == 1.0 || signs[i] == -1.0, "structured sensing: signs must be +-1");
    std::vector<Index> sorted = rows;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "structured sensing: rows must be distinct");
    require(sorted.front() >= 0 && sorted.back() < n, "structured sensing: row index out of range");
    SensingOperator op(SensingKind::structured, m, n, 0);
    op.transform_ = t;
    op.rows_ = std::move(rows);
    op.signs_ = std::move(signs);
    return op;
  }

  [[nodiscard]] SensingKind kind() const { return kind_; }
  [[nodiscard]] Index m() const { return m_; }
  [[nodiscard]] Index n() const { return n_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::optional<Transform> transform() const
  {
    if (kind_ != SensingKind::structured) return std::nullopt;
    return transform_;
  }
  /// Number of real measurements (2m for the realified DFT).
  [[nodiscard]] Index rows() const
  {
    return (kind_ == SensingKind::structured && transform_ == Transform::dft) ? 2 * m_ : m_;
  }
  [[nodiscard]] const std::vector<Index>& sample_indices() const { return rows_; }
  [[nodiscard]] const Vector& sign_flips() const { return signs_; }
  [[nodiscard]] const Matrix& dense_entries() const { return dense_; }

  [[nodiscard]] Vector apply(const Eigen::Ref<const Vector>& x) const
  {
    require(x.size() == n_, "sensing apply: length mismatch");
    if (kind_ != SensingKind::structured) return dense_ * x;
    const double scale = 1.0 / std::sqrt(static_cast<double>(m_));
    if (transform_ == Transform::walsh_hadamard) {
      Vector t = signs_.cwiseProduct(x);
      fwht(t);
      Vector y(m_);
      for (Index k = 0; k < m_; ++k) y[k] = scale * t[rows_[static_cast<std::size_t>(k)]];
      return y;
    }
    std::vector<std::complex<double>> in(static_cast<std::size_t>(n_)), out;
    for (Index i = 0; i < n_; ++i) in[static_cast<std::size_t>(i)] = signs_[i] * x[i];
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    Vector y(2 * m_);
    for (Index k = 0; k < m_; ++k) {
      const auto& c = out[static_cast<std::size_t>(rows_[static_cast<std::size_t>(k)])];
      y[k] = scale * c.real();
      y[m_ + k] = scale * c.imag();
    }
    return y;
  }

  [[nodiscard]] Vector adjoint(const Eigen::Ref<const Vector>& y) const
  {
    require(y.size() == rows(), "sensing adjoint: length mismatch");
    if (kind_ != SensingKind::structured) return dense_.transpose() * y;
    const double scale = 1.0 / std::sqrt(static_cast<double>(m_));
    if (transform_ == Transform::walsh_hadamard) {
      Vector t = Vector::Zero(n_);
      for (Index k = 0; k < m_; ++k) t[rows_[static_cast<std::size_t>(k)]] = y[k];
      fwht(t);
      return scale * signs_.cwiseProduct(t);
    }
    // Aᵀ[p; q] = Re(D Fᴴ Sᵀ (p + iq)) / √m, with Fᴴ the unscaled inverse DFT.
    std::vector<std::complex<double>> in(static_cast<std::size_t>(n_), {0.0, 0.0}), out;
    for (Index k = 0; k < m_; ++k) in[static_cast<std::size_t>(rows_[static_cast<std::size_t>(k)])] = {y[k], y[m_ + k]};
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    fft.inv(out, in);
    Vector x(n_);
    for (Index i = 0; i < n_; ++i) x[i] = scale * signs_[i] * out[static_cast<std::size_t>(i)].real();
    return x;
  }

  /// A·B column by column (B has n rows).
  [[nodiscard]] Matrix apply_columns(const Matrix& b) const
  {
    require(b.rows() == n_, "sensing apply_columns: row mismatch");
    if (kind_ != SensingKind::structured) return dense_ * b;
    Matrix out(rows(), b.cols());
    for (Index j = 0; j < b.cols(); ++j) out.col(j) = apply(b.col(j));
    return out;
  }

  [[nodiscard]] Matrix materialize() const
  {
    if (kind_ != SensingKind::structured) return dense_;
    return apply_columns(Matrix::Identity(n_, n_));
  }

private:
  SensingOperator(SensingKind k, Index m, Index n, std::uint64_t seed) : kind_{k}, m_{m}, n_{n}, seed_{seed} {}

  static void check_dims(Index m, Index n)
  {
    require(m >= 1, "sensing: need m >= 1");
    require(n >= 1, "sensing: need n >= 1");
  }

  SensingKind kind_;
  Index m_;
  Index n_;
  std::uint64_t seed_;
  Transform transform_{Transform::walsh_hadamard};
  Matrix dense_;
  std::vector<Index> rows_;
  Vector signs_;
};

/// Operator from its reconstruction tuple.
inline SensingOperator make_operator(SensingKind kind, Index m, Index n, std::uint64_t seed,
                                     Transform t = Transform::walsh_hadamard)
{
  switch (kind) {
  case SensingKind::gaussian: return SensingOperator::make_gaussian(m, n, seed);
  case SensingKind::rademacher: return SensingOperator::make_rademacher(m, n, seed);
  case SensingKind::structured: return SensingOperator::make_structured(m, n, t, seed);
  }
  throw ConfigError("unknown sensing kind");
}

} // namespace pnpcs

#endif // PNPCS_SENSING_HPP
