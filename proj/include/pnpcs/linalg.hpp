#ifndef PNPCS_LINALG_HPP
#define PNPCS_LINALG_HPP

#include "pnpcs/common.hpp"
#include "pnpcs/rng.hpp"

#include <Eigen/SVD>

#include <functional>

namespace pnpcs {

/// Thin SVD with a numerical rank cut at tol::rank · σ_max.
struct RankedSvd {
  Matrix u;
  Vector sigma;
  Matrix v;
  Index rank{0};

  explicit RankedSvd(const Matrix& a, bool full_v = false)
  {
    const unsigned opts = Eigen::ComputeThinU | (full_v ? Eigen::ComputeFullV : Eigen::ComputeThinV);
    Eigen::BDCSVD<Matrix> svd(a, opts);
    u = svd.matrixU();
    sigma = svd.singularValues();
    v = svd.matrixV();
    const double smax = sigma.size() ? sigma[0] : 0.0;
    for (Index i = 0; i < sigma.size(); ++i)
      if (sigma[i] > tol::rank * smax && sigma[i] > 0.0) rank = i + 1;
  }

  /// Minimum-norm least-squares solution of a·x = b.
  [[nodiscard]] Vector solve(const Eigen::Ref<const Vector>& b) const
  {
    const Vector c = u.leftCols(rank).transpose() * b;
    return v.leftCols(rank) * c.cwiseQuotient(sigma.head(rank));
  }

  /// min_x ‖a·x − b‖.
  [[nodiscard]] double residual_norm(const Eigen::Ref<const Vector>& b) const
  {
    const Vector c = u.leftCols(rank).transpose() * b;
    return (b - u.leftCols(rank) * c).norm();
  }
};

/// Largest eigenvalue of the PSD operator v ↦ normal(v), by power iteration
/// from a fixed pseudo-random start. Used for Lipschitz constants ‖A‖².
inline double power_iteration(const std::function<Vector(const Vector&)>& normal, Index n, int iters = 200)
{
  auto eng = make_engine(0x5eedULL);
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(eng);
  v.normalize();
  double lam = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vector w = normal(v);
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (k > 5 && std::abs(next - lam) <= 1e-13 * std::abs(next)) {
      lam = next;
      break;
    }
    lam = next;
  }
  return lam;
}

inline double spectral_norm_sq(const Matrix& a)
{
  if (a.size() == 0) return 0.0;
  return power_iteration([&](const Vector& v) -> Vector { return a.transpose() * (a * v); }, a.cols());
}

} // namespace pnpcs

#endif // PNPCS_LINALG_HPP
