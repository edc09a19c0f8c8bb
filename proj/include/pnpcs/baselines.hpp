#ifndef PNPCS_BASELINES_HPP
#define PNPCS_BASELINES_HPP

#include "pnpcs/linalg.hpp"
#include "pnpcs/sensing.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <numeric>
#include <vector>

namespace pnpcs {

struct SparseEstimate {
  Vector x_hat;
  std::vector<Index> support;
  int iterations{0};
  /// ‖b − A x‖ after each iteration; entry 0 is ‖b‖.
  std::vector<double> residual_history;
  /// A merged-support least-squares problem needed the ridge fallback.
  bool regularized{false};
};

namespace detail {

/// Indices of the k largest |v_i|; ties go to the lower index. Result is sorted.
inline std::vector<Index> top_k(const Vector& v, Index k)
{
  std::vector<Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  k = std::min<Index>(k, v.size());
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Index a, Index b) {
    const double fa = std::abs(v[a]), fb = std::abs(v[b]);
    return fa > fb || (fa == fb && a < b);
  });
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline Vector soft_threshold(const Vector& v, double t)
{
  return v.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

} // namespace detail

/// CoSaMP on a dense sensing matrix. Returns the iterate with the smallest
/// residual seen (ties: the later one), so the final residual never exceeds ‖b‖.
inline SparseEstimate cosamp(const Matrix& a, const Vector& b, Index s, int iters)
{
  const Index n = a.cols();
  require(b.size() == a.rows(), "cosamp: measurement length mismatch");
  require(s >= 1 && 3 * s <= n, "cosamp: need 1 <= s <= n/3");
  require(iters >= 1, "cosamp: need iters >= 1");
  SparseEstimate est;
  Vector x = Vector::Zero(n);
  Vector v = b;
  const double b_norm = b.norm();
  est.residual_history.push_back(b_norm);
  est.x_hat = x;
  double best = b_norm;
  std::vector<Index> supp;

  for (int it = 0; it < iters; ++it) {
    if (v.norm() < 1e-10 * b_norm || b_norm == 0.0) break;
    const Vector proxy = a.transpose() * v;
    std::vector<Index> merged = detail::top_k(proxy, 2 * s);
    merged.insert(merged.end(), supp.begin(), supp.end());
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

    Matrix at(a.rows(), static_cast<Index>(merged.size()));
    for (Index j = 0; j < at.cols(); ++j) at.col(j) = a.col(merged[static_cast<std::size_t>(j)]);
    Eigen::ColPivHouseholderQR<Matrix> qr(at);
    qr.setThreshold(tol::rank);
    Vector coef;
    if (qr.rank() < at.cols()) {
      est.regularized = true;
      const Matrix normal = at.transpose() * at + 1e-10 * Matrix::Identity(at.cols(), at.cols());
      coef = normal.ldlt().solve(at.transpose() * b);
    } else {
      coef = qr.solve(b);
    }
    const std::vector<Index> keep = detail::top_k(coef, s);
    x.setZero();
    supp.clear();
    for (Index k : keep) {
      const Index j = merged[static_cast<std::size_t>(k)];
      x[j] = coef[k];
      if (coef[k] != 0.0) supp.push_back(j);
    }
    v = b - a * x;
    const double rn = v.norm();
    est.residual_history.push_back(rn);
    est.iterations = it + 1;
    if (rn <= best) {
      best = rn;
      est.x_hat = x;
    }
  }
  est.support.clear();
  for (Index i = 0; i < n; ++i)
    if (est.x_hat[i] != 0.0) est.support.push_back(i);
  return est;
}

inline SparseEstimate cosamp(const SensingOperator& op, const Vector& b, Index s, int iters)
{
  return cosamp(op.materialize(), b, s, iters);
}

struct LassoResult {
  Vector x;
  /// ½‖Ax − b‖² + λ‖x‖₁ per iterate, entry 0 at x = 0.
  std::vector<double> objective;
  double tau{0.0};
  int iterations{0};
  bool monotone{true};
  /// ‖x − soft(x − τAᵀ(Ax − b), τλ)‖ at the returned point.
  double fixed_point_residual{0.0};
};

/// ISTA for ½‖Ax − b‖² + λ‖x‖₁ with τ = 1/‖A‖². Stops early once the
/// fixed-point residual falls under tol·(1 + ‖x‖) when tol > 0.
inline LassoResult lasso_ista(const Matrix& a, const Vector& b, double lambda, int iters, double tol = 0.0)
{
  require(b.size() == a.rows(), "lasso_ista: measurement length mismatch");
  require(lambda >= 0.0, "lasso_ista: need lambda >= 0");
  require(iters >= 1, "lasso_ista: need iters >= 1");
  LassoResult out;
  const double lip = spectral_norm_sq(a);
  out.tau = lip > 0.0 ? 1.0 / lip : 1.0;
  auto objective = [&](const Vector& x) { return 0.5 * (a * x - b).squaredNorm() + lambda * x.lpNorm<1>(); };
  Vector x = Vector::Zero(a.cols());
  out.objective.push_back(objective(x));
  for (int k = 0; k < iters; ++k) {
    const Vector next = detail::soft_threshold(x - out.tau * (a.transpose() * (a * x - b)), out.tau * lambda);
    out.fixed_point_residual = (next - x).norm();
    x = next;
    const double obj = objective(x);
    if (obj > out.objective.back() + 1e-12 * (1.0 + std::abs(out.objective.back()))) out.monotone = false;
    out.objective.push_back(obj);
    out.iterations = k + 1;
    if (tol > 0.0 && out.fixed_point_residual <= tol * (1.0 + x.norm())) break;
  }
  out.fixed_point_residual =
      (x - detail::soft_threshold(x - out.tau * (a.transpose() * (a * x - b)), out.tau * lambda)).norm();
  out.x = std::move(x);
  return out;
}

inline LassoResult lasso_ista(const SensingOperator& op, const Vector& b, double lambda, int iters, double tol = 0.0)
{
  return lasso_ista(op.materialize(), b, lambda, iters, tol);
}

} // namespace pnpcs

#endif // PNPCS_BASELINES_HPP
