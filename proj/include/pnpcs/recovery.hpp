#ifndef PNPCS_RECOVERY_HPP
#define PNPCS_RECOVERY_HPP

#include "pnpcs/denoiser.hpp"
#include "pnpcs/linalg.hpp"
#include "pnpcs/sensing.hpp"

#include <Eigen/Cholesky>

#include <deque>
#include <optional>
#include <vector>

namespace pnpcs {

enum class SolveStatus { optimal, infeasible, max_iters };

inline const char* to_string(SolveStatus s)
{
  switch (s) {
  case SolveStatus::optimal: return "optimal";
  case SolveStatus::infeasible: return "infeasible";
  case SolveStatus::max_iters: return "max_iters";
  }
  return "unknown";
}

struct RecoverySolution {
  Vector x_star;
  /// Reduced coordinates, x_star = U z.
  Vector z;
  /// Φ_W(x_star) = ½ zᵀ(Λ⁻¹ − I)z.
  double objective{0.0};
  /// ‖A x_star − b‖.
  double residual{0.0};
  /// Lagrange multiplier of ‖Ax − b‖² ≤ δ² (scaled by ½); +inf when the
  /// ball degenerates to the least-squares set.
  double multiplier{0.0};
  int iterations{0};
  SolveStatus status{SolveStatus::optimal};
  /// max(0, residual − δ).
  double feasibility_gap{0.0};
  // ADMM diagnostics.
  double primal_residual{0.0};
  double dual_residual{0.0};
  bool diverged{false};
};

namespace detail {

struct BallSolution {
  Vector z;
  double mu{0.0};
  double residual{0.0};
  bool feasible{true};
  bool converged{true};
  int iterations{0};
};

/// min zᵀ diag(q) z  s.t.  ‖G z − c‖ ≤ δ, with q > 0.
///
/// With K = G diag(q)^{-1/2} = P Σ Vᵀ and w = diag(q)^{1/2} z, the stationary
/// point for multiplier μ is w_i = μσ_i c_i / (1 + μσ_i²), c = Pᵀc, and the
/// residual r(μ)² = Σ (c_i / (1 + μσ_i²))² + ρ_min² is nonincreasing in μ.
/// μ is found by bisection after doubling an upper bracket from 1.
inline BallSolution solve_ball(const Vector& q, const Matrix& g, const Vector& c, double delta, double b_norm)
{
  BallSolution out;
  const Index r = g.cols();
  out.z = Vector::Zero(r);
  const double c_norm = c.norm();
  if (c_norm <= delta || r == 0) {
    out.residual = c_norm;
    out.feasible = c_norm <= delta * (1 + 1e-8) + tol::feas(b_norm);
    return out;
  }
  const Vector q_isqrt = q.cwiseSqrt().cwiseInverse();
  const RankedSvd svd(g * q_isqrt.asDiagonal());
  const Index k = svd.rank;
  const Vector cp = svd.u.leftCols(k).transpose() * c;
  const double rho_min = (c - svd.u.leftCols(k) * cp).norm();
  const Vector s2 = svd.sigma.head(k).cwiseAbs2();

  auto residual = [&](double mu) {
    double acc = rho_min * rho_min;
    for (Index i = 0; i < k; ++i) {
      const double t = cp[i] / (1.0 + mu * s2[i]);
      acc += t * t;
    }
    return std::sqrt(acc);
  };
  auto point = [&](double mu) {
    Vector w(k);
    for (Index i = 0; i < k; ++i) w[i] = mu * svd.sigma[i] * cp[i] / (1.0 + mu * s2[i]);
    return Vector(q_isqrt.cwiseProduct(svd.v.leftCols(k) * w));
  };

  if (rho_min > delta * (1 + 1e-8) + tol::feas(b_norm)) {
    out.feasible = false;
    out.residual = rho_min;
    return out;
  }
  const double btol = tol::bisection(b_norm);
  if (delta <= rho_min + btol) {
    // Ball touches the least-squares set only: the μ → ∞ limit.
    Vector w = cp.cwiseQuotient(svd.sigma.head(k));
    out.z = q_isqrt.cwiseProduct(svd.v.leftCols(k) * w);
    out.mu = std::numeric_limits<double>::infinity();
    out.residual = (g * out.z - c).norm();
    return out;
  }

  double hi = 1.0;
  while (residual(hi) > delta) {
    hi *= 2.0;
    if (hi > 1e18) {
      out.converged = false;
      out.mu = hi;
      out.z = point(hi);
      out.residual = (g * out.z - c).norm();
      return out;
    }
  }
  double lo = 0.0;
  constexpr int max_bisect = 200;
  int it = 0;
  for (; it < max_bisect; ++it) {
    if (residual(hi) >= delta - btol) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (residual(mid) > delta) lo = mid;
    else hi = mid;
  }
  out.converged = residual(hi) >= delta - btol;
  out.iterations = it;
  out.mu = hi;
  out.z = point(hi);
  out.residual = (g * out.z - c).norm();
  return out;
}

inline void finish(RecoverySolution& sol, const LinearDenoiser& d, const Matrix& g, const Vector& b, double delta)
{
  sol.x_star = d.basis() * sol.z;
  sol.objective = d.phi_reduced(sol.z);
  sol.residual = (g * sol.z - b).norm();
  sol.feasibility_gap = std::max(0.0, sol.residual - delta);
}

inline void check_problem(const SensingOperator& op, const Vector& b, const LinearDenoiser& d)
{
  require(op.n() == d.n(), "recovery: operator and denoiser disagree on n");
  require(b.size() == op.rows(), "recovery: measurement vector has wrong length");
  require(b.allFinite(), "recovery: non-finite measurements");
}

} // namespace detail

/// G = A·U, the sensing operator restricted to R(W).
inline Matrix reduced_operator(const SensingOperator& op, const LinearDenoiser& d)
{
  return op.apply_columns(d.basis());
}

/// Exact program: min Φ_W(x) s.t. Ax = b, x ∈ R(W).
///
/// If G = AU is injective the feasible set is the single point G⁺b.
/// Otherwise z = G⁺b + N y over the null space N of G, with y the
/// minimum-norm solution of (NᵀMN) y = −NᵀM G⁺b, M = Λ⁻¹ − I. Since G⁺b ⟂ N
/// this is the minimum-norm KKT point.
inline RecoverySolution solve_exact(const SensingOperator& op, const Vector& b, const LinearDenoiser& d)
{
  detail::check_problem(op, b, d);
  const Matrix g = reduced_operator(op, d);
  const Index r = d.rank();
  RecoverySolution sol;
  const RankedSvd svd(g, true);
  Vector z = svd.solve(b);
  if (svd.rank < r) {
    const Matrix null = svd.v.rightCols(r - svd.rank);
    const Vector mw = d.penalty_weights();
    const Matrix h = null.transpose() * mw.asDiagonal() * null;
    const Vector rhs = -(null.transpose() * mw.cwiseProduct(z));
    const RankedSvd hs(h);
    z += null * hs.solve(rhs);
  }
  sol.z = std::move(z);
  detail::finish(sol, d, g, b, 0.0);
  sol.multiplier = std::numeric_limits<double>::infinity();
  if (sol.residual > tol::feas(b.norm())) sol.status = SolveStatus::infeasible;
  return sol;
}

/// Robust program: min Φ_W(x) s.t. ‖Ax − b‖ ≤ δ, x ∈ R(W), solved in the
/// reduced space. Directions with λ = 1 carry no penalty; ties among optimal
/// points are broken by minimum norm.
inline RecoverySolution solve_robust_direct(const SensingOperator& op, const Vector& b, double delta,
                                            const LinearDenoiser& d)
{
  detail::check_problem(op, b, d);
  require(delta >= 0.0 && std::isfinite(delta), "solve_robust_direct: need delta >= 0");
  const Matrix g = reduced_operator(op, d);
  const Index r = d.rank();
  const double b_norm = b.norm();
  const double slack = delta * (1 + 1e-8) + tol::feas(b_norm);
  RecoverySolution sol;
  sol.z = Vector::Zero(r);

  // (1) Feasibility.
  const RankedSvd full(g);
  if (full.residual_norm(b) > slack) {
    sol.status = SolveStatus::infeasible;
    detail::finish(sol, d, g, b, delta);
    return sol;
  }

  const Vector mw = d.penalty_weights();
  std::vector<Index> flat, curved;
  for (Index i = 0; i < r; ++i) (mw[i] <= tol::eig_drop ? flat : curved).push_back(i);
  const auto nf = static_cast<Index>(flat.size());
  const auto nc = static_cast<Index>(curved.size());
  Matrix g_flat(g.rows(), nf), g_curved(g.rows(), nc);
  Vector m_curved(nc);
  for (Index i = 0; i < nf; ++i) g_flat.col(i) = g.col(flat[static_cast<std::size_t>(i)]);
  for (Index i = 0; i < nc; ++i) {
    g_curved.col(i) = g.col(curved[static_cast<std::size_t>(i)]);
    m_curved[i] = mw[curved[static_cast<std::size_t>(i)]];
  }

  // (2) A zero-cost feasible point exists.
  std::optional<RankedSvd> flat_svd;
  if (nf > 0) flat_svd.emplace(g_flat);
  const double flat_res = nf > 0 ? flat_svd->residual_norm(b) : b_norm;
  if (flat_res <= slack) {
    const auto y = detail::solve_ball(Vector::Ones(nf), g_flat, b, delta, b_norm);
    for (Index i = 0; i < nf; ++i) sol.z[flat[static_cast<std::size_t>(i)]] = y.z[i];
    sol.multiplier = 0.0;
    sol.iterations = y.iterations;
    detail::finish(sol, d, g, b, delta);
    return sol;
  }

  // (3) Active constraint. Penalty-free coordinates are eliminated by
  // projecting onto the orthogonal complement of range(G_flat).
  Matrix proj = Matrix::Identity(g.rows(), g.rows());
  if (nf > 0) {
    const Matrix q = flat_svd->u.leftCols(flat_svd->rank);
    proj -= q * q.transpose();
  }
  const auto ball = detail::solve_ball(m_curved, proj * g_curved, proj * b, delta, b_norm);
  if (!ball.feasible) {
    sol.status = SolveStatus::infeasible;
    detail::finish(sol, d, g, b, delta);
    return sol;
  }
  for (Index i = 0; i < nc; ++i) sol.z[curved[static_cast<std::size_t>(i)]] = ball.z[i];
  if (nf > 0) {
    const Vector zf = flat_svd->solve(b - g_curved * ball.z);
    for (Index i = 0; i < nf; ++i) sol.z[flat[static_cast<std::size_t>(i)]] = zf[i];
  }
  sol.multiplier = ball.mu;
  sol.iterations = ball.iterations;
  sol.status = ball.converged ? SolveStatus::optimal : SolveStatus::max_iters;
  detail::finish(sol, d, g, b, delta);
  return sol;
}

struct AdmmOptions {
  int iters{400};
  double rho{1.0};
  /// Stop when primal and dual residuals are both below tol·(1 + ‖x‖); 0 runs all iterations.
  double tol{0.0};
  /// Warm start: primal point in R(W) and multiplier μ (as reported by the direct solver).
  std::optional<Vector> x0;
  double mu0{0.0};
};

/// PnP-ADMM for the robust program with the splitting
///   min Φ_W(u₁) + ι_{‖·−b‖≤δ}(u₂)  s.t.  x = u₁, Ax = u₂,
/// penalty 1 on the first block and ρ on the second:
///   x  ← (I + ρAᵀA)⁻¹ [(u₁ + d₁) + ρAᵀ(u₂ + d₂)]
///   u₁ ← W(x − d₁)                (the denoiser as prox of Φ_W)
///   u₂ ← Π_ball(Ax − d₂)
///   d₁ ← d₁ − (x − u₁),  d₂ ← d₂ − (Ax − u₂)
/// The denoiser enters only through apply().
inline RecoverySolution solve_robust_admm(const SensingOperator& op, const Vector& b, double delta,
                                          const LinearDenoiser& d, const AdmmOptions& opt = {})
{
  detail::check_problem(op, b, d);
  require(delta >= 0.0 && std::isfinite(delta), "solve_robust_admm: need delta >= 0");
  require(opt.iters >= 1, "solve_robust_admm: need iters >= 1");
  require(opt.rho > 0.0, "solve_robust_admm: need rho > 0");
  const Matrix a = op.materialize();
  const Index n = a.cols(), rows = a.rows();
  const double rho = opt.rho;

  // (I + ρAᵀA)⁻¹ directly or through the m×m Woodbury form.
  const bool woodbury = rows < n;
  Eigen::LLT<Matrix> chol;
  if (woodbury) chol.compute(Matrix::Identity(rows, rows) / rho + a * a.transpose());
  else chol.compute(Matrix::Identity(n, n) + rho * a.transpose() * a);
  auto x_solve = [&](const Vector& rhs) -> Vector {
    if (!woodbury) return chol.solve(rhs);
    return rhs - a.transpose() * chol.solve(a * rhs);
  };
  auto project_ball = [&](const Vector& v) -> Vector {
    const Vector diff = v - b;
    const double dn = diff.norm();
    if (dn <= delta) return v;
    return b + diff * (delta / dn);
  };

  Vector x = Vector::Zero(n), u1 = Vector::Zero(n), u2 = Vector::Zero(rows);
  Vector d1 = Vector::Zero(n), d2 = Vector::Zero(rows);
  if (opt.x0) {
    require(opt.x0->size() == n, "solve_robust_admm: warm start has wrong length");
    x = *opt.x0;
    u1 = x;
    const Vector ax = a * x;
    u2 = ax;
    const Vector res = ax - b;
    if (opt.mu0 > 0.0 && std::isfinite(opt.mu0)) {
      d1 = opt.mu0 * (a.transpose() * res);
      d2 = -(opt.mu0 / rho) * res;
    }
  }

  RecoverySolution sol;
  std::deque<double> history;
  int it = 0;
  bool converged = false;
  for (; it < opt.iters; ++it) {
    x = x_solve((u1 + d1) + rho * (a.transpose() * (u2 + d2)));
    const Vector ax = a * x;
    const Vector u1_prev = u1, u2_prev = u2;
    u1 = d.apply(x - d1);
    u2 = project_ball(ax - d2);
    d1 -= x - u1;
    d2 -= ax - u2;

    sol.primal_residual = std::sqrt((x - u1).squaredNorm() + rho * (ax - u2).squaredNorm());
    sol.dual_residual = ((u1 - u1_prev) + rho * (a.transpose() * (u2 - u2_prev))).norm();

    history.push_back(sol.primal_residual);
    if (history.size() > 50) {
      const double old = history.front();
      history.pop_front();
      if (sol.primal_residual > 10.0 * old && sol.primal_residual > 1e-8 * (1.0 + b.norm())) {
        sol.diverged = true;
        ++it;
        break;
      }
    }
    const double scale = 1.0 + x.norm();
    if (opt.tol > 0.0 && sol.primal_residual <= opt.tol * scale && sol.dual_residual <= opt.tol * scale) {
      converged = true;
      ++it;
      break;
    }
  }
  sol.iterations = it;
  sol.z = d.basis().transpose() * u1;
  const Matrix g = a * d.basis();
  detail::finish(sol, d, g, b, delta);
  const Vector res = g * sol.z - b;
  const double rn2 = res.squaredNorm();
  sol.multiplier = rn2 > 0.0 ? std::max(0.0, -rho * d2.dot(a * d.basis() * sol.z - b) / rn2) : 0.0;
  if (sol.diverged || (opt.tol > 0.0 && !converged)) sol.status = SolveStatus::max_iters;
  return sol;
}

struct PnpIstaOptions {
  double tau{0.0};
  int iters{500};
};

struct PnpIstaResult {
  Vector x;
  /// f(x_k) + λΦ_W(x_k) with λ = 1/τ, one entry per iterate (k = 0 is x = 0).
  std::vector<double> objective;
  double lambda{0.0};
  double lipschitz{0.0};
  bool monotone{true};
};

/// x_{k+1} = W(x_k − τ∇f(x_k)), f = ½‖Ax − b‖².
///
/// W is the prox of unit-scale Φ_W, which equals prox_{τλΦ_W} for λ = 1/τ;
/// the iteration therefore minimizes f + Φ_W/τ. τ must lie in (0, 1/L] with
/// L = ‖AU‖².
inline PnpIstaResult pnp_ista(const SensingOperator& op, const Vector& b, const LinearDenoiser& d,
                              const PnpIstaOptions& opt)
{
  detail::check_problem(op, b, d);
  require(opt.iters >= 1, "pnp_ista: need iters >= 1");
  const Matrix g = reduced_operator(op, d);
  PnpIstaResult out;
  out.lipschitz = spectral_norm_sq(g);
  require(opt.tau > 0.0 && (out.lipschitz == 0.0 || opt.tau <= (1.0 + 1e-9) / out.lipschitz),
          "pnp_ista: step tau must lie in (0, 1/L]");
  out.lambda = 1.0 / opt.tau;

  auto objective = [&](const Vector& x) {
    const double f = 0.5 * (op.apply(x) - b).squaredNorm();
    return f + out.lambda * d.phi(x).to_double();
  };
  Vector x = Vector::Zero(op.n());
  out.objective.push_back(objective(x));
  for (int k = 0; k < opt.iters; ++k) {
    const Vector grad = op.adjoint(op.apply(x) - b);
    x = d.apply(x - opt.tau * grad);
    const double obj = objective(x);
    if (obj > out.objective.back() + 1e-12 * (1.0 + std::abs(out.objective.back()))) out.monotone = false;
    out.objective.push_back(obj);
  }
  out.x = std::move(x);
  return out;
}

struct KktReport {
  double stationarity{0.0};
  double stationarity_scale{1.0};
  double primal_violation{0.0};
  double complementarity{0.0};
  double complementarity_scale{1.0};
  double range_distance{0.0};
  bool multiplier_nonnegative{true};
  bool passed{false};
};

/// First-order optimality of a robust-program solution in reduced space:
/// stationarity Mz + μGᵀ(Gz − b) = 0, feasibility, μ ≥ 0, and
/// complementary slackness μ(‖Gz − b‖ − δ) = 0. An infinite μ means the
/// ball is tight at the least-squares set; stationarity is then
/// Mz ∈ range(Gᵀ) and slackness ‖Gz − b‖ = δ.
inline KktReport kkt_check(const SensingOperator& op, const Vector& b, double delta, const LinearDenoiser& d,
                           const RecoverySolution& sol, double kkt_tol = tol::kkt)
{
  detail::check_problem(op, b, d);
  require(sol.x_star.size() == d.n(), "kkt_check: solution has wrong length");
  KktReport rep;
  const Matrix g = reduced_operator(op, d);
  const Vector z = d.basis().transpose() * sol.x_star;
  rep.range_distance = d.dist_range(sol.x_star);
  const Vector mz = d.penalty_weights().cwiseProduct(z);
  const Vector res = g * z - b;
  const double rn = res.norm();
  const double mu = sol.multiplier;
  rep.multiplier_nonnegative = mu >= 0.0;
  const double b_norm = b.norm();

  if (std::isfinite(mu)) {
    const Vector grad = g.transpose() * res;
    rep.stationarity = (mz + mu * grad).norm();
    rep.stationarity_scale = 1.0 + mz.norm() + mu * grad.norm();
    rep.complementarity = std::abs(mu * (rn - delta));
    rep.complementarity_scale = 1.0 + mu * (delta + b_norm);
  } else {
    const RankedSvd gt(g.transpose());
    rep.stationarity = gt.residual_norm(mz);
    rep.stationarity_scale = 1.0 + mz.norm();
    rep.complementarity = std::abs(rn - delta);
    rep.complementarity_scale = 1.0 + b_norm;
  }
  rep.primal_violation = std::max(0.0, rn - delta);
  rep.passed = rep.multiplier_nonnegative && rep.stationarity <= kkt_tol * rep.stationarity_scale &&
               rep.complementarity <= kkt_tol * rep.complementarity_scale &&
               rn <= delta * (1 + 1e-8) + tol::feas(b_norm) &&
               rep.range_distance <= tol::range * std::max(1.0, sol.x_star.norm());
  return rep;
}

} // namespace pnpcs

#endif // PNPCS_RECOVERY_HPP
