#ifndef PNPCS_DENOISER_HPP
#define PNPCS_DENOISER_HPP

#include "pnpcs/common.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

namespace pnpcs {

/// Parameters of the doubly-stochastic NLM kernel.
struct GuideKernelConfig {
  Index patch_radius{2};
  Index search_radius{7};
  double h{0.5};
  int sinkhorn_iters{20000};
  double sinkhorn_tol{1e-10};

  void validate() const
  {
    require(patch_radius >= 0, "patch_radius must be >= 0");
    require(search_radius >= 0, "search_radius must be >= 0");
    require(h > 0.0 && std::isfinite(h), "bandwidth h must be > 0");
    require(sinkhorn_iters >= 1, "sinkhorn_iters must be >= 1");
    require(sinkhorn_tol > 0.0, "sinkhorn_tol must be > 0");
  }
};

enum class DenoiserKind : std::uint8_t { dsg_nlm = 0, rank_truncated = 1, explicit_basis = 2 };

inline const char* to_string(DenoiserKind k)
{
  switch (k) {
  case DenoiserKind::dsg_nlm: return "dsg_nlm";
  case DenoiserKind::rank_truncated: return "rank_truncated";
  case DenoiserKind::explicit_basis: return "explicit";
  }
  return "unknown";
}

/// Where a denoiser came from. Kernel fields are zero for explicit bases.
struct DenoiserProvenance {
  DenoiserKind kind{DenoiserKind::explicit_basis};
  Index patch_radius{0};
  Index search_radius{0};
  double h{0.0};
  std::uint64_t guide_hash{0};
  Index guide_rows{0};
  Index guide_cols{0};
  /// Frobenius norm of the part of the source matrix not represented by (U, Λ).
  double truncation_residual{0.0};
  /// Max-entry norm of the same difference (dense construction only).
  double max_abs_residual{0.0};
  /// Smallest eigenvalue of the source matrix before clamping.
  double min_raw_eigenvalue{0.0};
  double sinkhorn_deviation{0.0};
  Index requested_rank{0};
  /// Set when fewer positive eigenvalues existed than the requested rank.
  bool rank_deficient{false};
};

/// FNV-1a over the raw bytes of the samples.
inline std::uint64_t hash_samples(const Eigen::Ref<const Vector>& v)
{
  std::uint64_t h = 1469598103934665603ULL;
  for (Index i = 0; i < v.size(); ++i) {
    unsigned char bytes[sizeof(double)];
    const double x = v[i];
    std::memcpy(bytes, &x, sizeof(double));
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

/// Symmetric linear denoiser W = U Λ Uᵀ held in condensed form:
/// U is n×r with orthonormal columns and 0 < Λ_i ≤ 1, sorted descending.
/// Immutable after construction.
class LinearDenoiser {
public:
  LinearDenoiser(Matrix basis, Vector eigenvalues, DenoiserProvenance prov = {})
    : basis_{std::move(basis)}, eigenvalues_{std::move(eigenvalues)}, prov_{prov}
  {
    require(basis_.cols() == eigenvalues_.size(), "denoiser: basis/eigenvalue size mismatch");
    require(basis_.rows() >= basis_.cols(), "denoiser: rank exceeds n");
    for (Index i = 0; i < eigenvalues_.size(); ++i) {
      require(eigenvalues_[i] > 0.0, "denoiser: eigenvalues must be > 0 in condensed form");
      require(eigenvalues_[i] <= 1.0, "denoiser: eigenvalue above 1");
    }
    const Matrix gram = basis_.transpose() * basis_;
    const double ortho = (gram - Matrix::Identity(rank(), rank())).cwiseAbs().maxCoeff();
    require(rank() == 0 || ortho <= 1e-10, "denoiser: basis columns are not orthonormal");
  }

  /// Eigendecomposition of a symmetric matrix, clamped to [0, 1], with
  /// eigenvalues below tol::eig_drop removed.
  static LinearDenoiser from_dense(const Matrix& m, DenoiserProvenance prov = {})
  {
    require(m.rows() == m.cols(), "from_dense: matrix must be square");
    require(m.allFinite(), "from_dense: non-finite entries");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    require(asym <= 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()), "from_dense: matrix is not symmetric");

    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) throw SolverError("from_dense: eigendecomposition failed");

    const Index n = m.rows();
    prov.min_raw_eigenvalue = es.eigenvalues().size() ? es.eigenvalues().minCoeff() : 0.0;
    std::vector<Index> keep;
    for (Index i = n - 1; i >= 0; --i) {
      const double lam = std::min(1.0, std::max(0.0, es.eigenvalues()[i]));
      if (lam >= tol::eig_drop) keep.push_back(i);
    }
    Matrix u(n, static_cast<Index>(keep.size()));
    Vector lam(static_cast<Index>(keep.size()));
    for (Index k = 0; k < static_cast<Index>(keep.size()); ++k) {
      u.col(k) = es.eigenvectors().col(keep[k]);
      lam[k] = std::min(1.0, es.eigenvalues()[keep[k]]);
    }
    LinearDenoiser d(std::move(u), std::move(lam), prov);
    const Matrix diff = m - d.dense();
    d.prov_.truncation_residual = diff.norm();
    d.prov_.max_abs_residual = diff.cwiseAbs().maxCoeff();
    return d;
  }

  [[nodiscard]] Index n() const { return basis_.rows(); }
  [[nodiscard]] Index rank() const { return basis_.cols(); }
  [[nodiscard]] const Matrix& basis() const { return basis_; }
  [[nodiscard]] const Vector& eigenvalues() const { return eigenvalues_; }
  [[nodiscard]] const DenoiserProvenance& provenance() const { return prov_; }

  /// Diagonal of Λ⁻¹ − I: the reduced-space weights of the regularizer.
  [[nodiscard]] Vector penalty_weights() const
  {
    return eigenvalues_.cwiseInverse() - Vector::Ones(rank());
  }

  [[nodiscard]] Matrix dense() const
  {
    return basis_ * eigenvalues_.asDiagonal() * basis_.transpose();
  }

  [[nodiscard]] Vector apply(const Eigen::Ref<const Vector>& x) const
  {
    check_size(x);
    const Vector z = basis_.transpose() * x;
    return basis_ * eigenvalues_.cwiseProduct(z);
  }

  [[nodiscard]] Vector project_range(const Eigen::Ref<const Vector>& x) const
  {
    check_size(x);
    return basis_ * (basis_.transpose() * x);
  }

  [[nodiscard]] double dist_range(const Eigen::Ref<const Vector>& x) const
  {
    return (x - project_range(x)).norm();
  }

  [[nodiscard]] bool in_range(const Eigen::Ref<const Vector>& x) const
  {
    return dist_range(x) <= tol::range * std::max(x.norm(), 1.0);
  }

  /// Φ_W(x) = ½ xᵀ(I − W)W†x on R(W), +inf elsewhere.
  [[nodiscard]] ExtendedReal phi(const Eigen::Ref<const Vector>& x) const
  {
    require(x.allFinite(), "phi: non-finite input");
    if (!in_range(x)) return ExtendedReal::infinity();
    const Vector z = basis_.transpose() * x;
    return ExtendedReal{0.5 * z.cwiseAbs2().dot(penalty_weights())};
  }

  /// Reduced-space regularizer ½ zᵀ(Λ⁻¹ − I)z for x = Uz.
  [[nodiscard]] double phi_reduced(const Eigen::Ref<const Vector>& z) const
  {
    return 0.5 * z.cwiseAbs2().dot(penalty_weights());
  }

private:
  void check_size(const Eigen::Ref<const Vector>& x) const
  {
    require(x.size() == n(), "denoiser: vector length does not match n");
  }

  Matrix basis_;
  Vector eigenvalues_;
  DenoiserProvenance prov_;
};

/// Keep the r largest eigenpairs. Flags rank deficiency instead of failing.
inline LinearDenoiser truncate_rank(const LinearDenoiser& d, Index r)
{
  require(r >= 1 && r <= d.n(), "truncate_rank: need 1 <= r <= n");
  const Index keep = std::min(r, d.rank());
  DenoiserProvenance prov = d.provenance();
  prov.kind = DenoiserKind::rank_truncated;
  prov.requested_rank = r;
  prov.rank_deficient = keep < r;
  prov.truncation_residual = d.eigenvalues().tail(d.rank() - keep).norm();
  prov.max_abs_residual = 0.0;
  return LinearDenoiser(d.basis().leftCols(keep), d.eigenvalues().head(keep), prov);
}

inline LinearDenoiser truncate_rank(const Matrix& m, Index r)
{
  require(r >= 1 && r <= m.rows(), "truncate_rank: need 1 <= r <= n");
  const LinearDenoiser full = LinearDenoiser::from_dense(m);
  LinearDenoiser t = truncate_rank(full, r);
  DenoiserProvenance prov = t.provenance();
  const Matrix diff = m - t.dense();
  prov.truncation_residual = diff.norm();
  prov.max_abs_residual = diff.cwiseAbs().maxCoeff();
  return LinearDenoiser(t.basis(), t.eigenvalues(), prov);
}

/// Symmetric doubly-stochastic NLM matrix together with its Sinkhorn diagnostics.
struct DsgNlmMatrix {
  Matrix w;
  double max_row_deviation{0.0};
  int sinkhorn_iterations{0};
};

namespace detail {

/// Raw kernel K given per-pixel patches and a neighbour predicate.
template <typename Neighbours>
Matrix patch_kernel(const Matrix& patches, double h, Neighbours&& neighbours)
{
  const Index n = patches.cols();
  Matrix k = Matrix::Zero(n, n);
  const double inv_h2 = 1.0 / (h * h);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      if (!neighbours(i, j)) continue;
      const double d2 = (patches.col(i) - patches.col(j)).squaredNorm();
      k(i, j) = k(j, i) = std::exp(-d2 * inv_h2);
    }
  }
  return k;
}

/// diag(s) K diag(s) with row sums 1, by symmetric Sinkhorn iteration.
inline DsgNlmMatrix symmetric_sinkhorn(const Matrix& k, const GuideKernelConfig& cfg)
{
  const Index n = k.rows();
  Vector s = Vector::Ones(n);
  DsgNlmMatrix out;
  for (int it = 0; it < cfg.sinkhorn_iters; ++it) {
    const Vector ks = k * s;
    const double dev = (s.cwiseProduct(ks) - Vector::Ones(n)).cwiseAbs().maxCoeff();
    out.max_row_deviation = dev;
    out.sinkhorn_iterations = it;
    if (dev <= cfg.sinkhorn_tol) {
      out.w = s.asDiagonal() * k * s.asDiagonal();
      out.w = 0.5 * (out.w + out.w.transpose());
      return out;
    }
    s = s.cwiseQuotient(ks).cwiseSqrt();
  }
  throw SolverError("sinkhorn: no convergence within " + std::to_string(cfg.sinkhorn_iters) +
                    " iterations, row-sum deviation " + std::to_string(out.max_row_deviation));
}

inline LinearDenoiser finish_dsg(const DsgNlmMatrix& m, const GuideKernelConfig& cfg,
                                 const Eigen::Ref<const Vector>& flat, Index rows, Index cols)
{
  DenoiserProvenance prov;
  prov.kind = DenoiserKind::dsg_nlm;
  prov.patch_radius = cfg.patch_radius;
  prov.search_radius = cfg.search_radius;
  prov.h = cfg.h;
  prov.guide_hash = hash_samples(flat);
  prov.guide_rows = rows;
  prov.guide_cols = cols;
  prov.sinkhorn_deviation = m.max_row_deviation;
  LinearDenoiser d = LinearDenoiser::from_dense(m.w, prov);
  return d;
}

} // namespace detail

/// Dense DSG-NLM matrix for a 1-D guide (zero-padded patches).
inline DsgNlmMatrix dsg_nlm_matrix(const Eigen::Ref<const Vector>& guide, const GuideKernelConfig& cfg)
{
  cfg.validate();
  require(guide.size() >= 1, "dsg_nlm: empty guide");
  require(guide.allFinite(), "dsg_nlm: guide has non-finite values");
  const Index n = guide.size();
  const Index p = cfg.patch_radius;
  Matrix patches = Matrix::Zero(2 * p + 1, n);
  for (Index i = 0; i < n; ++i)
    for (Index o = -p; o <= p; ++o)
      if (i + o >= 0 && i + o < n) patches(o + p, i) = guide[i + o];
  const Matrix k = detail::patch_kernel(patches, cfg.h,
                                        [&](Index i, Index j) { return j - i <= cfg.search_radius; });
  return detail::symmetric_sinkhorn(k, cfg);
}

/// Dense DSG-NLM matrix for an image; pixels are flattened row-major.
inline DsgNlmMatrix dsg_nlm_matrix_2d(const Matrix& image, const GuideKernelConfig& cfg)
{
  cfg.validate();
  require(image.size() >= 1, "dsg_nlm: empty guide");
  require(image.allFinite(), "dsg_nlm: guide has non-finite values");
  const Index rows = image.rows(), cols = image.cols();
  const Index p = cfg.patch_radius;
  const Index side = 2 * p + 1;
  Matrix patches = Matrix::Zero(side * side, rows * cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      for (Index dr = -p; dr <= p; ++dr)
        for (Index dc = -p; dc <= p; ++dc) {
          const Index rr = r + dr, cc = c + dc;
          if (rr >= 0 && rr < rows && cc >= 0 && cc < cols)
            patches((dr + p) * side + (dc + p), r * cols + c) = image(rr, cc);
        }
  const Matrix k = detail::patch_kernel(patches, cfg.h, [&](Index i, Index j) {
    const Index dr = std::abs(i / cols - j / cols);
    const Index dc = std::abs(i % cols - j % cols);
    return std::max(dr, dc) <= cfg.search_radius;
  });
  return detail::symmetric_sinkhorn(k, cfg);
}

inline LinearDenoiser build_dsg_nlm(const Eigen::Ref<const Vector>& guide, const GuideKernelConfig& cfg)
{
  return detail::finish_dsg(dsg_nlm_matrix(guide, cfg), cfg, guide, guide.size(), 1);
}

inline LinearDenoiser build_dsg_nlm_2d(const Matrix& image, const GuideKernelConfig& cfg)
{
  Vector flat(image.size());
  for (Index r = 0; r < image.rows(); ++r)
    for (Index c = 0; c < image.cols(); ++c) flat[r * image.cols() + c] = image(r, c);
  return detail::finish_dsg(dsg_nlm_matrix_2d(image, cfg), cfg, flat, image.rows(), image.cols());
}

} // namespace pnpcs

#endif // PNPCS_DENOISER_HPP
