#ifndef PNPCS_DENOISER_IO_HPP
#define PNPCS_DENOISER_IO_HPP

#include "pnpcs/denoiser.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace pnpcs {

// Binary layout (little-endian, packed):
//   char[4] "PNPW", u32 version,
//   u64 n, u64 r, f64 Λ[r], f64 U[n*r] (column-major),
//   u8 kind, i64 patch_radius, i64 search_radius, f64 h, u64 guide_hash,
//   i64 guide_rows, i64 guide_cols, f64 truncation_residual, f64 max_abs_residual,
//   f64 min_raw_eigenvalue, f64 sinkhorn_deviation, i64 requested_rank, u8 rank_deficient
inline constexpr std::array<char, 4> denoiser_magic{'P', 'N', 'P', 'W'};
inline constexpr std::uint32_t denoiser_format_version = 1;

namespace detail {

template <typename T>
void put(std::ostream& os, T v)
{
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is)
{
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("denoiser file: truncated");
  return v;
}

} // namespace detail

inline void write_denoiser(std::ostream& os, const LinearDenoiser& d)
{
  os.write(denoiser_magic.data(), denoiser_magic.size());
  detail::put<std::uint32_t>(os, denoiser_format_version);
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(d.n()));
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(d.rank()));
  for (Index i = 0; i < d.rank(); ++i) detail::put<double>(os, d.eigenvalues()[i]);
  for (Index j = 0; j < d.rank(); ++j)
    for (Index i = 0; i < d.n(); ++i) detail::put<double>(os, d.basis()(i, j));
  const auto& p = d.provenance();
  detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(p.kind));
  detail::put<std::int64_t>(os, p.patch_radius);
  detail::put<std::int64_t>(os, p.search_radius);
  detail::put<double>(os, p.h);
  detail::put<std::uint64_t>(os, p.guide_hash);
  detail::put<std::int64_t>(os, p.guide_rows);
  detail::put<std::int64_t>(os, p.guide_cols);
  detail::put<double>(os, p.truncation_residual);
  detail::put<double>(os, p.max_abs_residual);
  detail::put<double>(os, p.min_raw_eigenvalue);
  detail::put<double>(os, p.sinkhorn_deviation);
  detail::put<std::int64_t>(os, p.requested_rank);
  detail::put<std::uint8_t>(os, p.rank_deficient ? 1 : 0);
}

inline LinearDenoiser read_denoiser(std::istream& is)
{
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != denoiser_magic) throw ConfigError("denoiser file: bad magic");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != denoiser_format_version)
    throw ConfigError("denoiser file: unsupported version " + std::to_string(version));
  const auto n = static_cast<Index>(detail::get<std::uint64_t>(is));
  const auto r = static_cast<Index>(detail::get<std::uint64_t>(is));
  if (r > n || n > (Index{1} << 24)) throw ConfigError("denoiser file: implausible dimensions");
  Vector lam(r);
  for (Index i = 0; i < r; ++i) lam[i] = detail::get<double>(is);
  Matrix u(n, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) u(i, j) = detail::get<double>(is);
  DenoiserProvenance p;
  const auto kind = detail::get<std::uint8_t>(is);
  if (kind > 2) throw ConfigError("denoiser file: unknown provenance tag");
  p.kind = static_cast<DenoiserKind>(kind);
  p.patch_radius = detail::get<std::int64_t>(is);
  p.search_radius = detail::get<std::int64_t>(is);
  p.h = detail::get<double>(is);
  p.guide_hash = detail::get<std::uint64_t>(is);
  p.guide_rows = detail::get<std::int64_t>(is);
  p.guide_cols = detail::get<std::int64_t>(is);
  p.truncation_residual = detail::get<double>(is);
  p.max_abs_residual = detail::get<double>(is);
  p.min_raw_eigenvalue = detail::get<double>(is);
  p.sinkhorn_deviation = detail::get<double>(is);
  p.requested_rank = detail::get<std::int64_t>(is);
  p.rank_deficient = detail::get<std::uint8_t>(is) != 0;
  return LinearDenoiser(std::move(u), std::move(lam), p);
}

inline void save_denoiser(const std::string& path, const LinearDenoiser& d)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  write_denoiser(os, d);
}

inline LinearDenoiser load_denoiser(const std::string& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  return read_denoiser(is);
}

/// Human-readable summary: rank, residuals and a 10-bin spectrum histogram over [0, 1].
inline std::string denoiser_summary(const LinearDenoiser& d)
{
  std::ostringstream os;
  const auto& p = d.provenance();
  os << "kind: " << to_string(p.kind) << '\n'
     << "n: " << d.n() << '\n'
     << "rank: " << d.rank() << '\n';
  if (p.kind != DenoiserKind::explicit_basis) {
    os << "patch_radius: " << p.patch_radius << '\n'
       << "search_radius: " << p.search_radius << '\n'
       << "h: " << p.h << '\n'
       << "guide_hash: " << std::hex << std::setw(16) << std::setfill('0') << p.guide_hash << std::dec
       << std::setfill(' ') << '\n';
  }
  os << std::setprecision(6) << "truncation_residual: " << p.truncation_residual << '\n'
     << "min_raw_eigenvalue: " << p.min_raw_eigenvalue << '\n';
  if (p.requested_rank > 0)
    os << "requested_rank: " << p.requested_rank << (p.rank_deficient ? " (deficient)" : "") << '\n';
  std::array<Index, 10> bins{};
  for (Index i = 0; i < d.rank(); ++i) {
    const auto b = std::min<Index>(9, static_cast<Index>(d.eigenvalues()[i] * 10.0));
    ++bins[static_cast<std::size_t>(b)];
  }
  os << "spectrum histogram:\n";
  for (std::size_t b = 0; b < bins.size(); ++b) {
    char line[64];
    std::snprintf(line, sizeof line, "  [%.1f, %.1f%c %lld\n", b / 10.0, (b + 1) / 10.0, b == 9 ? ']' : ')',
                  static_cast<long long>(bins[b]));
    os << line;
  }
  return os.str();
}

} // namespace pnpcs

#endif // PNPCS_DENOISER_IO_HPP
