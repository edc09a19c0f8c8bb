#ifndef PNPCS_STATS_HPP
#define PNPCS_STATS_HPP

#include "pnpcs/common.hpp"

namespace pnpcs {

struct Interval {
  double lo;
  double hi;
};

/// Wilson score interval for a binomial proportion (z = 1.96 → 95%).
inline Interval wilson_interval(long successes, long trials, double z = 1.959963984540054)
{
  require(trials >= 1 && successes >= 0 && successes <= trials, "wilson_interval: bad counts");
  const double nt = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / nt;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nt;
  const double centre = (p + z2 / (2.0 * nt)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nt + z2 / (4.0 * nt * nt)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline double mse(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& ref)
{
  return (x - ref).squaredNorm() / static_cast<double>(ref.size());
}

/// PSNR in dB for signals on a [0, 1] intensity scale; +inf for identical inputs.
inline double psnr_db(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& ref)
{
  const double e = mse(x, ref);
  return e == 0.0 ? std::numeric_limits<double>::infinity() : -10.0 * std::log10(e);
}

/// SNR in dB: 20 log10(‖ref‖ / ‖x − ref‖).
inline double snr_db(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& ref)
{
  const double e = (x - ref).norm();
  return e == 0.0 ? std::numeric_limits<double>::infinity() : 20.0 * std::log10(ref.norm() / e);
}

inline double relative_error(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& ref)
{
  const double rn = ref.norm();
  return rn == 0.0 ? (x - ref).norm() : (x - ref).norm() / rn;
}

} // namespace pnpcs

#endif // PNPCS_STATS_HPP
