#ifndef PNPCS_SIGNALS_HPP
#define PNPCS_SIGNALS_HPP

#include "pnpcs/common.hpp"

#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace pnpcs::signals {

/// Deterministic piecewise-smooth test line in [0, 1]: a slow oscillation
/// with two steps and a localized texture burst.
inline Vector scan_line(Index n)
{
  require(n >= 2, "scan_line: need n >= 2");
  constexpr double pi = std::numbers::pi;
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    double y = 0.45 + 0.2 * std::sin(2 * pi * 1.5 * t) + 0.1 * std::cos(2 * pi * 4.0 * t + 0.3);
    if (t > 0.3) y += 0.18;
    if (t > 0.68) y -= 0.25;
    const double bump = (t - 0.5) / 0.06;
    y += 0.08 * std::cos(2 * pi * 9.0 * t) * std::exp(-bump * bump);
    v[i] = std::min(1.0, std::max(0.0, y));
  }
  return v;
}

/// ECG-like spike train on a zero baseline: per beat a narrow QRS complex
/// with Q/S dips and smooth P and T waves. The default period is 70 bpm at 360 Hz.
inline Vector spike_train(Index n, Index period = 308)
{
  require(n >= 8 && period >= 16, "spike_train: signal too short");
  Vector v = Vector::Zero(n);
  auto bump = [](double t, double c, double w) {
    const double u = (t - c) / w;
    return std::exp(-0.5 * u * u);
  };
  for (Index beat = period / 2; beat < n + period; beat += period) {
    const double c = static_cast<double>(beat);
    for (Index i = 0; i < n; ++i) {
      const double t = static_cast<double>(i);
      v[i] += 1.0 * bump(t, c, 1.6) - 0.18 * bump(t, c - 4.0, 1.2) - 0.25 * bump(t, c + 4.5, 1.4) +
              0.10 * bump(t, c - 0.3 * static_cast<double>(period), 5.0) +
              0.20 * bump(t, c + 0.35 * static_cast<double>(period), 8.0);
    }
  }
  return v;
}

/// One sample per line; blank lines and `#` comments are skipped. A single
/// comma-separated row is also accepted.
inline Vector read_csv(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open signal " + path);
  std::vector<double> vals;
  std::string line;
  while (std::getline(is, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      try {
        vals.push_back(std::stod(cell.substr(b)));
      } catch (const std::exception&) {
        throw ConfigError("signal " + path + ": bad sample '" + cell + "'");
      }
    }
  }
  require(!vals.empty(), "signal " + path + " is empty");
  Vector v(static_cast<Index>(vals.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = vals[static_cast<std::size_t>(i)];
  require(v.allFinite(), "signal " + path + " has non-finite samples");
  return v;
}

/// Linear-interpolation resampling to n samples (end points preserved).
inline Vector resample(const Vector& v, Index n)
{
  require(v.size() >= 2 && n >= 2, "resample: need at least two samples");
  Vector out(n);
  const double scale = static_cast<double>(v.size() - 1) / static_cast<double>(n - 1);
  for (Index i = 0; i < n; ++i) {
    const double pos = scale * static_cast<double>(i);
    const auto lo = std::min<Index>(static_cast<Index>(pos), v.size() - 2);
    const double f = pos - static_cast<double>(lo);
    out[i] = (1.0 - f) * v[lo] + f * v[lo + 1];
  }
  return out;
}

} // namespace pnpcs::signals

#endif // PNPCS_SIGNALS_HPP
