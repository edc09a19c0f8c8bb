#ifndef PNPCS_EXPERIMENTS_HPP
#define PNPCS_EXPERIMENTS_HPP

#include "pnpcs/baselines.hpp"
#include "pnpcs/bounds.hpp"
#include "pnpcs/config.hpp"
#include "pnpcs/denoiser.hpp"
#include "pnpcs/recovery.hpp"
#include "pnpcs/sensing.hpp"
#include "pnpcs/signals.hpp"
#include "pnpcs/stats.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace pnpcs::experiments {

inline constexpr const char* version = "pnpcs 1.0.0";

enum class ExperimentKind { phase_gaussian, exact_rademacher, robust, structured, concentration, ecg };
enum class Criterion { rel_err, psnr };
enum class SolverChoice { direct, admm };

inline const char* to_string(ExperimentKind k)
{
  switch (k) {
  case ExperimentKind::phase_gaussian: return "phase_gaussian";
  case ExperimentKind::exact_rademacher: return "exact_rademacher";
  case ExperimentKind::robust: return "robust";
  case ExperimentKind::structured: return "structured";
  case ExperimentKind::concentration: return "concentration";
  case ExperimentKind::ecg: return "ecg";
  }
  return "unknown";
}

inline ExperimentKind parse_kind(const std::string& s)
{
  for (auto k : {ExperimentKind::phase_gaussian, ExperimentKind::exact_rademacher, ExperimentKind::robust,
                 ExperimentKind::structured, ExperimentKind::concentration, ExperimentKind::ecg})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

/// Full description of a Monte Carlo campaign. Outputs are a pure function of it
/// (the thread count never changes results).
struct CampaignConfig {
  ExperimentKind kind{ExperimentKind::phase_gaussian};
  Index n{128};
  std::vector<Index> ranks{20};
  std::vector<Index> ms{};
  /// Measurement counts for the subspace points of the concentration suite.
  std::vector<Index> ms_subspace{400};
  long trials{100};
  std::uint64_t seed{1};
  /// `synthetic` (scan line), `spike_train`, or a CSV path.
  std::string guide{"synthetic"};
  Criterion criterion{Criterion::rel_err};
  double threshold{1e-6};
  double noise_std{0.0};
  double delta_factor{1.2};
  double epsilon{0.8};
  double beta{0.1};
  bounds::Ensemble ensemble{bounds::Ensemble::rademacher};
  Transform transform{Transform::walsh_hadamard};
  SolverChoice solver{SolverChoice::direct};
  int admm_iters{400};
  double admm_rho{1.0};
  GuideKernelConfig kernel{};
  Index cosamp_sparsity{30};
  int cosamp_iters{20};
  bool resample{false};
  std::string output{"out"};
  int threads{0};

  static CampaignConfig defaults(ExperimentKind k)
  {
    CampaignConfig c;
    c.kind = k;
    c.kernel.patch_radius = 2;
    switch (k) {
    case ExperimentKind::phase_gaussian:
      c.n = 128;
      c.ranks = {20};
      c.ms = range(10, 30, 1);
      c.kernel.h = 0.1;
      break;
    case ExperimentKind::exact_rademacher:
      c.n = 128;
      c.ranks = {10, 20, 30};
      c.ms = range(4, 64, 2);
      c.kernel.h = 0.1;
      break;
    case ExperimentKind::robust:
      c.n = 512;
      c.ranks = {50};
      c.ms = {300};
      c.noise_std = 0.05;
      c.delta_factor = 1.2;
      c.epsilon = 0.8;
      c.beta = 0.1;
      c.kernel.h = 0.05;
      break;
    case ExperimentKind::structured:
      c.n = 256;
      c.ranks = {10, 20};
      c.ms = range(8, 256, 8);
      c.kernel.h = 0.1;
      break;
    case ExperimentKind::concentration:
      c.n = 32;
      c.ranks = {2};
      c.ms = {200};
      c.ms_subspace = {400};
      c.trials = 10000;
      c.epsilon = 0.5;
      break;
    case ExperimentKind::ecg:
      c.n = 512;
      c.ranks = {150};
      c.ms = {150};
      c.guide = "spike_train";
      c.noise_std = 5e-3;
      c.delta_factor = 2.0;
      c.cosamp_sparsity = 30;
      c.cosamp_iters = 20;
      c.kernel.patch_radius = 8;
      c.kernel.h = 0.1;
      c.trials = 1;
      break;
    }
    c.kernel.search_radius = c.n - 1;
    return c;
  }

  static const std::set<std::string>& keys()
  {
    static const std::set<std::string> k{
        "kind",        "n",           "r",          "m",           "m_subspace",   "trials",       "seed",
        "guide",       "criterion",   "threshold",  "noise_std",   "delta_factor", "epsilon",      "beta",
        "ensemble",    "transform",   "solver",     "admm_iters",  "admm_rho",     "patch_radius", "search_radius",
        "h",           "sinkhorn_iters", "sinkhorn_tol", "cosamp_sparsity", "cosamp_iters", "resample",
        "output",      "threads",     "version"};
    return k;
  }

  /// Starts from defaults(kind) and applies every key present.
  static CampaignConfig from_config(const KeyValueConfig& kv)
  {
    kv.reject_unknown(keys());
    require(kv.has("kind"), "config: missing 'kind'");
    CampaignConfig c = defaults(parse_kind(kv.get_string("kind", "")));
    const bool n_given = kv.has("n");
    c.n = kv.get_int("n", c.n);
    c.ranks = to_index(kv.get_int_list("r", to_ll(c.ranks)));
    if (!c.ms.empty() || kv.has("m")) c.ms = to_index(kv.get_int_list("m", to_ll(c.ms)));
    c.ms_subspace = to_index(kv.get_int_list("m_subspace", to_ll(c.ms_subspace)));
    c.trials = kv.get_int("trials", c.trials);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
    c.guide = kv.get_string("guide", c.guide);
    const std::string crit = kv.get_string("criterion", c.criterion == Criterion::rel_err ? "rel_err" : "psnr");
    if (crit == "rel_err") c.criterion = Criterion::rel_err;
    else if (crit == "psnr") c.criterion = Criterion::psnr;
    else throw ConfigError("config: criterion must be rel_err or psnr");
    c.threshold = kv.get_double("threshold", c.criterion == Criterion::psnr && !kv.has("threshold") ? 80.0 : c.threshold);
    c.noise_std = kv.get_double("noise_std", c.noise_std);
    c.delta_factor = kv.get_double("delta_factor", c.delta_factor);
    c.epsilon = kv.get_double("epsilon", c.epsilon);
    c.beta = kv.get_double("beta", c.beta);
    c.ensemble = bounds::parse_ensemble(kv.get_string("ensemble", bounds::to_string(c.ensemble)));
    c.transform = parse_transform(kv.get_string("transform", pnpcs::to_string(c.transform)));
    const std::string solver = kv.get_string("solver", c.solver == SolverChoice::direct ? "direct" : "admm");
    if (solver == "direct") c.solver = SolverChoice::direct;
    else if (solver == "admm") c.solver = SolverChoice::admm;
    else throw ConfigError("config: solver must be direct or admm");
    c.admm_iters = static_cast<int>(kv.get_int("admm_iters", c.admm_iters));
    c.admm_rho = kv.get_double("admm_rho", c.admm_rho);
    c.kernel.patch_radius = kv.get_int("patch_radius", c.kernel.patch_radius);
    const long long sr = kv.get_int("search_radius", n_given ? -1 : c.kernel.search_radius);
    c.kernel.search_radius = sr < 0 ? c.n - 1 : sr;
    c.kernel.h = kv.get_double("h", c.kernel.h);
    c.kernel.sinkhorn_iters = static_cast<int>(kv.get_int("sinkhorn_iters", c.kernel.sinkhorn_iters));
    c.kernel.sinkhorn_tol = kv.get_double("sinkhorn_tol", c.kernel.sinkhorn_tol);
    c.cosamp_sparsity = kv.get_int("cosamp_sparsity", c.cosamp_sparsity);
    c.cosamp_iters = static_cast<int>(kv.get_int("cosamp_iters", c.cosamp_iters));
    c.resample = kv.get_bool("resample", c.resample);
    c.output = kv.get_string("output", c.output);
    c.threads = static_cast<int>(kv.get_int("threads", c.threads));
    c.validate();
    return c;
  }

  /// Every result-relevant field, resolved. Feeding this back through
  /// from_config reproduces the campaign.
  [[nodiscard]] KeyValueConfig to_config() const
  {
    KeyValueConfig kv;
    auto num = [](double v) {
      char buf[40];
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, res.ptr);
    };
    auto list = [](const std::vector<Index>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s;
    };
    kv.set("kind", to_string(kind));
    kv.set("n", std::to_string(n));
    kv.set("r", list(ranks));
    if (!ms.empty()) kv.set("m", list(ms));
    kv.set("m_subspace", list(ms_subspace));
    kv.set("trials", std::to_string(trials));
    kv.set("seed", std::to_string(seed));
    kv.set("guide", guide);
    kv.set("criterion", criterion == Criterion::rel_err ? "rel_err" : "psnr");
    kv.set("threshold", num(threshold));
    kv.set("noise_std", num(noise_std));
    kv.set("delta_factor", num(delta_factor));
    kv.set("epsilon", num(epsilon));
    kv.set("beta", num(beta));
    kv.set("ensemble", bounds::to_string(ensemble));
    kv.set("transform", pnpcs::to_string(transform));
    kv.set("solver", solver == SolverChoice::direct ? "direct" : "admm");
    kv.set("admm_iters", std::to_string(admm_iters));
    kv.set("admm_rho", num(admm_rho));
    kv.set("patch_radius", std::to_string(kernel.patch_radius));
    kv.set("search_radius", std::to_string(kernel.search_radius));
    kv.set("h", num(kernel.h));
    kv.set("sinkhorn_iters", std::to_string(kernel.sinkhorn_iters));
    kv.set("sinkhorn_tol", num(kernel.sinkhorn_tol));
    kv.set("cosamp_sparsity", std::to_string(cosamp_sparsity));
    kv.set("cosamp_iters", std::to_string(cosamp_iters));
    kv.set("resample", resample ? "true" : "false");
    kv.set("output", output);
    return kv;
  }

  void validate() const
  {
    require(n >= 2, "config: n must be >= 2");
    require(trials >= 1, "config: trials must be >= 1");
    require(!ranks.empty(), "config: r list is empty");
    for (Index r : ranks) require(r >= 1 && r <= n, "config: every r must lie in [1, n]");
    if (kind != ExperimentKind::concentration)
      for (Index m : ms) require(m >= 1 && m <= n, "config: every m must lie in [1, n]");
    else
      for (Index m : ms) require(m >= 1, "config: every m must be >= 1");
    for (Index m : ms_subspace) require(m >= 1, "config: every m_subspace must be >= 1");
    require(!ms.empty(), "config: m list is empty");
    require(threshold > 0.0, "config: threshold must be > 0");
    require(noise_std >= 0.0, "config: noise_std must be >= 0");
    require(delta_factor >= 0.0, "config: delta_factor must be >= 0");
    require(epsilon > 0.0 && epsilon < 1.0, "config: epsilon must lie in (0, 1)");
    require(beta > 0.0 && beta < 1.0, "config: beta must lie in (0, 1)");
    require(admm_iters >= 1 && admm_rho > 0.0, "config: bad ADMM parameters");
    require(threads >= 0, "config: threads must be >= 0");
    if (kind == ExperimentKind::structured && transform == Transform::walsh_hadamard)
      require(is_power_of_two(n), "config: walsh_hadamard needs n to be a power of 2");
    kernel.validate();
  }

private:
  static std::vector<Index> range(Index lo, Index hi, Index step)
  {
    std::vector<Index> v;
    for (Index i = lo; i <= hi; i += step) v.push_back(i);
    return v;
  }
  static std::vector<long long> to_ll(const std::vector<Index>& v) { return {v.begin(), v.end()}; }
  static std::vector<Index> to_index(const std::vector<long long>& v) { return {v.begin(), v.end()}; }
};

struct TrialRecord {
  Index r{0};
  Index m{0};
  long trial{0};
  std::uint64_t seed{0};
  bool success{false};
  double rel_err{0.0};
  double psnr_db{0.0};
  double residual{0.0};
  SolveStatus status{SolveStatus::optimal};
  double ms{0.0};
};

/// Empirical recovery probabilities over an (r, m) grid.
struct PhaseGrid {
  std::vector<Index> ranks;
  std::vector<Index> ms;
  long trials{0};
  /// successes[i * ms.size() + j] for ranks[i], ms[j].
  std::vector<long> successes;

  [[nodiscard]] long count(std::size_t ri, std::size_t mi) const { return successes[ri * ms.size() + mi]; }
  [[nodiscard]] double probability(std::size_t ri, std::size_t mi) const
  {
    return static_cast<double>(count(ri, mi)) / static_cast<double>(trials);
  }
  [[nodiscard]] Interval interval(std::size_t ri, std::size_t mi) const { return wilson_interval(count(ri, mi), trials); }
};

struct ThresholdRow {
  Index r{0};
  /// Smallest m on the grid with empirical probability ≥ 0.9.
  std::optional<Index> m_empirical;
  long m_theoretical{0};
};

struct PhaseResult {
  PhaseGrid grid;
  std::vector<TrialRecord> records;
  std::vector<ThresholdRow> thresholds;
};

namespace detail {

/// Runs fn(i) for i in [0, count) on `threads` workers (0 = hardware concurrency).
/// Results must be written by index; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn)
{
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline void fill_quality(TrialRecord& rec, const Vector& x, const Vector& xi, const CampaignConfig& cfg)
{
  rec.rel_err = relative_error(x, xi);
  const double e = mse(x, xi);
  rec.psnr_db = psnr_db(x, xi);
  // 80 dB on a unit intensity scale is the same statement as MSE < 1e-8.
  if (std::isfinite(rec.psnr_db) && ((rec.psnr_db > 80.0) != (e < 1e-8)) &&
      std::abs(rec.psnr_db - 80.0) > 1e-9)
    throw SolverError("psnr/mse success criteria disagree");
  if (cfg.criterion == Criterion::rel_err) rec.success = rec.rel_err <= cfg.threshold;
  else rec.success = rec.psnr_db > cfg.threshold;
}

} // namespace detail

/// Guide signal named by the configuration, at length cfg.n.
inline Vector load_guide(const CampaignConfig& cfg)
{
  if (cfg.guide == "synthetic" || cfg.guide == "scan_line") return signals::scan_line(cfg.n);
  if (cfg.guide == "spike_train") return signals::spike_train(cfg.n);
  Vector v = signals::read_csv(cfg.guide);
  if (v.size() == cfg.n) return v;
  if (!cfg.resample)
    throw ConfigError("guide " + cfg.guide + " has " + std::to_string(v.size()) + " samples, expected " +
                      std::to_string(cfg.n) + " (set resample = true to interpolate)");
  return signals::resample(v, cfg.n);
}

/// Exact-recovery grid: for every (r, m) cell, `trials` independent operators
/// of `kind` against one shared rank-r denoiser and ξ = W_r · guide.
inline PhaseResult run_phase(const CampaignConfig& cfg, SensingKind kind)
{
  cfg.validate();
  const Vector guide = load_guide(cfg);
  const LinearDenoiser full = build_dsg_nlm(guide, cfg.kernel);
  std::vector<LinearDenoiser> dens;
  std::vector<Vector> truths;
  for (Index r : cfg.ranks) {
    dens.push_back(truncate_rank(full, r));
    truths.push_back(dens.back().apply(guide));
  }

  PhaseResult out;
  out.grid.ranks = cfg.ranks;
  out.grid.ms = cfg.ms;
  out.grid.trials = cfg.trials;
  const std::size_t nr = cfg.ranks.size(), nm = cfg.ms.size();
  const auto nt = static_cast<std::size_t>(cfg.trials);
  out.records.resize(nr * nm * nt);

  detail::parallel_for(out.records.size(), cfg.threads, [&](std::size_t idx) {
    const std::size_t ri = idx / (nm * nt), mi = (idx / nt) % nm, t = idx % nt;
    const auto t0 = std::chrono::steady_clock::now();
    TrialRecord rec;
    rec.r = cfg.ranks[ri];
    rec.m = cfg.ms[mi];
    rec.trial = static_cast<long>(t);
    rec.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(rec.r), static_cast<std::uint64_t>(rec.m), t});
    const auto op = make_operator(kind, rec.m, cfg.n, rec.seed, cfg.transform);
    const Vector& xi = truths[ri];
    const Vector b = op.apply(xi);
    RecoverySolution sol;
    if (cfg.solver == SolverChoice::direct) {
      sol = solve_exact(op, b, dens[ri]);
    } else {
      AdmmOptions opt;
      opt.iters = cfg.admm_iters;
      opt.rho = cfg.admm_rho;
      sol = solve_robust_admm(op, b, 0.0, dens[ri], opt);
      if (sol.status == SolveStatus::max_iters && !sol.diverged) sol.status = SolveStatus::optimal;
    }
    rec.status = sol.status;
    rec.residual = sol.residual;
    detail::fill_quality(rec, sol.x_star, xi, cfg);
    if (sol.status != SolveStatus::optimal) rec.success = false;
    rec.ms = detail::elapsed_ms(t0);
    out.records[idx] = rec;
  });

  out.grid.successes.assign(nr * nm, 0);
  for (std::size_t idx = 0; idx < out.records.size(); ++idx)
    if (out.records[idx].success) ++out.grid.successes[idx / nt];

  for (std::size_t ri = 0; ri < nr; ++ri) {
    ThresholdRow row;
    row.r = cfg.ranks[ri];
    for (std::size_t mi = 0; mi < nm; ++mi)
      if (out.grid.probability(ri, mi) >= 0.9) {
        row.m_empirical = cfg.ms[mi];
        break;
      }
    bounds::BoundSpec bound;
    bound.ensemble = kind == SensingKind::gaussian ? bounds::Ensemble::gaussian : bounds::Ensemble::rademacher;
    bound.r = static_cast<long>(row.r);
    bound.beta = cfg.beta;
    row.m_theoretical = bounds::m_exact_bound(bound);
    out.thresholds.push_back(row);
  }
  return out;
}

inline PhaseResult run_phase_gaussian(const CampaignConfig& cfg) { return run_phase(cfg, SensingKind::gaussian); }
inline PhaseResult run_exact_rademacher(const CampaignConfig& cfg) { return run_phase(cfg, SensingKind::rademacher); }
inline PhaseResult run_structured(const CampaignConfig& cfg) { return run_phase(cfg, SensingKind::structured); }

/// True when each row of the grid is nondecreasing in m except for at most
/// `allowed_dips` cells, where a dip is a drop larger than `slack`.
inline bool monotone_in_m(const PhaseGrid& g, std::size_t ri, int allowed_dips = 1, double slack = 0.0)
{
  int dips = 0;
  double best = 0.0;
  for (std::size_t mi = 0; mi < g.ms.size(); ++mi) {
    const double p = g.probability(ri, mi);
    if (p + slack < best) ++dips;
    best = std::max(best, p);
  }
  return dips <= allowed_dips;
}

struct RobustTrial {
  TrialRecord record;
  double lhs{0.0};
  double rhs{0.0};
  double eta_norm{0.0};
  double delta{0.0};
};

struct RobustCell {
  Index r{0};
  Index m{0};
  long trials{0};
  long satisfied{0};
  long infeasible{0};
  Interval wilson{0.0, 0.0};
  double mean_lhs{0.0};
  double mean_rhs{0.0};
  double ratio_of_means{0.0};
  double mean_ratio{0.0};
  double dist_xi{0.0};
  long m_bound{0};
};

struct RobustReport {
  std::vector<RobustCell> cells;
  std::vector<RobustTrial> trials;
};

/// Noisy recovery of a guide signal ξ (generally outside R(W)) and the
/// empirical frequency of ‖x* − ξ‖ ≤ (1 + 2/(1−ε))·dist(ξ,R(W)) + (δ + ‖η‖)/(1−ε).
inline RobustReport run_robust(const CampaignConfig& cfg)
{
  cfg.validate();
  const Vector xi = load_guide(cfg);
  const LinearDenoiser full = build_dsg_nlm(xi, cfg.kernel);
  std::vector<LinearDenoiser> dens;
  for (Index r : cfg.ranks) dens.push_back(truncate_rank(full, r));
  const SensingKind kind = cfg.ensemble == bounds::Ensemble::gaussian ? SensingKind::gaussian : SensingKind::rademacher;

  const std::size_t nr = cfg.ranks.size(), nm = cfg.ms.size();
  const auto nt = static_cast<std::size_t>(cfg.trials);
  RobustReport rep;
  rep.trials.resize(nr * nm * nt);
  detail::parallel_for(rep.trials.size(), cfg.threads, [&](std::size_t idx) {
    const std::size_t ri = idx / (nm * nt), mi = (idx / nt) % nm, t = idx % nt;
    const auto t0 = std::chrono::steady_clock::now();
    RobustTrial tr;
    auto& rec = tr.record;
    rec.r = cfg.ranks[ri];
    rec.m = cfg.ms[mi];
    rec.trial = static_cast<long>(t);
    rec.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(rec.r), static_cast<std::uint64_t>(rec.m), t});
    const auto op = make_operator(kind, rec.m, cfg.n, rec.seed);
    auto eng = make_engine(mix64(rec.seed ^ 0x6e6f697365ULL));
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    Vector eta(op.rows());
    for (Index i = 0; i < eta.size(); ++i) eta[i] = cfg.noise_std > 0.0 ? noise(eng) : 0.0;
    const Vector b = op.apply(xi) + eta;
    tr.eta_norm = eta.norm();
    tr.delta = cfg.delta_factor * tr.eta_norm;
    RecoverySolution sol;
    if (cfg.solver == SolverChoice::direct) {
      sol = solve_robust_direct(op, b, tr.delta, dens[ri]);
    } else {
      AdmmOptions opt;
      opt.iters = cfg.admm_iters;
      opt.rho = cfg.admm_rho;
      sol = solve_robust_admm(op, b, tr.delta, dens[ri], opt);
      if (sol.status == SolveStatus::max_iters && !sol.diverged) sol.status = SolveStatus::optimal;
    }
    rec.status = sol.status;
    rec.residual = sol.residual;
    detail::fill_quality(rec, sol.x_star, xi, cfg);
    tr.lhs = (sol.x_star - xi).norm();
    tr.rhs = bounds::robust_error_rhs(cfg.epsilon, tr.delta, tr.eta_norm, dens[ri].dist_range(xi));
    rec.success = sol.status == SolveStatus::optimal && tr.lhs <= tr.rhs;
    rec.ms = detail::elapsed_ms(t0);
    rep.trials[idx] = tr;
  });

  for (std::size_t ri = 0; ri < nr; ++ri)
    for (std::size_t mi = 0; mi < nm; ++mi) {
      RobustCell c;
      c.r = cfg.ranks[ri];
      c.m = cfg.ms[mi];
      c.trials = cfg.trials;
      c.dist_xi = dens[ri].dist_range(xi);
      double ratio_sum = 0.0;
      for (std::size_t t = 0; t < nt; ++t) {
        const auto& tr = rep.trials[(ri * nm + mi) * nt + t];
        if (tr.record.success) ++c.satisfied;
        if (tr.record.status == SolveStatus::infeasible) ++c.infeasible;
        c.mean_lhs += tr.lhs;
        c.mean_rhs += tr.rhs;
        ratio_sum += tr.rhs > 0.0 ? tr.lhs / tr.rhs : 0.0;
      }
      c.mean_lhs /= static_cast<double>(nt);
      c.mean_rhs /= static_cast<double>(nt);
      c.mean_ratio = ratio_sum / static_cast<double>(nt);
      c.ratio_of_means = c.mean_rhs > 0.0 ? c.mean_lhs / c.mean_rhs : 0.0;
      c.wilson = wilson_interval(c.satisfied, c.trials);
      c.m_bound = bounds::m_robust_bound({cfg.ensemble, static_cast<long>(c.r), cfg.beta, cfg.epsilon, std::nullopt});
      rep.cells.push_back(c);
    }
  return rep;
}

struct ConcentrationPoint {
  std::string label;
  bounds::Ensemble ensemble{bounds::Ensemble::gaussian};
  /// `fixed` (one vector) or `subspace`.
  std::string shape;
  Index m{0};
  Index dim{1};
  double epsilon{0.0};
  long draws{0};
  long successes{0};
  Interval wilson{0.0, 0.0};
  double bound{0.0};
  double mean_sq_norm{0.0};
  bool passed{false};
};

struct ConcentrationReport {
  std::vector<ConcentrationPoint> points;
  /// Mean and max deviation from 1 of ‖A e₁‖² over Rademacher draws.
  double rademacher_e1_mean{0.0};
  double rademacher_e1_max_dev{0.0};
};

/// Empirical near-isometry frequencies against the concentration lower bounds
/// 1 − 2e^{−mγ(ε)} (fixed vector) and 1 − 2(12/ε)^r e^{−mγ(ε/2)} (r-dim subspace).
/// Subspace distortion is measured exactly by the extreme singular values of A·U.
/// A point passes when the Wilson lower edge of the empirical frequency is at least the bound.
inline ConcentrationReport run_concentration(const CampaignConfig& cfg)
{
  cfg.validate();
  const double eps = cfg.epsilon;
  auto base = make_engine(derive_seed(cfg.seed, {0xf17edULL}));
  std::normal_distribution<double> g(0.0, 1.0);
  Vector x(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) x[i] = g(base);
  x.normalize();

  ConcentrationReport rep;
  std::vector<ConcentrationPoint> points;
  for (auto ens : {bounds::Ensemble::gaussian, bounds::Ensemble::rademacher}) {
    for (Index m : cfg.ms) {
      ConcentrationPoint p;
      p.ensemble = ens;
      p.shape = "fixed";
      p.m = m;
      p.dim = 1;
      p.epsilon = eps;
      p.bound = 1.0 - 2.0 * std::exp(-static_cast<double>(m) * bounds::gamma(ens, eps));
      points.push_back(p);
    }
    for (Index r : cfg.ranks)
      for (Index m : cfg.ms_subspace) {
        ConcentrationPoint p;
        p.ensemble = ens;
        p.shape = "subspace";
        p.m = m;
        p.dim = r;
        p.epsilon = eps;
        p.bound = 1.0 - 2.0 * std::pow(12.0 / eps, static_cast<double>(r)) *
                            std::exp(-static_cast<double>(m) * bounds::gamma(ens, eps / 2.0));
        points.push_back(p);
      }
  }

  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    auto& p = points[pi];
    require(p.dim < cfg.n, "concentration: subspace dimension must be < n");
    p.label = std::string(bounds::to_string(p.ensemble)) + "_" + p.shape + "_m" + std::to_string(p.m) + "_r" +
              std::to_string(p.dim);
    Matrix basis;
    if (p.shape == "subspace") {
      auto eng = make_engine(derive_seed(cfg.seed, {0x5ab5ULL, static_cast<std::uint64_t>(p.dim)}));
      Matrix raw(cfg.n, p.dim);
      for (Index j = 0; j < p.dim; ++j)
        for (Index i = 0; i < cfg.n; ++i) raw(i, j) = g(eng);
      basis = Eigen::HouseholderQR<Matrix>(raw).householderQ() * Matrix::Identity(cfg.n, p.dim);
    }
    const SensingKind kind = p.ensemble == bounds::Ensemble::gaussian ? SensingKind::gaussian : SensingKind::rademacher;
    std::vector<char> ok(static_cast<std::size_t>(cfg.trials));
    std::vector<double> sq(static_cast<std::size_t>(cfg.trials));
    detail::parallel_for(ok.size(), cfg.threads, [&](std::size_t t) {
      const auto seed = derive_seed(cfg.seed, {pi, t});
      const auto op = make_operator(kind, p.m, cfg.n, seed);
      if (p.shape == "fixed") {
        const double s = op.apply(x).squaredNorm();
        sq[t] = s;
        ok[t] = (1.0 - eps) <= s && s <= (1.0 + eps);
      } else {
        const Matrix gm = op.apply_columns(basis);
        Eigen::JacobiSVD<Matrix> svd(gm);
        const double smax = svd.singularValues()[0];
        const double smin = svd.singularValues()[p.dim - 1];
        sq[t] = smax * smax;
        ok[t] = (1.0 - eps) <= smin && smax <= (1.0 + eps);
      }
    });
    p.draws = cfg.trials;
    for (std::size_t t = 0; t < ok.size(); ++t) {
      p.successes += ok[t] ? 1 : 0;
      p.mean_sq_norm += sq[t];
    }
    p.mean_sq_norm /= static_cast<double>(cfg.trials);
    p.wilson = wilson_interval(p.successes, p.draws);
    p.passed = p.wilson.lo >= p.bound;
  }
  rep.points = std::move(points);

  const Index m_e1 = cfg.ms.front();
  Vector e1 = Vector::Zero(cfg.n);
  e1[0] = 1.0;
  const long draws = std::min<long>(cfg.trials, 1000);
  for (long t = 0; t < draws; ++t) {
    const auto op = SensingOperator::make_rademacher(m_e1, cfg.n, derive_seed(cfg.seed, {0xe1ULL, static_cast<std::uint64_t>(t)}));
    const double s = op.apply(e1).squaredNorm();
    rep.rademacher_e1_mean += s;
    rep.rademacher_e1_max_dev = std::max(rep.rademacher_e1_max_dev, std::abs(s - 1.0));
  }
  rep.rademacher_e1_mean /= static_cast<double>(draws);
  return rep;
}

struct EcgReport {
  Vector xi;
  Vector surrogate;
  Vector x_pnp;
  Vector x_lasso;
  double snr_pnp{0.0};
  double snr_lasso{0.0};
  double snr_surrogate{0.0};
  double lasso_lambda{0.0};
  Index cosamp_sparsity{0};
  Index rank{0};
  Index m{0};
  double eta_norm{0.0};
  double delta{0.0};
  SolveStatus status{SolveStatus::optimal};
  /// Noiseless recovery of the projection of ξ onto R(W) with δ = 0.
  double smoke_snr{0.0};
};

/// LASSO weight by hold-out: every fifth measurement is held out, a
/// ten-point log grid below ‖Aᵀb‖_∞ is fit on the rest, and the weight with
/// the smallest held-out residual is rescaled to the full row count.
inline double select_lasso_lambda(const Matrix& a, const Vector& b, int iters = 3000)
{
  std::vector<Index> train, held;
  for (Index i = 0; i < a.rows(); ++i) (i % 5 == 4 ? held : train).push_back(i);
  Matrix at(static_cast<Index>(train.size()), a.cols()), ah(static_cast<Index>(held.size()), a.cols());
  Vector bt(at.rows()), bh(ah.rows());
  for (Index i = 0; i < at.rows(); ++i) {
    at.row(i) = a.row(train[static_cast<std::size_t>(i)]);
    bt[i] = b[train[static_cast<std::size_t>(i)]];
  }
  for (Index i = 0; i < ah.rows(); ++i) {
    ah.row(i) = a.row(held[static_cast<std::size_t>(i)]);
    bh[i] = b[held[static_cast<std::size_t>(i)]];
  }
  const double lmax = (at.transpose() * bt).cwiseAbs().maxCoeff();
  double best = std::numeric_limits<double>::infinity(), best_lambda = lmax;
  for (int k = 0; k < 10; ++k) {
    const double lam = lmax * std::pow(10.0, -4.0 * k / 9.0);
    const auto fit = lasso_ista(at, bt, lam, iters, 1e-9);
    const double err = (ah * fit.x - bh).norm();
    if (err < best) {
      best = err;
      best_lambda = lam;
    }
  }
  return best_lambda * static_cast<double>(a.rows()) / static_cast<double>(at.rows());
}

/// CoSaMP surrogate → DSG-NLM from the surrogate → rank truncation →
/// robust recovery with δ = delta_factor·‖η‖, compared with LASSO on the same b.
inline EcgReport run_ecg(const CampaignConfig& cfg, std::optional<Vector> signal = std::nullopt)
{
  cfg.validate();
  EcgReport rep;
  if (signal) {
    Vector v = std::move(*signal);
    if (v.size() != cfg.n) {
      if (!cfg.resample)
        throw ConfigError("ecg: signal has " + std::to_string(v.size()) + " samples, expected " + std::to_string(cfg.n));
      v = signals::resample(v, cfg.n);
    }
    rep.xi = std::move(v);
  } else {
    rep.xi = load_guide(cfg);
  }
  rep.m = cfg.ms.front();
  rep.rank = cfg.ranks.front();
  rep.cosamp_sparsity = cfg.cosamp_sparsity;
  const auto op = SensingOperator::make_gaussian(rep.m, cfg.n, derive_seed(cfg.seed, {0xec9ULL}));
  auto eng = make_engine(derive_seed(cfg.seed, {0x6e6f697365ULL}));
  std::normal_distribution<double> noise(0.0, cfg.noise_std);
  Vector eta(rep.m);
  for (Index i = 0; i < rep.m; ++i) eta[i] = cfg.noise_std > 0.0 ? noise(eng) : 0.0;
  const Matrix a = op.materialize();
  const Vector b = a * rep.xi + eta;
  rep.eta_norm = eta.norm();
  rep.delta = cfg.delta_factor * rep.eta_norm;

  rep.surrogate = cosamp(a, b, cfg.cosamp_sparsity, cfg.cosamp_iters).x_hat;
  const LinearDenoiser w = truncate_rank(build_dsg_nlm(rep.surrogate, cfg.kernel), rep.rank);
  const auto sol = solve_robust_direct(op, b, rep.delta, w);
  rep.status = sol.status;
  rep.x_pnp = sol.x_star;

  rep.lasso_lambda = select_lasso_lambda(a, b);
  rep.x_lasso = lasso_ista(a, b, rep.lasso_lambda, 5000, 1e-10).x;

  rep.snr_pnp = snr_db(rep.x_pnp, rep.xi);
  rep.snr_lasso = snr_db(rep.x_lasso, rep.xi);
  rep.snr_surrogate = snr_db(rep.surrogate, rep.xi);

  const Vector xi_in = w.project_range(rep.xi);
  const auto smoke = solve_robust_direct(op, op.apply(xi_in), 0.0, w);
  rep.smoke_snr = snr_db(smoke.x_star, xi_in);
  return rep;
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline std::string fmt(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p)
{
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

} // namespace detail

inline void write_trials_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& recs)
{
  auto os = detail::open_out(path);
  os << "r,m,trial,seed,success,rel_err,psnr_db,residual,status,ms\n";
  for (const auto& r : recs)
    os << r.r << ',' << r.m << ',' << r.trial << ',' << r.seed << ',' << (r.success ? 1 : 0) << ','
       << detail::fmt(r.rel_err) << ',' << detail::fmt(r.psnr_db) << ',' << detail::fmt(r.residual) << ','
       << pnpcs::to_string(r.status) << ',' << detail::fmt(r.ms) << '\n';
}

inline void write_phase_outputs(const std::filesystem::path& dir, const PhaseResult& res)
{
  std::filesystem::create_directories(dir);
  write_trials_csv(dir / "trials.csv", res.records);
  auto os = detail::open_out(dir / "summary.csv");
  os << "r,m,trials,successes,probability,wilson_lo,wilson_hi\n";
  const auto& g = res.grid;
  for (std::size_t ri = 0; ri < g.ranks.size(); ++ri)
    for (std::size_t mi = 0; mi < g.ms.size(); ++mi) {
      const auto w = g.interval(ri, mi);
      os << g.ranks[ri] << ',' << g.ms[mi] << ',' << g.trials << ',' << g.count(ri, mi) << ','
         << detail::fmt(g.probability(ri, mi)) << ',' << detail::fmt(w.lo) << ',' << detail::fmt(w.hi) << '\n';
    }
  for (std::size_t ri = 0; ri < g.ranks.size(); ++ri) {
    auto ps = detail::open_out(dir / ("plot_r" + std::to_string(g.ranks[ri]) + ".csv"));
    ps << "x,y\n";
    for (std::size_t mi = 0; mi < g.ms.size(); ++mi) ps << g.ms[mi] << ',' << detail::fmt(g.probability(ri, mi)) << '\n';
  }
  auto ts = detail::open_out(dir / "thresholds.csv");
  ts << "r,m_empirical_p90,m_theoretical\n";
  for (const auto& t : res.thresholds)
    ts << t.r << ',' << (t.m_empirical ? std::to_string(*t.m_empirical) : std::string("none")) << ','
       << t.m_theoretical << '\n';
}

inline void write_robust_outputs(const std::filesystem::path& dir, const RobustReport& rep)
{
  std::filesystem::create_directories(dir);
  std::vector<TrialRecord> recs;
  for (const auto& t : rep.trials) recs.push_back(t.record);
  write_trials_csv(dir / "trials.csv", recs);
  auto bs = detail::open_out(dir / "bound_trials.csv");
  bs << "r,m,trial,lhs,rhs,eta_norm,delta\n";
  for (const auto& t : rep.trials)
    bs << t.record.r << ',' << t.record.m << ',' << t.record.trial << ',' << detail::fmt(t.lhs) << ','
       << detail::fmt(t.rhs) << ',' << detail::fmt(t.eta_norm) << ',' << detail::fmt(t.delta) << '\n';
  auto os = detail::open_out(dir / "summary.csv");
  os << "r,m,trials,satisfied,infeasible,wilson_lo,wilson_hi,mean_lhs,mean_rhs,ratio_of_means,mean_ratio,dist_xi,m_bound\n";
  for (const auto& c : rep.cells)
    os << c.r << ',' << c.m << ',' << c.trials << ',' << c.satisfied << ',' << c.infeasible << ','
       << detail::fmt(c.wilson.lo) << ',' << detail::fmt(c.wilson.hi) << ',' << detail::fmt(c.mean_lhs) << ','
       << detail::fmt(c.mean_rhs) << ',' << detail::fmt(c.ratio_of_means) << ',' << detail::fmt(c.mean_ratio) << ','
       << detail::fmt(c.dist_xi) << ',' << c.m_bound << '\n';
  auto ps = detail::open_out(dir / "plot_lhs_rhs.csv");
  ps << "x,y\n";
  for (const auto& t : rep.trials) ps << detail::fmt(t.rhs) << ',' << detail::fmt(t.lhs) << '\n';
}

inline void write_concentration_outputs(const std::filesystem::path& dir, const ConcentrationReport& rep)
{
  std::filesystem::create_directories(dir);
  auto os = detail::open_out(dir / "summary.csv");
  os << "label,ensemble,shape,m,dim,epsilon,draws,successes,empirical,wilson_lo,bound,passed\n";
  for (const auto& p : rep.points)
    os << p.label << ',' << bounds::to_string(p.ensemble) << ',' << p.shape << ',' << p.m << ',' << p.dim << ','
       << detail::fmt(p.epsilon) << ',' << p.draws << ',' << p.successes << ','
       << detail::fmt(static_cast<double>(p.successes) / static_cast<double>(p.draws)) << ','
       << detail::fmt(p.wilson.lo) << ',' << detail::fmt(p.bound) << ',' << (p.passed ? 1 : 0) << '\n';
  os << "rademacher_e1_mean," << detail::fmt(rep.rademacher_e1_mean) << '\n';
}

inline void write_ecg_outputs(const std::filesystem::path& dir, const EcgReport& rep)
{
  std::filesystem::create_directories(dir);
  auto os = detail::open_out(dir / "summary.csv");
  os << "key,value\n"
     << "snr_pnp_db," << detail::fmt(rep.snr_pnp) << '\n'
     << "snr_lasso_db," << detail::fmt(rep.snr_lasso) << '\n'
     << "snr_surrogate_db," << detail::fmt(rep.snr_surrogate) << '\n'
     << "smoke_snr_db," << detail::fmt(rep.smoke_snr) << '\n'
     << "lasso_lambda," << detail::fmt(rep.lasso_lambda) << '\n'
     << "cosamp_sparsity," << rep.cosamp_sparsity << '\n'
     << "rank," << rep.rank << '\n'
     << "m," << rep.m << '\n'
     << "eta_norm," << detail::fmt(rep.eta_norm) << '\n'
     << "delta," << detail::fmt(rep.delta) << '\n'
     << "status," << pnpcs::to_string(rep.status) << '\n';
  auto rs = detail::open_out(dir / "reconstruction.csv");
  rs << "i,xi,pnp,lasso,surrogate\n";
  for (Index i = 0; i < rep.xi.size(); ++i)
    rs << i << ',' << detail::fmt(rep.xi[i]) << ',' << detail::fmt(rep.x_pnp[i]) << ',' << detail::fmt(rep.x_lasso[i])
       << ',' << detail::fmt(rep.surrogate[i]) << '\n';
}

/// Manifest: the resolved configuration plus the library version. Loadable as a config.
inline void write_manifest(const std::filesystem::path& dir, const CampaignConfig& cfg)
{
  std::filesystem::create_directories(dir);
  KeyValueConfig kv = cfg.to_config();
  kv.set("version", version);
  auto os = detail::open_out(dir / "manifest.cfg");
  os << "# eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n';
  os << kv.dump();
}

} // namespace pnpcs::experiments

#endif // PNPCS_EXPERIMENTS_HPP
