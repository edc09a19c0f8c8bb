#ifndef PNPCS_TOOLS_CLI_APP_HPP
#define PNPCS_TOOLS_CLI_APP_HPP

#include "pnpcs/denoiser_io.hpp"
#include "pnpcs/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace pnpcs::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, config_error = 2, infeasible = 3, solver_failure = 4 };

class InfeasibleError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline std::string fmt(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_kv_manifest(const fs::path& dir, const std::string& command, const KeyValueConfig& kv)
{
  fs::create_directories(dir);
  std::ofstream os(dir / "manifest.cfg", std::ios::binary);
  if (!os) throw ConfigError("cannot write " + (dir / "manifest.cfg").string());
  os << "# " << experiments::version << " " << command << '\n' << kv.dump();
}

inline KeyValueConfig load_campaign_config(const std::string& path, const std::vector<std::string>& sets,
                                           const std::string& forced_kind = {})
{
  KeyValueConfig kv = path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
  if (!forced_kind.empty()) {
    if (kv.has("kind") && kv.get_string("kind", "") != forced_kind)
      throw ConfigError("config kind '" + kv.get_string("kind", "") + "' does not match subcommand " + forced_kind);
    kv.set("kind", forced_kind);
  }
  for (const auto& s : sets) kv.apply_override(s);
  return kv;
}

inline Vector guide_signal(const std::string& guide, Index n, bool resample)
{
  experiments::CampaignConfig c;
  c.n = n;
  c.guide = guide;
  c.resample = resample;
  return experiments::load_guide(c);
}

} // namespace detail

/// Runs a campaign and writes all of its outputs plus manifest.cfg into cfg.output.
/// Returns a short human-readable summary.
inline std::string run_campaign(const experiments::CampaignConfig& cfg)
{
  using namespace experiments;
  const fs::path dir(cfg.output);
  std::ostringstream msg;
  switch (cfg.kind) {
  case ExperimentKind::phase_gaussian:
  case ExperimentKind::exact_rademacher:
  case ExperimentKind::structured: {
    const PhaseResult res = cfg.kind == ExperimentKind::phase_gaussian     ? run_phase_gaussian(cfg)
                            : cfg.kind == ExperimentKind::exact_rademacher ? run_exact_rademacher(cfg)
                                                                           : run_structured(cfg);
    write_phase_outputs(dir, res);
    for (const auto& t : res.thresholds)
      msg << "r=" << t.r << " m_p90=" << (t.m_empirical ? std::to_string(*t.m_empirical) : "none")
          << " m_bound=" << t.m_theoretical << '\n';
    break;
  }
  case ExperimentKind::robust: {
    const RobustReport rep = run_robust(cfg);
    write_robust_outputs(dir, rep);
    for (const auto& c : rep.cells)
      msg << "r=" << c.r << " m=" << c.m << " satisfied=" << c.satisfied << '/' << c.trials
          << " wilson_lo=" << detail::fmt(c.wilson.lo) << " lhs_rhs_ratio=" << detail::fmt(c.ratio_of_means) << '\n';
    break;
  }
  case ExperimentKind::concentration: {
    const ConcentrationReport rep = run_concentration(cfg);
    write_concentration_outputs(dir, rep);
    for (const auto& p : rep.points)
      msg << p.label << " empirical=" << p.successes << '/' << p.draws << " bound=" << detail::fmt(p.bound)
          << (p.passed ? " ok" : " below-bound") << '\n';
    break;
  }
  case ExperimentKind::ecg: {
    const EcgReport rep = run_ecg(cfg);
    write_ecg_outputs(dir, rep);
    msg << "snr_pnp_db=" << detail::fmt(rep.snr_pnp) << " snr_lasso_db=" << detail::fmt(rep.snr_lasso)
        << " smoke_snr_db=" << detail::fmt(rep.smoke_snr) << '\n';
    break;
  }
  }
  write_manifest(dir, cfg);
  return msg.str();
}

/// Entry point shared by the executable and the tests. Errors are reported as
/// a single `error <kind>: <message>` line on `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Plug-and-play compressed sensing with linear denoisers", "pnpcs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", experiments::version);

  // bounds
  auto* bounds_cmd = app.add_subcommand("bounds", "Sample-complexity bounds for subgaussian ensembles");
  std::string b_ensemble = "rademacher", b_kind = "exact", b_out;
  std::vector<long> b_r{50};
  double b_beta = 0.1, b_eps = 0.8;
  double b_n = 0.0;
  bool b_plain = false, b_affine = false;
  bounds_cmd->add_option("--ensemble", b_ensemble, "gaussian | rademacher")->capture_default_str();
  bounds_cmd->add_option("--kind", b_kind, "exact | robust")->capture_default_str()->check(CLI::IsMember({"exact", "robust"}));
  bounds_cmd->add_option("--r", b_r, "one or more ranks")->capture_default_str();
  bounds_cmd->add_option("--beta", b_beta, "failure probability")->capture_default_str();
  bounds_cmd->add_option("--epsilon", b_eps, "distortion (robust kind)")->capture_default_str();
  bounds_cmd->add_flag("--affine", b_affine, "print intercept and slope of the robust bound in r");
  bounds_cmd->add_option("--thresholds", b_n, "print beta0, epsilon0 for this n");
  bounds_cmd->add_flag("--plain", b_plain, "bare values instead of CSV");
  bounds_cmd->add_option("--output", b_out, "directory for manifest.cfg");

  // denoiser
  auto* den_cmd = app.add_subcommand("denoiser", "Build a DSG-NLM denoiser from a guide signal");
  std::string d_guide = "synthetic", d_out;
  Index d_n = 128, d_rank = 0;
  long long d_search = -1;
  GuideKernelConfig d_kernel;
  d_kernel.h = 0.1;
  bool d_resample = false;
  den_cmd->add_option("--guide", d_guide, "synthetic | spike_train | CSV path")->capture_default_str();
  den_cmd->add_option("--n", d_n, "signal length")->capture_default_str();
  den_cmd->add_option("--patch-radius", d_kernel.patch_radius)->capture_default_str();
  den_cmd->add_option("--search-radius", d_search, "-1 for the full window")->capture_default_str();
  den_cmd->add_option("--bandwidth", d_kernel.h, "kernel bandwidth h")->capture_default_str();
  den_cmd->add_option("--rank", d_rank, "truncate to this rank (0 keeps all)")->capture_default_str();
  den_cmd->add_flag("--resample", d_resample, "interpolate a guide of the wrong length");
  den_cmd->add_option("--output", d_out, "output directory (denoiser.pnpw, manifest.cfg)")->required();

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Recover one signal from synthetic measurements");
  std::string s_den, s_sensing = "gaussian", s_transform = "walsh_hadamard", s_solver = "direct", s_out, s_signal;
  Index s_m = 0;
  std::uint64_t s_seed = 1;
  double s_noise = 0.0, s_delta_factor = 0.0;
  int s_iters = 2000;
  solve_cmd->add_option("--denoiser", s_den, "denoiser file")->required();
  solve_cmd->add_option("--signal", s_signal, "CSV truth; default is W applied to the scan line");
  solve_cmd->add_option("--sensing", s_sensing, "gaussian | rademacher | structured")->capture_default_str();
  solve_cmd->add_option("--transform", s_transform, "walsh_hadamard | dft")->capture_default_str();
  solve_cmd->add_option("--m", s_m, "measurements")->required();
  solve_cmd->add_option("--seed", s_seed)->capture_default_str();
  solve_cmd->add_option("--noise-std", s_noise)->capture_default_str();
  solve_cmd->add_option("--delta-factor", s_delta_factor, "delta = factor * ||eta||; 0 solves the exact program")
      ->capture_default_str();
  solve_cmd->add_option("--solver", s_solver, "direct | admm")->capture_default_str()->check(CLI::IsMember({"direct", "admm"}));
  solve_cmd->add_option("--admm-iters", s_iters)->capture_default_str();
  solve_cmd->add_option("--output", s_out, "output directory")->required();

  // campaign / concentration / ecg
  std::string c_config, c_out;
  std::vector<std::string> c_sets;
  int c_threads = -1;
  auto add_campaign_opts = [&](CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", c_config, "key = value config file");
    if (config_required) opt->required();
    cmd->add_option("--set", c_sets, "override key=value (repeatable)");
    cmd->add_option("--output", c_out, "output directory (overrides config)");
    cmd->add_option("--threads", c_threads, "worker threads (0 = all cores)");
  };
  auto* camp_cmd = app.add_subcommand("campaign", "Run a Monte Carlo campaign from a config");
  add_campaign_opts(camp_cmd, true);
  auto* conc_cmd = app.add_subcommand("concentration", "Concentration-of-measure checks");
  add_campaign_opts(conc_cmd, false);
  auto* ecg_cmd = app.add_subcommand("ecg", "CoSaMP surrogate + DSG-NLM + robust recovery vs LASSO");
  add_campaign_opts(ecg_cmd, false);
  std::string e_signal;
  ecg_cmd->add_option("--signal", e_signal, "CSV signal (sets guide)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error config: " << e.what() << '\n';
    return config_error;
  }

  try {
    if (*bounds_cmd) {
      const bool b_csv = !b_plain;
      const auto ens = bounds::parse_ensemble(b_ensemble);
      KeyValueConfig kv;
      kv.set("ensemble", b_ensemble);
      kv.set("kind", b_kind);
      kv.set("beta", detail::fmt(b_beta));
      if (b_affine) {
        const auto a = bounds::m_robust_affine(ens, b_beta, b_eps);
        kv.set("epsilon", detail::fmt(b_eps));
        if (b_csv) out << "ensemble,beta,epsilon,intercept,slope\n" << b_ensemble << ',' << detail::fmt(b_beta) << ','
                       << detail::fmt(b_eps) << ',';
        char buf[96];
        std::snprintf(buf, sizeof buf, b_csv ? "%.6f,%.6f\n" : "%.2f %.2f\n", a.intercept, a.slope);
        out << buf;
      } else if (b_n > 0.0) {
        out << (b_csv ? "ensemble,r,n,beta0,epsilon0\n" : "");
        for (long r : b_r) {
          const auto t = bounds::sample_thresholds(ens, r, b_n);
          if (!t) throw ConfigError("n = " + detail::fmt(b_n) + " is not above L(1,1) for r = " + std::to_string(r));
          if (b_csv) out << b_ensemble << ',' << r << ',' << detail::fmt(b_n) << ',';
          out << detail::fmt(t->beta0) << (b_csv ? "," : " ") << detail::fmt(t->epsilon0) << '\n';
        }
        kv.set("thresholds_n", detail::fmt(b_n));
      } else {
        if (b_csv) out << "ensemble,r,beta,epsilon,m_bound\n";
        for (long r : b_r) {
          bounds::BoundSpec bound{ens, r, b_beta, b_eps, std::nullopt};
          const long m = b_kind == "exact" ? bounds::m_exact_bound(bound) : bounds::m_robust_bound(bound);
          if (b_csv)
            out << b_ensemble << ',' << r << ',' << detail::fmt(b_beta) << ','
                << (b_kind == "exact" ? std::string("0.99") : detail::fmt(b_eps)) << ',' << m << '\n';
          else
            out << m << '\n';
        }
        if (b_kind == "robust") kv.set("epsilon", detail::fmt(b_eps));
      }
      std::string rs;
      for (std::size_t i = 0; i < b_r.size(); ++i) rs += (i ? "," : "") + std::to_string(b_r[i]);
      kv.set("r", rs);
      if (!b_out.empty()) detail::write_kv_manifest(b_out, "bounds", kv);
      return ok;
    }

    if (*den_cmd) {
      require(d_n >= 2, "denoiser: n must be >= 2");
      d_kernel.search_radius = d_search < 0 ? d_n - 1 : static_cast<Index>(d_search);
      const Vector guide = detail::guide_signal(d_guide, d_n, d_resample);
      LinearDenoiser den = build_dsg_nlm(guide, d_kernel);
      if (d_rank > 0) den = truncate_rank(den, d_rank);
      fs::create_directories(d_out);
      save_denoiser((fs::path(d_out) / "denoiser.pnpw").string(), den);
      KeyValueConfig kv;
      kv.set("guide", d_guide);
      kv.set("n", std::to_string(d_n));
      kv.set("patch_radius", std::to_string(d_kernel.patch_radius));
      kv.set("search_radius", std::to_string(d_kernel.search_radius));
      kv.set("h", detail::fmt(d_kernel.h));
      kv.set("rank", std::to_string(d_rank));
      kv.set("resample", d_resample ? "true" : "false");
      detail::write_kv_manifest(d_out, "denoiser", kv);
      out << denoiser_summary(den);
      return ok;
    }

    if (*solve_cmd) {
      const LinearDenoiser den = load_denoiser(s_den);
      const SensingKind kind = parse_sensing_kind(s_sensing);
      const auto op = make_operator(kind, s_m, den.n(), s_seed, parse_transform(s_transform));
      const Vector xi = s_signal.empty() ? den.apply(signals::scan_line(den.n())) : detail::guide_signal(s_signal, den.n(), false);
      auto eng = make_engine(mix64(s_seed ^ 0x6e6f697365ULL));
      std::normal_distribution<double> noise(0.0, s_noise);
      Vector eta(op.rows());
      for (Index i = 0; i < eta.size(); ++i) eta[i] = s_noise > 0.0 ? noise(eng) : 0.0;
      const Vector b = op.apply(xi) + eta;
      const double delta = s_delta_factor * eta.norm();
      RecoverySolution sol;
      if (s_solver == "admm") {
        AdmmOptions opt;
        opt.iters = s_iters;
        opt.tol = 1e-10;
        sol = solve_robust_admm(op, b, delta, den, opt);
      } else {
        sol = delta > 0.0 ? solve_robust_direct(op, b, delta, den) : solve_exact(op, b, den);
      }
      KeyValueConfig kv;
      kv.set("denoiser", s_den);
      kv.set("signal", s_signal.empty() ? "W*scan_line" : s_signal);
      kv.set("sensing", s_sensing);
      kv.set("transform", s_transform);
      kv.set("m", std::to_string(s_m));
      kv.set("seed", std::to_string(s_seed));
      kv.set("noise_std", detail::fmt(s_noise));
      kv.set("delta_factor", detail::fmt(s_delta_factor));
      kv.set("solver", s_solver);
      kv.set("admm_iters", std::to_string(s_iters));
      detail::write_kv_manifest(s_out, "solve", kv);
      {
        std::ofstream os(fs::path(s_out) / "solution.csv", std::ios::binary);
        os << "i,truth,estimate\n";
        for (Index i = 0; i < xi.size(); ++i) os << i << ',' << detail::fmt(xi[i]) << ',' << detail::fmt(sol.x_star[i]) << '\n';
      }
      {
        nlohmann::ordered_json j;
        j["status"] = to_string(sol.status);
        j["residual"] = sol.residual;
        j["objective"] = sol.objective;
        j["multiplier"] = std::isfinite(sol.multiplier) ? nlohmann::ordered_json(sol.multiplier) : nlohmann::ordered_json("inf");
        j["iterations"] = sol.iterations;
        j["feasibility_gap"] = sol.feasibility_gap;
        j["relative_error"] = relative_error(sol.x_star, xi);
        std::ofstream os(fs::path(s_out) / "solution.json", std::ios::binary);
        os << j.dump(2) << '\n';
      }
      if (sol.status == SolveStatus::infeasible) throw InfeasibleError("no point of R(W) satisfies the data constraint");
      if (sol.status != SolveStatus::optimal) throw SolverError(std::string("solver stopped with status ") + to_string(sol.status));
      out << "status=" << to_string(sol.status) << " rel_err=" << detail::fmt(relative_error(sol.x_star, xi))
          << " residual=" << detail::fmt(sol.residual) << " multiplier="
          << (std::isfinite(sol.multiplier) ? detail::fmt(sol.multiplier) : std::string("inf")) << '\n';
      return ok;
    }

    std::string forced;
    if (*conc_cmd) forced = "concentration";
    if (*ecg_cmd) forced = "ecg";
    KeyValueConfig kv = detail::load_campaign_config(c_config, c_sets, forced);
    if (*ecg_cmd && !e_signal.empty()) kv.set("guide", e_signal);
    if (!c_out.empty()) kv.set("output", c_out);
    if (c_threads >= 0) kv.set("threads", std::to_string(c_threads));
    const auto cfg = experiments::CampaignConfig::from_config(kv);
    out << run_campaign(cfg);
    return ok;
  } catch (const ConfigError& e) {
    err << "error config: " << e.what() << '\n';
    return config_error;
  } catch (const InfeasibleError& e) {
    err << "error infeasible: " << e.what() << '\n';
    return infeasible;
  } catch (const std::exception& e) {
    err << "error solver: " << e.what() << '\n';
    return solver_failure;
  }
}

} // namespace pnpcs::cli

#endif // PNPCS_TOOLS_CLI_APP_HPP
