#include "cli_app.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args)
{
  args.insert(args.begin(), "pnpcs");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = pnpcs::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
  const fs::path p = fs::temp_directory_path() / ("pnpcs_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p)
{
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

} // namespace

TEST(Cli, HelpAndVersionExitZero)
{
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"bounds", "--help"}).code, 0);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("pnpcs"), std::string::npos);
}

TEST(Cli, ParseErrorsExitTwo)
{
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"bounds", "--no-such-flag"}, {"bounds", "--kind", "loose"}, {"solve", "--m", "3"}, {"frobnicate"}}) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error config:", 0), 0u) << r.err;
  }
}

TEST(Cli, ExactBoundsCsv)
{
  const auto r = run({"bounds", "--ensemble", "rademacher", "--kind", "exact", "--r", "50", "100", "150", "200"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "ensemble,r,beta,epsilon,m_bound\n"
                   "rademacher,50,0.1,0.99,3113\n"
                   "rademacher,100,0.1,0.99,6153\n"
                   "rademacher,150,0.1,0.99,9192\n"
                   "rademacher,200,0.1,0.99,12232\n");
}

TEST(Cli, SingleRankBound)
{
  EXPECT_EQ(run({"bounds", "--ensemble", "rademacher", "--beta", "0.1", "--r", "50", "--plain"}).out, "3113\n");
  EXPECT_NE(run({"bounds", "--ensemble", "rademacher", "--beta", "0.1", "--r", "50"}).out.find(",3113\n"), std::string::npos);
}

TEST(Cli, RobustBoundsAndAffineForm)
{
  const auto r = run({"bounds", "--kind", "robust", "--epsilon", "0.8", "--r", "50", "200", "--plain"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "4742\n18590\n");
  const auto a = run({"bounds", "--affine", "--epsilon", "0.8", "--plain"});
  EXPECT_EQ(a.out, "125.76 92.32\n");
  const auto bad = run({"bounds", "--kind", "robust", "--epsilon", "1.5"});
  EXPECT_EQ(bad.code, 2);
}

TEST(Cli, ThresholdsOutput)
{
  const auto r = run({"bounds", "--thresholds", "1000", "--r", "10", "--plain"});
  ASSERT_EQ(r.code, 0) << r.err;
  double beta0 = 0, eps0 = 0;
  std::istringstream(r.out) >> beta0 >> eps0;
  EXPECT_GT(beta0, 0.0);
  EXPECT_LT(beta0, 1.0);
  EXPECT_GT(eps0, 0.0);
  EXPECT_LT(eps0, 1.0);
  EXPECT_EQ(run({"bounds", "--thresholds", "10", "--r", "10"}).code, 2);
}

TEST(Cli, DenoiserAndSolveRoundTrip)
{
  const auto dir = scratch("solve");
  const auto den = run({"denoiser", "--n", "64", "--rank", "8", "--output", (dir / "den").string()});
  ASSERT_EQ(den.code, 0) << den.err;
  ASSERT_TRUE(fs::exists(dir / "den" / "denoiser.pnpw"));
  ASSERT_TRUE(fs::exists(dir / "den" / "manifest.cfg"));

  const auto ok = run({"solve", "--denoiser", (dir / "den" / "denoiser.pnpw").string(), "--m", "16", "--output",
                       (dir / "ok").string()});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(ok.out.rfind("status=optimal", 0), 0u);
  const auto j = nlohmann::json::parse(slurp(dir / "ok" / "solution.json"));
  EXPECT_EQ(j["status"], "optimal");
  EXPECT_LT(j["relative_error"].get<double>(), 1e-8);

  const auto noisy = run({"solve", "--denoiser", (dir / "den" / "denoiser.pnpw").string(), "--m", "32",
                          "--noise-std", "0.01", "--delta-factor", "1.2", "--solver", "admm", "--admm-iters", "20000", "--output",
                          (dir / "noisy").string()});
  EXPECT_EQ(noisy.code, 0) << noisy.err;
  fs::remove_all(dir);
}

TEST(Cli, InconsistentDataExitsThree)
{
  const auto dir = scratch("infeasible");
  ASSERT_EQ(run({"denoiser", "--n", "32", "--rank", "3", "--output", dir.string()}).code, 0);
  {
    std::ofstream os(dir / "truth.csv");
    for (int i = 0; i < 32; ++i) os << ((i * 7919) % 13) / 13.0 << '\n';
  }
  const auto r = run({"solve", "--denoiser", (dir / "denoiser.pnpw").string(), "--signal", (dir / "truth.csv").string(),
                      "--m", "12", "--output", (dir / "out").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.err.rfind("error infeasible:", 0), 0u) << r.err;
  EXPECT_EQ(run({"solve", "--denoiser", (dir / "nope.pnpw").string(), "--m", "4", "--output", dir.string()}).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, CampaignRerunFromManifestIsIdentical)
{
  const auto dir = scratch("campaign");
  {
    std::ofstream os(dir / "c.cfg");
    os << "kind = phase_gaussian\nn = 32\nr = 4\nm = 2:6\ntrials = 5\nseed = 11\n";
  }
  const auto first = run({"campaign", "--config", (dir / "c.cfg").string(), "--output", (dir / "a").string()});
  ASSERT_EQ(first.code, 0) << first.err;
  const auto second = run({"campaign", "--config", (dir / "a" / "manifest.cfg").string(), "--output",
                           (dir / "b").string(), "--threads", "2"});
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(first.out, second.out);
  for (const char* f : {"summary.csv", "thresholds.csv", "plot_r4.csv"}) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  EXPECT_EQ(run({"campaign", "--config", (dir / "c.cfg").string(), "--set", "bogus=1"}).code, 2);
  EXPECT_EQ(run({"campaign", "--config", (dir / "missing.cfg").string()}).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, ConcentrationSubcommandForcesKind)
{
  const auto dir = scratch("conc");
  const auto r = run({"concentration", "--set", "trials=50", "--output", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
  EXPECT_NE(slurp(dir / "manifest.cfg").find("kind = concentration"), std::string::npos);
  fs::remove_all(dir);
}
