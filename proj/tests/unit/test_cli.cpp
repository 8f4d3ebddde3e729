#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "calps/csv.hpp"
#include "cli.hpp"
#include "json.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = calps::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("calps_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
  }

  std::string random_csv(int n, int p, std::uint64_t seed) {
    const auto in = oracle::random_instance(n, p, seed);
    std::string s = "T,Y";
    for (int j = 1; j <= p; ++j) s += ",x" + std::to_string(j);
    s += "\n";
    for (int i = 0; i < n; ++i) {
      s += calps::format_double(in.t[i]) + "," + calps::format_double(in.f(i, 1) + in.t[i]);
      for (int j = 1; j <= p; ++j) s += "," + calps::format_double(in.f(i, j));
      s += "\n";
    }
    return write("data.csv", s);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, InterceptOnlyFitOnTwoRows) {
  const auto data = write("two.csv", "T\n1\n0\n");
  const CliRun r = run({"fit", "-i", data});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["coefficients"]["(Intercept)"].get<double>(), 0.0);
  EXPECT_EQ(j["status"], "Converged");
}

TEST_F(CliTest, LambdaAtThresholdGivesZeroSlopes) {
  const auto data = random_csv(120, 5, 3);
  const CliRun first = run({"fit", "-i", data, "--outcome", "Y"});
  ASSERT_EQ(first.code, 0) << first.err;
  const double l0 = json::parse(first.out)["lambda_max"].get<double>();
  const CliRun at = run({"fit", "-i", data, "--outcome", "Y", "--lambda", calps::format_double(l0)});
  ASSERT_EQ(at.code, 0) << at.err;
  const json j = json::parse(at.out);
  for (auto it = j["coefficients"].begin(); it != j["coefficients"].end(); ++it) {
    if (it.key() != "(Intercept)") EXPECT_EQ(it.value().get<double>(), 0.0) << it.key();
  }
  EXPECT_EQ(j["nonzero_count"], 0);
}

TEST_F(CliTest, MissingTreatmentColumnIsNamed) {
  const auto data = write("d.csv", "A,x\n1,2\n0,3\n");
  const CliRun r = run({"fit", "-i", data, "--treatment", "treat"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("treat"), std::string::npos);
  EXPECT_EQ(r.err.rfind("error: UnknownColumn:", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliTest, SeparationExitsWithTwo) {
  const auto data = write("sep.csv", "T,x\n1,1\n0,-1\n");
  const CliRun r = run({"fit", "-i", data, "--no-standardize"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.out)["status"], "Separation");
}

TEST_F(CliTest, UnknownOptionAndConfigKeyRejected) {
  const auto data = write("two.csv", "T\n1\n0\n");
  EXPECT_EQ(run({"fit", "-i", data, "--bogus"}).code, 1);
  const auto cfg = write("bad.toml", "[fit]\nloss = \"cal1\"\nbogus = 3\n");
  const CliRun r = run({"--config", cfg, "fit", "-i", data});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: InvalidArgument:", 0), 0u) << r.err;
  const auto good = write("good.toml", "[fit]\nloss = \"ml\"\n");
  const CliRun ok = run({"--config", good, "fit", "-i", data});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(json::parse(ok.out)["loss"], "ml");
}

TEST_F(CliTest, PropensityFileRoundTripIsExact) {
  const auto data = random_csv(150, 4, 5);
  const std::string pi = (dir_ / "pi.csv").string();
  const CliRun fit = run({"fit", "-i", data, "--outcome", "Y", "--pi-output", pi});
  ASSERT_EQ(fit.code, 0) << fit.err;
  const CliRun direct = run({"diagnose", "-i", data, "--outcome", "Y"});
  const CliRun via_file = run({"diagnose", "-i", data, "--outcome", "Y", "--pi", pi});
  ASSERT_EQ(direct.code, 0) << direct.err;
  ASSERT_EQ(via_file.code, 0) << via_file.err;
  const json a = json::parse(direct.out);
  const json b = json::parse(via_file.out);
  EXPECT_EQ(a["columns"].size(), b["columns"].size());
  for (std::size_t k = 0; k < a["columns"].size(); ++k) {
    EXPECT_EQ(a["columns"][k]["cal_treated"], b["columns"][k]["cal_treated"]);
    EXPECT_EQ(a["columns"][k]["cal_untreated"], b["columns"][k]["cal_untreated"]);
  }
  EXPECT_EQ(a["relvar_treated"], b["relvar_treated"]);
  EXPECT_LE(a["max_abs_cal_treated"].get<double>(), 1e-8);

  const CliRun e1 = run({"estimate", "-i", data, "--outcome", "Y", "--pi-treated", pi});
  ASSERT_EQ(e1.code, 0) << e1.err;
  const json est = json::parse(e1.out);
  EXPECT_NEAR(est["mu1_ipw"].get<double>(), est["mu1_ripw"].get<double>(), 1e-10);
}

TEST_F(CliTest, DiagnoseRegularizedFitBindsAtLambda) {
  const auto data = random_csv(200, 6, 6);
  const CliRun first = run({"fit", "-i", data, "--outcome", "Y"});
  const double lambda = json::parse(first.out)["lambda_max"].get<double>() / 3.0;
  const CliRun r = run({"diagnose", "-i", data, "--outcome", "Y", "--lambda", calps::format_double(lambda)});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(json::parse(r.out)["max_abs_cal_treated"].get<double>(), lambda, 1e-6);
}

TEST_F(CliTest, EstimateAndCvRun) {
  const auto data = random_csv(200, 4, 7);
  const CliRun cv = run({"cv", "-i", data, "--outcome", "Y", "--loss", "cal1", "--seed", "4"});
  ASSERT_EQ(cv.code, 0) << cv.err;
  const json c = json::parse(cv.out);
  EXPECT_EQ(c["cv"]["lambdas"].size(), 11u);
  const CliRun est = run({"estimate", "-i", data, "--outcome", "Y"});
  ASSERT_EQ(est.code, 0) << est.err;
  const json e = json::parse(est.out);
  EXPECT_TRUE(e.contains("att"));
  EXPECT_TRUE(e["fits"].contains("treated"));
  EXPECT_TRUE(e["fits"].contains("untreated"));
  EXPECT_EQ(run({"estimate", "-i", data}).code, 1);
}

TEST_F(CliTest, SimulateIsByteIdentical) {
  const std::vector<std::string> base = {"simulate", "--n", "200", "--reps", "2", "--estimators", "True,Const"};
  auto a = base;
  a.insert(a.end(), {"--output-dir", (dir_ / "a").string()});
  auto b = base;
  b.insert(b.end(), {"--output-dir", (dir_ / "b").string(), "--threads", "2"});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "aggregate.csv"), slurp(dir_ / "b" / "aggregate.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "replicates.csv"), slurp(dir_ / "b" / "replicates.csv"));
  const std::string rep = slurp(dir_ / "a" / "replicates.csv");
  EXPECT_EQ(std::count(rep.begin(), rep.end(), '\n'), 5);
  const json m = json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(m["replicate_seeds"].size(), 2u);
  const CliRun stdout_run = run(base);
  EXPECT_EQ(stdout_run.out, slurp(dir_ / "a" / "aggregate.csv"));
}

TEST_F(CliTest, LimitingFitOrdering) {
  const CliRun r = run({"limiting-fit"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["fits"].size(), 3u);
  double ml = 0, cal = 0, bal = 0;
  for (const auto& f : j["fits"]) {
    if (f["loss"] == "ml") ml = f["msre"];
    if (f["loss"] == "cal1") cal = f["msre"];
    if (f["loss"] == "bal") bal = f["msre"];
  }
  EXPECT_LT(cal, bal);
  EXPECT_LT(bal, ml);
}

TEST_F(CliTest, HelpAndVersion) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"--version"}).code, 0);
  EXPECT_EQ(run({}).code, 1);
}
