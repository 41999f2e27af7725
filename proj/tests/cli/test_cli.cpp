#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "ffino/datagen/dataset.hpp"
#include "ffino/datagen/relperm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string output;
};

CliResult cli(const std::string& args) {
  const std::string cmd = std::string(FFINO_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, "popen failed"};
  std::string out;
  char buf[4096];
  while (std::size_t k = std::fread(buf, 1, sizeof buf, p)) out.append(buf, k);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("ffino_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    json cfg = {{"model",
                 {{"width", 4}, {"modes_r", 4}, {"modes_z", 3}, {"projection_width", 8},
                  {"branch_hidden", {8}}, {"trunk_hidden", {8}}, {"unet_depth", 1}}},
                {"train", {{"batch_samples", 2}, {"batch_times", 4}}}};
    spit(dir / "tiny.json", cfg.dump());
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  void make_data(const std::string& name, std::size_t n, std::size_t seed = 7) {
    const auto r = cli("gen-data --n " + std::to_string(n) + " --seed " + std::to_string(seed) +
                         " --grid-nr 24 --grid-nz 16 --out " + p(name));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  CliResult train(const std::string& data, const std::string& out, const std::string& extra = "") {
    return cli("train --config " + p("tiny.json") + " --data " + p(data) + " --out " + p(out) + " --epochs 1 --seed 3 " + extra);
  }
};

}  // namespace

TEST_F(Cli, GenDataIsByteIdenticalAcrossRuns) {
  make_data("a.fds", 8);
  make_data("b.fds", 8);
  EXPECT_EQ(slurp(dir / "a.fds"), slurp(dir / "b.fds"));
  const auto r = cli("gen-data --n 8 --seed 7 --grid-nr 24 --grid-nz 16 --threads 3 --out " + p("c.fds"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(slurp(dir / "a.fds"), slurp(dir / "c.fds"));
  EXPECT_NE(r.output.find("kh"), std::string::npos);
  const auto man = json::parse(slurp(dir / "a.fds.manifest.json"));
  EXPECT_EQ(man.at("subcommand"), "gen-data");
  EXPECT_EQ(man.at("seeds").at("seed"), 7);
  EXPECT_EQ(man.at("outputs").at(0).at("sha256").get<std::string>().size(), 64u);
}

TEST_F(Cli, SeedFallsBackToEnvironment) {
  make_data("a.fds", 3, 12);
  const auto r = cli("gen-data --n 3 --grid-nr 24 --grid-nz 16 --out " + p("b.fds"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(slurp(dir / "a.fds"), slurp(dir / "b.fds"));
  const auto e = std::system(("FFINO_SEED=12 " + std::string(FFINO_CLI_PATH) + " gen-data --n 3 --grid-nr 24 --grid-nz 16 --out " +
                              p("c.fds") + " > /dev/null").c_str());
  ASSERT_EQ(e, 0);
  EXPECT_EQ(slurp(dir / "a.fds"), slurp(dir / "c.fds"));
}

TEST_F(Cli, GenDataZeroSamplesIsConfigError) {
  const auto r = cli("gen-data --n 0 --out " + p("z.fds"));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_FALSE(fs::exists(dir / "z.fds"));
}

TEST_F(Cli, ParseErrorsAreConfigErrors) {
  EXPECT_EQ(cli("gen-data --out " + p("x.fds")).code, 2);
  EXPECT_EQ(cli("no-such-command").code, 2);
  EXPECT_EQ(cli("").code, 2);
}

TEST_F(Cli, MissingInputIsIoError) {
  const auto r = cli("eval --oracle --data " + p("missing.fds") + " --out-dir " + p("ev"));
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_EQ(cli("gen-data --n 2 --out /nonexistent_dir/x.fds").code, 3);
}

TEST_F(Cli, FitRelpermRecoversCaseA) {
  const auto c = ffino::reference_relperm_case('a');
  std::string csv = "Sw,krw,krg\n";
  for (const auto& pt : ffino::mbc_curve(c, 50)) {
    char line[128];
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", pt.sw, pt.krw, pt.krg);
    csv += line;
  }
  spit(dir / "a.csv", csv);
  const auto r = cli("fit-relperm --points " + p("a.csv") + " --out " + p("a.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto got = json::parse(slurp(dir / "a.json")).at("coeffs").get<ffino::RelPermCoeffs>();
  EXPECT_NEAR(got.krw_max, c.krw_max, 0.02 * c.krw_max);
  EXPECT_NEAR(got.krg_max, c.krg_max, 0.02 * c.krg_max);
  EXPECT_NEAR(got.swi, c.swi, 0.02 * c.swi);
  EXPECT_NEAR(got.sgr, c.sgr, 0.02 * c.sgr);
  EXPECT_NEAR(got.m, c.m, 0.02 * c.m);
  EXPECT_NEAR(got.n, c.n, 0.02 * c.n);

  // the fitted JSON feeds gen-data as a fixed-coefficient override
  const auto g = cli("gen-data --n 2 --seed 1 --grid-nr 24 --grid-nz 16 --coeffs " + p("a.json") + " --out " + p("f.fds"));
  ASSERT_EQ(g.code, 0) << g.output;
  const auto ds = ffino::read_dataset(p("f.fds"));
  ASSERT_TRUE(ds.fixed_coeffs.has_value());
  for (const auto& s : ds.samples) EXPECT_EQ(s.coeffs.m, got.m);
}

TEST_F(Cli, FitRelpermRejectsBadCsv) {
  spit(dir / "empty.csv", "");
  auto r = cli("fit-relperm --points " + p("empty.csv") + " --out " + p("o.json"));
  EXPECT_EQ(r.code, 2) << r.output;

  spit(dir / "bad.csv", "Sw,krw,krg\n0.3,0.0,0.5\n0.4,abc,0.3\n");
  r = cli("fit-relperm --points " + p("bad.csv") + " --out " + p("o.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find(":3:"), std::string::npos) << r.output;

  spit(dir / "short.csv", "0.3,0.0,0.5\n0.4,0.1\n");
  r = cli("fit-relperm --points " + p("short.csv") + " --out " + p("o.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find(":2:"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(dir / "o.json"));
}

TEST_F(Cli, TrainWritesArtifactsAndIsDeterministic) {
  make_data("d.fds", 4);
  auto r = train("d.fds", "a.fck", "--n-train 4");
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"a.fck", "a.fck.loss.csv", "a.fck.manifest.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_NE(r.output.find("trainable parameters"), std::string::npos);
  EXPECT_NE(r.output.find("peak RSS"), std::string::npos);
  r = train("d.fds", "b.fck", "--n-train 4");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(slurp(dir / "a.fck"), slurp(dir / "b.fck"));
  EXPECT_EQ(slurp(dir / "a.fck.loss.csv"), slurp(dir / "b.fck.loss.csv"));

  const auto man = json::parse(slurp(dir / "a.fck.manifest.json"));
  EXPECT_EQ(man.at("config").at("train").at("seed"), 3);
  EXPECT_EQ(man.at("config").at("model").at("width"), 4);
}

TEST_F(Cli, PresetParameterCountsDiffer) {
  make_data("d.fds", 2);
  auto count = [&](const std::string& preset) {
    const auto r = train("d.fds", preset + ".fck", "--n-train 2 --max-steps 1 --preset " + preset);
    EXPECT_EQ(r.code, 0) << r.output;
    return json::parse(slurp(dir / (preset + ".fck.manifest.json"))).at("config").at("parameters").get<std::size_t>();
  };
  EXPECT_LT(count("ffino"), count("fmionet_like"));
}

TEST_F(Cli, NonFiniteLossExitsFourAndKeepsCheckpoint) {
  make_data("d.fds", 2);
  ASSERT_EQ(train("d.fds", "m.fck", "--n-train 2").code, 0);
  const auto good = slurp(dir / "m.fck");
  auto ds = ffino::read_dataset(p("d.fds"));
  for (auto& v : ds.samples[0].sg) v = std::numeric_limits<float>::quiet_NaN();
  ffino::write_dataset(ds, p("nan.fds"));
  const auto r = train("nan.fds", "m.fck", "--n-train 2");
  EXPECT_EQ(r.code, 4) << r.output;
  EXPECT_EQ(slurp(dir / "m.fck"), good);
}

TEST_F(Cli, EvalOracleIsPerfectAndRepeatable) {
  make_data("d.fds", 4);
  auto r = cli("eval --oracle --data " + p("d.fds") + " --n-train 2 --out-dir " + p("ev"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rep = json::parse(slurp(dir / "ev" / "report.json"));
  EXPECT_EQ(rep.at("aggregate").at("r2").at("mean").get<double>(), 1.0);
  EXPECT_EQ(rep.at("aggregate").at("rmse").at("mean").get<double>(), 0.0);
  EXPECT_NEAR(rep.at("aggregate").at("ssim").at("mean").get<double>(), 1.0, 1e-12);
  EXPECT_EQ(rep.at("aggregate").at("mre").at("mean").get<double>(), 0.0);
}

TEST_F(Cli, EvalTwiceGivesIdenticalReport) {
  make_data("d.fds", 6);
  ASSERT_EQ(train("d.fds", "m.fck", "--n-train 4").code, 0);
  auto r = cli("eval --ckpt " + p("m.fck") + " --data " + p("d.fds") + " --n-train 4 --out-dir " + p("e1"));
  ASSERT_EQ(r.code, 0) << r.output;
  r = cli("eval --ckpt " + p("m.fck") + " --data " + p("d.fds") + " --n-train 4 --threads 2 --out-dir " + p("e2"));
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"report.json", "metrics.csv", "scatter.csv"}) EXPECT_EQ(slurp(dir / "e1" / f), slurp(dir / "e2" / f)) << f;
  EXPECT_TRUE(fs::exists(dir / "e1" / "manifest.json"));
}

TEST_F(Cli, GridMismatchNamesBothShapes) {
  make_data("d.fds", 2);
  ASSERT_EQ(train("d.fds", "m.fck", "--n-train 2").code, 0);
  ASSERT_EQ(cli("gen-data --n 2 --seed 1 --grid-nr 32 --grid-nz 16 --out " + p("big.fds")).code, 0);
  const auto r = cli("eval --ckpt " + p("m.fck") + " --data " + p("big.fds") + " --n-train 1 --out-dir " + p("ev"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("(24, 16)"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("(32, 16)"), std::string::npos) << r.output;
}

TEST_F(Cli, PredictWritesTriptych) {
  make_data("d.fds", 2);
  ASSERT_EQ(train("d.fds", "m.fck", "--n-train 2").code, 0);
  const auto r = cli("predict --ckpt " + p("m.fck") + " --data " + p("d.fds") + " --sample-index 1 --out-dir " + p("pr"));
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream csv(dir / "pr" / "sample_1_sg.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  EXPECT_EQ(lines, 1 + 12 * 24 * 16);
  EXPECT_EQ(slurp(dir / "pr" / "sample_1_sg.ppm").substr(0, 2), "P6");
  EXPECT_EQ(cli("predict --ckpt " + p("m.fck") + " --data " + p("d.fds") + " --sample-index 2 --out-dir " + p("pr")).code, 2);
}

TEST_F(Cli, BenchSingleRepeatHasZeroStd) {
  make_data("d.fds", 3);
  ASSERT_EQ(train("d.fds", "m.fck", "--n-train 2").code, 0);
  const auto r = cli("bench --ckpt " + p("m.fck") + " --data " + p("d.fds") + " --n-train 2 --repeats 1");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto b = json::parse(slurp(dir / "m.fck.bench.json"));
  EXPECT_EQ(b.at("timings").at("seconds_per_sample").size(), 1u);
  EXPECT_EQ(b.at("timings").at("std").get<double>(), 0.0);
  EXPECT_GT(b.at("timings").at("mean").get<double>(), 0.0);
  EXPECT_EQ(cli("bench --ckpt " + p("m.fck") + " --data " + p("d.fds") + " --repeats 0").code, 2);
}
