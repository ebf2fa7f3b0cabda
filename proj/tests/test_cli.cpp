#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "posture/net.hpp"
#include "posture/pipeline.hpp"

namespace fs = std::filesystem;
using namespace posture;

namespace {

struct CliRun {
  int status;
  std::string output;
};

CliRun cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "posture_cli_test.log";
  const std::string cmd = std::string(POSTURE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("posture_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Cli, SimulateDefaultsWritesFullTrace) {
  const fs::path out = scratch("trace.csv");
  const CliRun r = cli("simulate --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  const auto l = lines(out);
  ASSERT_EQ(l.size(), 6052u);
  EXPECT_EQ(l[0], "time_s,alpha_fs_rad,alpha_ss_rad,alpha_ls_rad,alpha_ts_rad");
  EXPECT_EQ(l.back().rfind("121.00,", 0), 0u);
}

TEST(Cli, ZeroTiltGivesNoSway) {
  const fs::path out = scratch("still.csv");
  ASSERT_EQ(cli("simulate --tilt-amplitude 0 --out " + out.string()).status, 0);
  const SimTrace t = read_trace_csv(out, 6051, 50.0, true);
  for (std::size_t i = 0; i < t.length(); ++i) {
    EXPECT_LE(std::abs(t.alpha_ss[i]), 1e-12);
    EXPECT_LE(std::abs(t.alpha_ts[i]), 1e-12);
  }
}

TEST(Cli, MalformedParamsFileIsValidationError) {
  const fs::path params = scratch("bad_params.ini");
  std::ofstream(params) << "[ankle]\nkp = 400\nkd = fast\n";
  const CliRun r = cli("simulate --params " + params.string() + " --out " + scratch("x.csv").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find(params.string() + ":3"), std::string::npos) << r.output;
}

TEST(Cli, FallingBodyIsDivergence) {
  const fs::path params = scratch("weak.ini");
  std::ofstream(params) << "[ankle]\nkp = 0\nki = 0\nkd = 0\n";
  const CliRun r = cli("simulate --params " + params.string() + " --out " + scratch("y.csv").string());
  EXPECT_EQ(r.status, 3) << r.output;
  EXPECT_NE(r.output.find("at t ="), std::string::npos) << r.output;
}

TEST(Cli, UnknownOptionIsValidationError) {
  EXPECT_EQ(cli("simulate --bogus 1 --out x.csv").status, 2);
  EXPECT_EQ(cli("").status, 2);
}

TEST(Cli, StimulusExportMatchesGolden) {
  const fs::path out = scratch("stim.csv");
  ASSERT_EQ(cli("stimulus --out " + out.string()).status, 0);
  std::ifstream a(out), b(std::string(POSTURE_TEST_DATA) + "/prts_profile.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Cli, IdentifyStraightLegTrace) {
  // Two-segment trace (no thigh column) and an untrained modular network.
  const fs::path dir = scratch("identify");
  fs::create_directories(dir);
  const fs::path trace = dir / "trace.csv";
  ASSERT_EQ(cli("simulate --out " + trace.string()).status, 0);
  {
    std::ifstream in(trace);
    std::ofstream out(dir / "two_segment.csv");
    for (std::string l; std::getline(in, l);) {
      std::stringstream ss(l);
      std::string c[5];
      for (auto& x : c) std::getline(ss, x, ',');
      out << c[0] << ',' << c[1] << ',' << c[2] << ',' << c[4] << '\n';
    }
  }
  nn::Model m;
  m.network = nn::Network<float>::init(nn::ArchSpec::modular(), 1);
  m.image_stats = Standardizer(std::vector<double>(3 * 51 * 51, 0.0), std::vector<double>(3 * 51 * 51, 1.0),
                               ScaleMode::StdDev);
  m.target_stats = Standardizer(std::vector<double>(5, 0.0), std::vector<double>(5, 1.0));
  nn::save_model(m, dir / "m.ckpt");

  const fs::path report = dir / "report.csv";
  const CliRun r = cli("identify --trace " + (dir / "two_segment.csv").string() + " --model " + (dir / "m.ckpt").string() +
                    " --modules ankle,hip --out " + report.string() + " --resimulate " + (dir / "overlay.csv").string());
  ASSERT_EQ(r.status == 0 || r.status == 3, true) << r.output;
  const auto l = lines(report);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[1].rfind("ankle,", 0), 0u);
  EXPECT_EQ(l[2].rfind("hip,", 0), 0u);

  const CliRun knee = cli("identify --trace " + (dir / "two_segment.csv").string() + " --model " +
                       (dir / "m.ckpt").string() + " --modules ankle,knee");
  EXPECT_EQ(knee.status, 2);
  EXPECT_NE(knee.output.find("alpha_ls_rad"), std::string::npos) << knee.output;
}

TEST(Cli, IdentifyRefusesWrongLengthOrRate) {
  const fs::path dir = scratch("identify_bad");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "short.csv");
    out << "time_s,alpha_fs_rad,alpha_ss_rad,alpha_ls_rad,alpha_ts_rad\n";
    for (int i = 0; i < 100; ++i) out << i * 0.02 << ",0,0,0,0\n";
  }
  {
    std::ofstream out(dir / "fast.csv");
    out << "time_s,alpha_fs_rad,alpha_ss_rad,alpha_ls_rad,alpha_ts_rad\n";
    for (int i = 0; i < 6051; ++i) out << i * 0.01 << ",0,0,0,0\n";
  }
  nn::Model m;
  m.network = nn::Network<float>::init(nn::ArchSpec::modular(), 1);
  m.image_stats = Standardizer(std::vector<double>(3 * 51 * 51, 0.0), std::vector<double>(3 * 51 * 51, 1.0));
  m.target_stats = Standardizer(std::vector<double>(5, 0.0), std::vector<double>(5, 1.0));
  nn::save_model(m, dir / "m.ckpt");
  const CliRun a = cli("identify --trace " + (dir / "short.csv").string() + " --model " + (dir / "m.ckpt").string());
  EXPECT_EQ(a.status, 2);
  EXPECT_NE(a.output.find("6051 samples"), std::string::npos) << a.output;
  const CliRun b = cli("identify --trace " + (dir / "fast.csv").string() + " --model " + (dir / "m.ckpt").string());
  EXPECT_EQ(b.status, 2);
  EXPECT_NE(b.output.find("spacing"), std::string::npos) << b.output;
}

TEST(Cli, SmallPipelineProducesReports) {
  const fs::path dir = scratch("pipeline");
  const fs::path cfg = dir / "small.ini";
  fs::create_directories(dir);
  std::ofstream(cfg) << "[dataset]\nn_target = 30\n[network]\nconv_widths = 4,4\n[training]\nepochs = 2\n"
                        "[eval]\nloop_closure_trials = 1\n";
  const std::string base = "--config " + cfg.string() + " --jobs 1 ";
  CliRun r = cli(base + "dataset --out " + (dir / "data").string());
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "data" / "config.ini"));
  EXPECT_TRUE(fs::exists(dir / "data" / "hist_peak_sway.csv"));
  r = cli(base + "featurize --dataset " + (dir / "data").string());
  ASSERT_EQ(r.status, 0) << r.output;
  r = cli(base + "train --dataset " + (dir / "data").string() + " --out " + (dir / "models" / "modular.ckpt").string());
  ASSERT_EQ(r.status, 0) << r.output;
  r = cli(base + "eval --dataset " + (dir / "data").string() + " --model " + (dir / "models" / "modular.ckpt").string() +
          " --out " + (dir / "eval").string());
  ASSERT_EQ(r.status, 0) << r.output;
  for (const char* f : {"metrics.csv", "parameter_errors.csv", "loop_closure.csv", "summary.txt", "config.ini"})
    EXPECT_TRUE(fs::exists(dir / "eval" / f)) << f;
  r = cli(base + "compare --dataset " + (dir / "data").string() + " --model " +
          (dir / "models" / "modular.ckpt").string() + " --out " + (dir / "compare").string());
  ASSERT_EQ(r.status, 0) << r.output;
  const auto l = lines(dir / "compare" / "compare.csv");
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[1].rfind("modular,", 0), 0u);
  EXPECT_EQ(l[2].rfind("monolithic,", 0), 0u);
  const CliRun missing = cli(base + "eval --dataset " + (dir / "nope").string() + " --model x --out y");
  EXPECT_EQ(missing.status, 2);
}
