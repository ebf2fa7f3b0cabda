#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "posture/config.hpp"

using namespace posture;

namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.ini");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsReproduceParameterTable) {
  const Config c = parse("");
  EXPECT_EQ(c.dec.active[0].kp, 465.98);
  EXPECT_EQ(c.dec.active[1].kd, 18.394);
  EXPECT_EQ(c.dec.active[2].delay, 0.121);
  EXPECT_EQ(c.dec.passive[0].damping, 145.0);
  EXPECT_EQ(c.dec.tilt_threshold, 0.03);
  EXPECT_EQ(c.stimulus.stages, 242u);
  EXPECT_EQ(c.dataset.stft.hop, 115u);
}

TEST(Config, OverridesApply) {
  const Config c = parse(
      "[ankle]\nkp = 500\ncontrolled = joint_angle\n\n[training]\nepochs = 12\nweight_decay = 0.001\n"
      "[network]\nconv_widths = 8, 16\n[features]\nwindow = hann\nmagnitude = log\n");
  EXPECT_EQ(c.dec.active[0].kp, 500.0);
  EXPECT_EQ(c.dec.active[0].controlled, ControlledVariable::JointAngle);
  EXPECT_EQ(c.training.epochs, 12u);
  EXPECT_EQ(c.conv_widths, (std::vector<std::size_t>{8, 16}));
  EXPECT_EQ(c.training.weight_decay, 0.001);
  EXPECT_EQ(c.dataset.stft.window, WindowKind::Hann);
  EXPECT_EQ(c.dataset.stft.magnitude, MagnitudeScale::Log);
  EXPECT_NE(error_of("[features]\nmagnitude = db\n").find("test.ini:2"), std::string::npos);
}

TEST(Config, UnknownKeyRejectedWithLine) {
  const std::string e = error_of("[ankle]\nkp = 1\nkq = 2\n");
  EXPECT_NE(e.find("test.ini:3"), std::string::npos) << e;
  EXPECT_NE(e.find("kq"), std::string::npos) << e;
}

TEST(Config, UnknownSectionRejected) {
  EXPECT_NE(error_of("[elbow]\nkp = 1\n").find("elbow"), std::string::npos);
}

TEST(Config, MalformedLineReportsLine) {
  const std::string e = error_of("[ankle]\nkp = 1\nthis is not a key\n");
  EXPECT_NE(e.find("test.ini:3"), std::string::npos) << e;
}

TEST(Config, BadValueReportsKeyAndLine) {
  const std::string e = error_of("[dataset]\n\nseed = minus one\n");
  EXPECT_NE(e.find("test.ini:3"), std::string::npos) << e;
  EXPECT_NE(e.find("dataset.seed"), std::string::npos) << e;
}

TEST(Config, InconsistentSettingsRejected) {
  EXPECT_FALSE(error_of("[dataset]\nsplit_train = 0.9\n").empty());
  EXPECT_FALSE(error_of("[simulation]\ndecimation = 7\n").empty());
  EXPECT_FALSE(error_of("[plant]\nshank_mass = -1\n").empty());
}

TEST(Config, EchoRoundTrips) {
  Config c = parse("[hip]\nki = 2.5\n[stimulus]\npeak_to_peak_deg = 3\n");
  const std::string text = config_text(c);
  const Config back = parse(text);
  EXPECT_EQ(config_text(back), text);
  EXPECT_EQ(back.dec.active[2].ki, 2.5);
  EXPECT_EQ(back.stimulus.peak_to_peak_deg, 3.0);
}

TEST(Params, FileOverridesDefaults) {
  const auto path = std::filesystem::temp_directory_path() / "posture_params.ini";
  std::ofstream(path) << "[knee]\nkp = 300\ncontrolled = joint_angle\n";
  const auto p = load_params(path, DecDefaults::table());
  EXPECT_EQ(p[1].kp, 300.0);
  EXPECT_EQ(p[1].controlled, ControlledVariable::JointAngle);
  EXPECT_EQ(p[0].kp, 465.98);
  std::ofstream(path) << "[knee]\nstiffness = 3\n";
  EXPECT_THROW(load_params(path, DecDefaults::table()), ConfigError);
  std::filesystem::remove(path);
}
