#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "posture/dataset.hpp"
#include "posture/dec.hpp"
#include "posture/net.hpp"
#include "posture/plant.hpp"
#include "posture/stimulus.hpp"

namespace posture {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a pipeline run depends on. Defaults are the standard body,
/// the default DEC parameter table and the canonical PRTS stimulus.
struct Config {
  Anthropometry anthropometry = Anthropometry::standard();
  DecDefaults dec = DecDefaults::table();
  StimulusSettings stimulus;
  TernaryTaps taps = TernaryTaps::canonical();
  DatasetSettings dataset;
  std::vector<std::size_t> conv_widths = nn::ArchSpec{}.conv_widths;
  std::uint64_t init_seed = 3;
  nn::TrainSchedule training;
  std::size_t loop_closure_trials = 60;

  nn::ArchSpec modular_spec() const;
  nn::ArchSpec monolithic_spec() const;
};

/// Sections [plant] [ankle] [knee] [hip] [dec] [stimulus] [simulation]
/// [dataset] [features] [network] [training] [eval]; missing keys keep their
/// defaults, unknown sections or keys are errors.
Config parse_config(std::istream& in, const std::string& source = "<config>");
Config load_config(const std::filesystem::path& path);

/// Full effective configuration in the same format.
void write_config(std::ostream& out, const Config& config);
std::string config_text(const Config& config);

/// Per-module parameter file: sections [ankle] [knee] [hip] with keys kp,
/// ki, kd, delay, controlled; omitted values fall back to `defaults`.
std::array<ModuleParams, kJoints> load_params(const std::filesystem::path& path, const DecDefaults& defaults);

}  // namespace posture
