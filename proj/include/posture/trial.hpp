#pragma once

#include <array>
#include <cstddef>
#include <variant>
#include <vector>

#include "posture/dec.hpp"
#include "posture/plant.hpp"
#include "posture/stimulus.hpp"

namespace posture {

/// Sway series recorded at the stimulus sample rate.
struct SimTrace {
  std::vector<double> alpha_fs;  // support tilt
  std::vector<double> alpha_ss;  // shank in space
  std::vector<double> alpha_ls;  // thigh (leg) in space
  std::vector<double> alpha_ts;  // trunk in space
  std::vector<double> alpha_bs;  // body COM sway about the ankle
  std::array<ModuleParams, kJoints> params;

  std::size_t length() const { return alpha_bs.size(); }
  /// Largest |alpha_BS| over the trace (rad).
  double peak_body_sway() const;
};

struct Rejected {
  double abort_time = 0.0;   // s
  double peak_sway = 0.0;    // rad
  bool diverged = false;     // non-finite or fallen, rather than over the sway limit
};

struct TrialSettings {
  double dt = 0.002;                 // s
  double sway_limit_deg = 6.0;       // reject at |alpha_BS| >= limit; <= 0 disables
  std::size_t decimation = 10;       // record every n-th step
  JointLocks locks{};
};

using TrialOutcome = std::variant<SimTrace, Rejected>;

/// Closed-loop simulation of the DEC-controlled body on the tilting support.
TrialOutcome run_trial(const PlantModel& plant, const std::array<ModuleParams, kJoints>& params,
                       const DecDefaults& defaults, const StimulusProfile& stimulus,
                       const TrialSettings& settings = {});

}  // namespace posture
