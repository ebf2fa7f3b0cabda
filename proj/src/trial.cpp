#include "posture/trial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace posture {

double SimTrace::peak_body_sway() const {
  double peak = 0.0;
  for (double a : alpha_bs) peak = std::max(peak, std::abs(a));
  return peak;
}

TrialOutcome run_trial(const PlantModel& plant, const std::array<ModuleParams, kJoints>& params,
                       const DecDefaults& defaults, const StimulusProfile& stimulus,
                       const TrialSettings& settings) {
  if (settings.decimation == 0) throw std::invalid_argument("run_trial: decimation must be positive");
  const double record_dt = 1.0 / stimulus.sample_rate();
  if (std::abs(record_dt - settings.dt * static_cast<double>(settings.decimation)) > 1e-12)
    throw std::invalid_argument("run_trial: dt * decimation must match the stimulus sample period");

  const std::size_t samples = stimulus.length();
  const std::size_t steps = (samples - 1) * settings.decimation;
  const double limit = settings.sway_limit_deg * std::numbers::pi / 180.0;

  SimTrace trace;
  trace.params = params;
  for (auto* series : {&trace.alpha_fs, &trace.alpha_ss, &trace.alpha_ls, &trace.alpha_ts, &trace.alpha_bs})
    series->reserve(samples);

  DecController controller(plant, params, defaults.passive, defaults.tilt_threshold, settings.dt);
  PlantState state;
  double peak = 0.0;

  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * settings.dt;
    const double tilt = stimulus.tilt_at(t);
    const SegmentKinematics kin = kinematics(plant, state, tilt, stimulus.rate_at(t));
    const double sway = kin.body_com_sway();
    peak = std::max(peak, std::abs(sway));
    if (settings.sway_limit_deg > 0.0 && std::abs(sway) >= limit) return Rejected{t, peak, false};

    if (k % settings.decimation == 0) {
      trace.alpha_fs.push_back(tilt);
      trace.alpha_ss.push_back(state.theta[0]);
      trace.alpha_ls.push_back(state.theta[1]);
      trace.alpha_ts.push_back(state.theta[2]);
      trace.alpha_bs.push_back(sway);
    }
    if (k == steps) break;

    const Vec3 torques = controller.step(kin);
    auto next = dynamics_step(plant, state, torques, settings.dt, settings.locks);
    if (!next) return Rejected{t + settings.dt, peak, true};
    state = *next;
  }
  return trace;
}

}  // namespace posture
