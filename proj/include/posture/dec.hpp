#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "posture/plant.hpp"

namespace posture {

/// Servo-loop input of a control module.
enum class ControlledVariable { ComSway, JointAngle };

/// +1 for COM sway, -1 for joint angle (the categorical learning target).
double controlled_variable_code(ControlledVariable cv);
ControlledVariable decode_controlled_variable(double code);
const char* controlled_variable_name(ControlledVariable cv);

struct ModuleParams {
  double kp = 0.0;     // N m / rad
  double ki = 0.0;     // N m / (rad s)
  double kd = 0.0;     // N m s / rad
  double delay = 0.0;  // s
  ControlledVariable controlled = ControlledVariable::ComSway;
};

struct PassiveParams {
  double stiffness = 0.0;  // N m / rad
  double damping = 0.0;    // N m s / rad
};

struct DecDefaults {
  std::array<ModuleParams, kJoints> active;
  std::array<PassiveParams, kJoints> passive;
  double tilt_threshold = 0.03;  // rad/s

  /// Default ankle/knee/hip parameters of the DEC posture model.
  static DecDefaults table();
};

/// Dead-band threshold f_theta: zero on [-threshold, threshold], shifted
/// identity outside.
double dead_band(double x, double threshold);

/// Spring-damper joint torque -(K * angle + B * rate).
double passive_torque(const PassiveParams& pp, double joint_angle, double joint_rate);

/// Transport delay of a fixed number of samples. push() returns the value
/// pushed `length()` calls earlier (zero while the line is filling).
class DelayLine {
 public:
  explicit DelayLine(std::size_t length = 0) : buffer_(length, 0.0) {}

  static std::size_t samples_for(double delay, double dt);

  std::size_t length() const { return buffer_.size(); }
  double push(double value);

 private:
  std::vector<double> buffer_;
  std::size_t head_ = 0;
};

/// Foot-in-space tilt estimator: integral of the dead-banded difference
/// between vestibular body-sway rate and proprioceptive ankle rate.
class TiltEstimator {
 public:
  double step(double vest_body_rate, double prop_joint_rate, double threshold, double dt);
  double estimate() const { return estimate_; }

 private:
  double estimate_ = 0.0;
};

/// PID servo with lumped delay plus undelayed PD gravity compensation.
class ServoModule {
 public:
  ServoModule(const ModuleParams& params, double dt);

  const ModuleParams& params() const { return params_; }

  /// Torque for servo error `error` (rad) and gravity angle equivalent
  /// `gravity_angle` (rad). The PID branch is delayed; the compensation is
  /// not and carries no integral term. Both branches oppose positive lean.
  double step(double error, double gravity_angle);

  /// The delayed PID branch alone from the last step.
  double last_servo_torque() const { return last_servo_; }
  /// The gravity compensation branch alone from the last step.
  double last_compensation_torque() const { return last_compensation_; }

 private:
  ModuleParams params_;
  double dt_;
  DelayLine delay_;
  double integrator_ = 0.0;
  double prev_error_ = 0.0;
  double prev_gravity_ = 0.0;
  double last_servo_ = 0.0;
  double last_compensation_ = 0.0;
};

/// Angle equivalent of the gravitational disturbance at a joint: the sway
/// of the COM of all segments above it.
double gravity_equivalent(const SegmentKinematics& kin, Joint joint);

/// Three DEC modules sharing the up-channeled foot tilt estimate.
class DecController {
 public:
  DecController(const PlantModel& model, const std::array<ModuleParams, kJoints>& params,
                const std::array<PassiveParams, kJoints>& passive, double tilt_threshold, double dt);

  /// Joint torques for the sensed kinematics (ideal sensors).
  Vec3 step(const SegmentKinematics& kin);

  double tilt_estimate() const { return estimator_.estimate(); }
  /// Servo errors used in the last step.
  const Vec3& last_errors() const { return last_errors_; }

 private:
  const PlantModel* model_;
  std::array<PassiveParams, kJoints> passive_;
  double threshold_;
  double dt_;
  TiltEstimator estimator_;
  std::array<ServoModule, kJoints> modules_;
  Vec3 last_errors_ = Vec3::Zero();
};

}  // namespace posture
