#include "posture/dec.hpp"

#include <cmath>
#include <stdexcept>

namespace posture {

double controlled_variable_code(ControlledVariable cv) {
  return cv == ControlledVariable::ComSway ? 1.0 : -1.0;
}

ControlledVariable decode_controlled_variable(double code) {
  return code > 0.0 ? ControlledVariable::ComSway : ControlledVariable::JointAngle;
}

const char* controlled_variable_name(ControlledVariable cv) {
  return cv == ControlledVariable::ComSway ? "com_sway" : "joint_angle";
}

DecDefaults DecDefaults::table() {
  DecDefaults d;
  d.active = {ModuleParams{465.98, 11.649, 116.49, 0.10, ControlledVariable::ComSway},
              ModuleParams{245.25, 6.1312, 18.394, 0.07, ControlledVariable::ComSway},
              ModuleParams{73.575, 1.8394, 18.394, 0.1210, ControlledVariable::ComSway}};
  d.passive = {PassiveParams{232.5, 145.0}, PassiveParams{61.25, 11.25}, PassiveParams{36.5, 11.25}};
  d.tilt_threshold = 0.03;
  return d;
}

double dead_band(double x, double threshold) {
  if (x < -threshold) return x + threshold;
  if (x > threshold) return x - threshold;
  return 0.0;
}

double passive_torque(const PassiveParams& pp, double joint_angle, double joint_rate) {
  return -(pp.stiffness * joint_angle + pp.damping * joint_rate);
}

std::size_t DelayLine::samples_for(double delay, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("delay line: dt must be positive");
  if (!(delay >= 0.0) || !std::isfinite(delay)) throw std::invalid_argument("delay line: delay must be >= 0");
  return static_cast<std::size_t>(std::llround(delay / dt));
}

double DelayLine::push(double value) {
  if (buffer_.empty()) return value;
  const double out = buffer_[head_];
  buffer_[head_] = value;
  head_ = (head_ + 1) % buffer_.size();
  return out;
}

double TiltEstimator::step(double vest_body_rate, double prop_joint_rate, double threshold, double dt) {
  estimate_ += dead_band(vest_body_rate - prop_joint_rate, threshold) * dt;
  return estimate_;
}

ServoModule::ServoModule(const ModuleParams& params, double dt)
    : params_(params), dt_(dt), delay_(DelayLine::samples_for(params.delay, dt)) {
  if (params.kp < 0.0 || params.ki < 0.0 || params.kd < 0.0)
    throw std::invalid_argument("servo gains must be non-negative");
}

double ServoModule::step(double error, double gravity_angle) {
  integrator_ += error * dt_;
  const double derivative = (error - prev_error_) / dt_;
  prev_error_ = error;
  const double command = params_.kp * error + params_.kd * derivative + params_.ki * integrator_;
  last_servo_ = -delay_.push(command);

  const double gravity_rate = (gravity_angle - prev_gravity_) / dt_;
  prev_gravity_ = gravity_angle;
  last_compensation_ = -(params_.kp * gravity_angle + params_.kd * gravity_rate);
  return last_servo_ + last_compensation_;
}

double gravity_equivalent(const SegmentKinematics& kin, Joint joint) {
  return kin.com_sway_above[static_cast<int>(joint)];
}

DecController::DecController(const PlantModel& model, const std::array<ModuleParams, kJoints>& params,
                             const std::array<PassiveParams, kJoints>& passive, double tilt_threshold,
                             double dt)
    : model_(&model),
      passive_(passive),
      threshold_(tilt_threshold),
      dt_(dt),
      modules_{ServoModule(params[0], dt), ServoModule(params[1], dt), ServoModule(params[2], dt)} {
  if (!(tilt_threshold >= 0.0)) throw std::invalid_argument("tilt threshold must be >= 0");
}

Vec3 DecController::step(const SegmentKinematics& kin) {
  const double tilt = estimator_.step(kin.body_com_sway_rate(), kin.joint_velocities[0], threshold_, dt_);

  // Segment orientations in space as reconstructed from proprioception and
  // the up-channeled tilt estimate.
  Vec3 theta_est;
  theta_est[0] = kin.joint_angles[0] + tilt;
  theta_est[1] = theta_est[0] + kin.joint_angles[1];
  theta_est[2] = theta_est[1] + kin.joint_angles[2];
  Vec3 sway_est, unused;
  com_sway(*model_, theta_est, Vec3::Zero(), sway_est, unused);

  Vec3 torques;
  for (int j = 0; j < kJoints; ++j) {
    const ModuleParams& p = modules_[j].params();
    double error;
    if (p.controlled == ControlledVariable::ComSway)
      error = sway_est[j];
    else
      error = (j == 0) ? theta_est[0] : kin.joint_angles[j];
    last_errors_[j] = error;
    torques[j] = modules_[j].step(error, gravity_equivalent(kin, static_cast<Joint>(j))) +
                 passive_torque(passive_[j], kin.joint_angles[j], kin.joint_velocities[j]);
  }
  return torques;
}

}  // namespace posture
