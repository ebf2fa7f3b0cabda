#pragma once

#include <array>
#include <optional>

#include <Eigen/Dense>

namespace posture {

inline constexpr int kJoints = 3;

enum class Joint : int { Ankle = 0, Knee = 1, Hip = 2 };

inline constexpr std::array<Joint, kJoints> kAllJoints{Joint::Ankle, Joint::Knee, Joint::Hip};

const char* joint_name(Joint joint);

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Segment {
  double mass = 0.0;          // kg
  double length = 0.0;        // m
  double com_distance = 0.0;  // m, from the proximal joint
  double inertia_com = 0.0;   // kg m^2, about the segment COM
};

/// Shank, thigh and trunk (head-arms-trunk) of a sagittal-plane body.
struct Anthropometry {
  std::array<Segment, kJoints> segments;
  double gravity = 9.81;

  /// Adult body with thin-rod segment inertias (shank, thigh, HAT).
  static Anthropometry standard();
};

/// Absolute segment orientations w.r.t. the gravitational vertical,
/// positive = forward lean. theta[0] is the shank, theta[2] the trunk.
struct PlantState {
  Vec3 theta = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
};

struct SegmentKinematics {
  Vec3 joint_angles = Vec3::Zero();      // ankle, knee, hip
  Vec3 joint_velocities = Vec3::Zero();
  Vec3 com_sway_above = Vec3::Zero();    // COM of the segments above joint j, about joint j
  Vec3 com_sway_rate_above = Vec3::Zero();

  double body_com_sway() const { return com_sway_above[0]; }
  double body_com_sway_rate() const { return com_sway_rate_above[0]; }
};

/// Joints that are rigidly held at their current relative angle.
struct JointLocks {
  bool knee = false;
  bool hip = false;
};

class PlantModel {
 public:
  const Anthropometry& anthropometry() const { return anthro_; }

  /// Total mass above joint j (j's own segment included).
  double mass_above(Joint j) const { return mass_above_[index(j)]; }
  /// Height of the COM of the segments above joint j when upright.
  double com_height_above(Joint j) const { return height_above_[index(j)]; }
  double mgh(Joint j) const { return mgh_[index(j)]; }

  /// Moment of inertia of the collinear upright chain about the ankle.
  double upright_inertia_about_ankle() const;

  Mat3 mass_matrix(const Vec3& theta) const;
  /// Velocity-product (centripetal) terms C(theta, omega).
  Vec3 velocity_terms(const Vec3& theta, const Vec3& omega) const;
  /// Gravity terms G(theta) = -g h_i sin(theta_i).
  Vec3 gravity_terms(const Vec3& theta) const;

  double kinetic_energy(const PlantState& state) const;
  double potential_energy(const PlantState& state) const;

  /// Segment accelerations for the given joint torques.
  Vec3 accelerations(const PlantState& state, const Vec3& joint_torques,
                     JointLocks locks = {}) const;

 private:
  friend PlantModel build_plant(const Anthropometry& anthro);
  static constexpr int index(Joint j) { return static_cast<int>(j); }

  Anthropometry anthro_;
  std::array<double, kJoints> mass_above_{};
  std::array<double, kJoints> height_above_{};
  std::array<double, kJoints> mgh_{};
  Mat3 coupling_ = Mat3::Zero();       // M_ij = coupling_(i,j) cos(theta_i - theta_j)
  Vec3 gravity_moment_ = Vec3::Zero();  // h_i: m_i c_i + l_i * (mass of distal segments)
};

/// Validates the anthropometry and caches per-joint aggregates.
/// Throws std::invalid_argument on non-positive masses or lengths.
PlantModel build_plant(const Anthropometry& anthro);

enum class Integrator { RungeKutta4, SemiImplicitEuler };

/// Advances the plant one step with joint torques held constant over dt.
/// Joint torque j acts positively on the segment above joint j and
/// negatively on the one below. Support tilt does not appear here: the tilt
/// axis passes through the fixed ankle, so it only enters through torques.
/// Returns std::nullopt when the state diverges (non-finite or |theta| >= pi/2).
std::optional<PlantState> dynamics_step(const PlantModel& model, const PlantState& state,
                                        const Vec3& joint_torques, double dt,
                                        JointLocks locks = {},
                                        Integrator integrator = Integrator::RungeKutta4);

/// Joint angles, joint rates and per-joint COM sway for a state on a support
/// tilted by support_tilt (rad) and rotating at support_tilt_rate (rad/s).
SegmentKinematics kinematics(const PlantModel& model, const PlantState& state,
                             double support_tilt, double support_tilt_rate = 0.0);

/// Sway of the COM of the segments above each joint for the given segment
/// orientations and rates (atan2 of horizontal over vertical COM offset).
void com_sway(const PlantModel& model, const Vec3& theta, const Vec3& omega, Vec3& sway,
              Vec3& sway_rate);

}  // namespace posture
