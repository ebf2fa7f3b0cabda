#include "posture/plant.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace posture {

const char* joint_name(Joint joint) {
  switch (joint) {
    case Joint::Ankle: return "ankle";
    case Joint::Knee: return "knee";
    case Joint::Hip: return "hip";
  }
  return "?";
}

Anthropometry Anthropometry::standard() {
  auto rod = [](double m, double l, double c) { return Segment{m, l, c, m * l * l / 12.0}; };
  Anthropometry a;
  a.segments = {rod(7.4, 0.44, 0.25), rod(16.0, 0.43, 0.19), rod(50.6, 0.80, 0.30)};
  a.gravity = 9.81;
  return a;
}

PlantModel build_plant(const Anthropometry& anthro) {
  for (int i = 0; i < kJoints; ++i) {
    const Segment& s = anthro.segments[i];
    const std::string which = joint_name(static_cast<Joint>(i));
    if (!(s.mass > 0.0) || !(s.length > 0.0) || !(s.com_distance > 0.0))
      throw std::invalid_argument("segment above " + which + ": mass, length and COM distance must be positive");
    if (s.com_distance > s.length)
      throw std::invalid_argument("segment above " + which + ": COM distance exceeds segment length");
    if (!(s.inertia_com >= 0.0))
      throw std::invalid_argument("segment above " + which + ": negative inertia");
  }
  if (!std::isfinite(anthro.gravity) || anthro.gravity < 0.0)
    throw std::invalid_argument("gravity must be finite and non-negative");

  PlantModel model;
  model.anthro_ = anthro;
  const auto& seg = anthro.segments;

  for (int j = 0; j < kJoints; ++j) {
    double mass = 0.0;
    double moment = 0.0;
    double base = 0.0;  // height of segment i's proximal joint above joint j
    for (int i = j; i < kJoints; ++i) {
      mass += seg[i].mass;
      moment += seg[i].mass * (base + seg[i].com_distance);
      base += seg[i].length;
    }
    model.mass_above_[j] = mass;
    model.height_above_[j] = moment / mass;
    model.mgh_[j] = mass * anthro.gravity * model.height_above_[j];
  }

  for (int i = 0; i < kJoints; ++i) {
    double distal = 0.0;
    for (int k = i + 1; k < kJoints; ++k) distal += seg[k].mass;
    model.gravity_moment_[i] = seg[i].mass * seg[i].com_distance + seg[i].length * distal;
    model.coupling_(i, i) = seg[i].inertia_com + seg[i].mass * seg[i].com_distance * seg[i].com_distance +
                            seg[i].length * seg[i].length * distal;
  }
  for (int i = 0; i < kJoints; ++i)
    for (int j = i + 1; j < kJoints; ++j) {
      model.coupling_(i, j) = seg[i].length * model.gravity_moment_[j];
      model.coupling_(j, i) = model.coupling_(i, j);
    }
  return model;
}

double PlantModel::upright_inertia_about_ankle() const { return coupling_.sum(); }

Mat3 PlantModel::mass_matrix(const Vec3& theta) const {
  Mat3 m;
  for (int i = 0; i < kJoints; ++i)
    for (int j = 0; j < kJoints; ++j)
      m(i, j) = (i == j) ? coupling_(i, i) : coupling_(i, j) * std::cos(theta[i] - theta[j]);
  return m;
}

Vec3 PlantModel::velocity_terms(const Vec3& theta, const Vec3& omega) const {
  Vec3 c = Vec3::Zero();
  for (int i = 0; i < kJoints; ++i)
    for (int j = 0; j < kJoints; ++j)
      if (i != j) c[i] += coupling_(i, j) * std::sin(theta[i] - theta[j]) * omega[j] * omega[j];
  return c;
}

Vec3 PlantModel::gravity_terms(const Vec3& theta) const {
  Vec3 g;
  for (int i = 0; i < kJoints; ++i) g[i] = -anthro_.gravity * gravity_moment_[i] * std::sin(theta[i]);
  return g;
}

double PlantModel::kinetic_energy(const PlantState& state) const {
  return 0.5 * state.omega.dot(mass_matrix(state.theta) * state.omega);
}

double PlantModel::potential_energy(const PlantState& state) const {
  double v = 0.0;
  for (int i = 0; i < kJoints; ++i) v += anthro_.gravity * gravity_moment_[i] * std::cos(state.theta[i]);
  return v;
}

Vec3 PlantModel::accelerations(const PlantState& state, const Vec3& joint_torques, JointLocks locks) const {
  const Vec3 generalized{joint_torques[0] - joint_torques[1], joint_torques[1] - joint_torques[2],
                         joint_torques[2]};
  const Vec3 rhs = generalized - velocity_terms(state.theta, state.omega) - gravity_terms(state.theta);
  const Mat3 m = mass_matrix(state.theta);
  if (!locks.knee && !locks.hip) return m.ldlt().solve(rhs);

  // theta = L q with q the relative joint angles; keep only the free columns of L.
  Eigen::Matrix<double, 3, Eigen::Dynamic> basis(3, 3);
  int free = 0;
  const std::array<bool, kJoints> locked{false, locks.knee, locks.hip};
  for (int k = 0; k < kJoints; ++k) {
    if (locked[k]) continue;
    basis.col(free) = Vec3::Zero();
    for (int i = k; i < kJoints; ++i) basis(i, free) = 1.0;
    ++free;
  }
  basis.conservativeResize(3, free);
  const Eigen::MatrixXd reduced = basis.transpose() * m * basis;
  const Eigen::VectorXd qdd = reduced.ldlt().solve(basis.transpose() * rhs);
  return basis * qdd;
}

namespace {

bool diverged(const PlantState& s) {
  for (int i = 0; i < kJoints; ++i) {
    if (!std::isfinite(s.theta[i]) || !std::isfinite(s.omega[i])) return true;
    if (std::abs(s.theta[i]) >= std::numbers::pi / 2) return true;
  }
  return false;
}

}  // namespace

std::optional<PlantState> dynamics_step(const PlantModel& model, const PlantState& state,
                                        const Vec3& joint_torques, double dt, JointLocks locks,
                                        Integrator integrator) {
  if (!(dt > 0.0)) throw std::invalid_argument("dynamics_step: dt must be positive");
  PlantState next;
  if (integrator == Integrator::SemiImplicitEuler) {
    next.omega = state.omega + dt * model.accelerations(state, joint_torques, locks);
    next.theta = state.theta + dt * next.omega;
  } else {
    auto deriv = [&](const Vec3& th, const Vec3& om) {
      return model.accelerations(PlantState{th, om}, joint_torques, locks);
    };
    const Vec3 a1 = deriv(state.theta, state.omega);
    const Vec3 v1 = state.omega;
    const Vec3 v2 = state.omega + 0.5 * dt * a1;
    const Vec3 a2 = deriv(state.theta + 0.5 * dt * v1, v2);
    const Vec3 v3 = state.omega + 0.5 * dt * a2;
    const Vec3 a3 = deriv(state.theta + 0.5 * dt * v2, v3);
    const Vec3 v4 = state.omega + dt * a3;
    const Vec3 a4 = deriv(state.theta + dt * v3, v4);
    next.theta = state.theta + dt / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
    next.omega = state.omega + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }
  if (diverged(next)) return std::nullopt;
  return next;
}

void com_sway(const PlantModel& model, const Vec3& theta, const Vec3& omega, Vec3& sway, Vec3& sway_rate) {
  const auto& seg = model.anthropometry().segments;
  for (int j = 0; j < kJoints; ++j) {
    double x = 0.0, z = 0.0, vx = 0.0, vz = 0.0;
    double px = 0.0, pz = 0.0, pvx = 0.0, pvz = 0.0;  // proximal joint of segment i, relative to joint j
    for (int i = j; i < kJoints; ++i) {
      const double s = std::sin(theta[i]), c = std::cos(theta[i]);
      const double m = seg[i].mass, d = seg[i].com_distance;
      x += m * (px + d * s);
      z += m * (pz + d * c);
      vx += m * (pvx + d * c * omega[i]);
      vz += m * (pvz - d * s * omega[i]);
      px += seg[i].length * s;
      pz += seg[i].length * c;
      pvx += seg[i].length * c * omega[i];
      pvz -= seg[i].length * s * omega[i];
    }
    sway[j] = std::atan2(x, z);
    sway_rate[j] = (vx * z - x * vz) / (x * x + z * z);
  }
}

SegmentKinematics kinematics(const PlantModel& model, const PlantState& state, double support_tilt,
                             double support_tilt_rate) {
  SegmentKinematics k;
  const Vec3& th = state.theta;
  const Vec3& om = state.omega;
  k.joint_angles = Vec3{th[0] - support_tilt, th[1] - th[0], th[2] - th[1]};
  k.joint_velocities = Vec3{om[0] - support_tilt_rate, om[1] - om[0], om[2] - om[1]};
  com_sway(model, th, om, k.com_sway_above, k.com_sway_rate_above);
  return k;
}

}  // namespace posture
