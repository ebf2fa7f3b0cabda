#include <gtest/gtest.h>

#include <cmath>

#include "posture/dec.hpp"
#include "posture/plant.hpp"

using namespace posture;

TEST(DeadBand, Branches) {
  EXPECT_NEAR(dead_band(0.05, 0.03), 0.02, 1e-12);
  EXPECT_EQ(dead_band(0.01, 0.03), 0.0);
  EXPECT_EQ(dead_band(-0.03, 0.03), 0.0);
  EXPECT_NEAR(dead_band(-0.1, 0.03), -0.07, 1e-12);
}

TEST(DelayLine, ShiftsByExactSampleCount) {
  EXPECT_EQ(DelayLine::samples_for(0.1, 0.002), 50u);
  EXPECT_EQ(DelayLine::samples_for(0.121, 0.002), 61u);
  DelayLine d(3);
  std::vector<double> out;
  for (int i = 1; i <= 6; ++i) out.push_back(d.push(i));
  EXPECT_EQ(out, (std::vector<double>{0, 0, 0, 1, 2, 3}));
  DelayLine pass(0);
  EXPECT_EQ(pass.push(4.5), 4.5);
}

TEST(Passive, TableArithmetic) {
  const auto t = DecDefaults::table();
  EXPECT_NEAR(passive_torque(t.passive[0], 0.1, 0.0), -23.25, 1e-12);
  EXPECT_EQ(passive_torque(t.passive[0], 0.0, 0.0), 0.0);
  EXPECT_NEAR(passive_torque(t.passive[1], 0.0, 1.0), -11.25, 1e-12);
}

TEST(Defaults, Table) {
  const auto t = DecDefaults::table();
  EXPECT_EQ(t.active[0].kp, 465.98);
  EXPECT_EQ(t.active[0].ki, 11.649);
  EXPECT_EQ(t.active[0].kd, 116.49);
  EXPECT_EQ(t.active[0].delay, 0.1);
  EXPECT_EQ(t.active[1].kp, 245.25);
  EXPECT_EQ(t.active[2].delay, 0.121);
  EXPECT_EQ(t.passive[2].stiffness, 36.5);
  EXPECT_EQ(t.tilt_threshold, 0.03);
}

TEST(ControlledVariable, CodeAndDecode) {
  EXPECT_EQ(controlled_variable_code(ControlledVariable::ComSway), 1.0);
  EXPECT_EQ(controlled_variable_code(ControlledVariable::JointAngle), -1.0);
  EXPECT_EQ(decode_controlled_variable(0.3), ControlledVariable::ComSway);
  EXPECT_EQ(decode_controlled_variable(-0.3), ControlledVariable::JointAngle);
}

TEST(TiltEstimator, SilentBelowThreshold) {
  TiltEstimator e;
  for (int i = 0; i < 1000; ++i) e.step(0.02, -0.005, 0.03, 0.002);
  EXPECT_EQ(e.estimate(), 0.0);
}

TEST(TiltEstimator, IntegratesExcessRate) {
  const double theta = 0.03, dt = 0.002;
  TiltEstimator e;
  for (int i = 0; i < 500; ++i) e.step(2 * theta, 0.0, theta, dt);
  EXPECT_NEAR(e.estimate(), theta * 1.0, 1e-12);
}

TEST(TiltEstimator, RampUnderestimatedByThresholdTimesDuration) {
  // Body upright in space on a support tilting at 0.5 deg/s: the ankle
  // joint rotates at minus the tilt rate.
  const double rate = 0.5 * std::numbers::pi / 180.0, theta = 0.0003, dt = 0.002;
  TiltEstimator e;
  for (int i = 0; i < 1000; ++i) e.step(0.0, -rate, theta, dt);
  EXPECT_NEAR(rate * 2.0 - e.estimate(), theta * 2.0, 1e-12);
}

TEST(Servo, ProportionalSteadyState) {
  ModuleParams p = DecDefaults::table().active[0];
  p.delay = 0.0;
  p.ki = 0.0;
  ServoModule s(p, 0.002);
  s.step(0.1, 0.0);
  EXPECT_NEAR(s.step(0.1, 0.0), -46.598, 1e-9);
}

TEST(Servo, DelayedBranchSilentForDelaySamples) {
  ModuleParams p = DecDefaults::table().active[0];
  ServoModule s(p, 0.002);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(s.step(0.1, 0.0), 0.0) << "step " << i;
  EXPECT_NE(s.step(0.1, 0.0), 0.0);
}

TEST(Servo, GravityCompensationIsUndelayedPd) {
  ModuleParams p = DecDefaults::table().active[0];
  const double dt = 0.002, slope = 0.01;
  ServoModule s(p, dt);
  s.step(0.0, 0.0);
  for (int i = 1; i <= 200; ++i) {
    const double t = i * dt;
    const double tau = s.step(0.0, slope * t);
    EXPECT_NEAR(tau, -(465.98 * slope * t + 116.49 * slope), 1e-9);
    EXPECT_EQ(s.last_servo_torque(), 0.0);
  }
}

TEST(Servo, StaticCompensationOfSway) {
  const PlantModel m = build_plant(Anthropometry::standard());
  SegmentKinematics k;
  k.com_sway_above[0] = 0.1;
  EXPECT_EQ(gravity_equivalent(k, Joint::Ankle), 0.1);
  ModuleParams p = DecDefaults::table().active[0];
  ServoModule s(p, 0.002);
  s.step(0.0, 0.1);
  s.step(0.0, 0.1);
  EXPECT_NEAR(s.last_compensation_torque(), -46.598, 1e-9);
}

TEST(Servo, CollinearLeanGravityEquivalentOfPointPendulum) {
  const PlantModel m = build_plant(Anthropometry::standard());
  PlantState s;
  s.theta = Vec3::Constant(0.05);
  const auto k = kinematics(m, s, 0.0);
  // A point mass at the body COM height leaning 0.05 rad sways 0.05 rad.
  EXPECT_NEAR(gravity_equivalent(k, Joint::Ankle), 0.05, 1e-12);
  EXPECT_NEAR(gravity_equivalent(k, Joint::Hip), 0.05, 1e-12);
}

TEST(Controller, ZeroStateGivesZeroTorque) {
  const PlantModel m = build_plant(Anthropometry::standard());
  const auto d = DecDefaults::table();
  DecController c(m, d.active, d.passive, d.tilt_threshold, 0.002);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(c.step(kinematics(m, PlantState{}, 0.0)), Vec3::Zero());
}
