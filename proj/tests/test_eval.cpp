#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "posture/eval.hpp"

using namespace posture;

namespace {

Standardizer identity(std::size_t width) {
  return Standardizer(std::vector<double>(width, 0.0), std::vector<double>(width, 1.0));
}

}  // namespace

TEST(Rmse, PerfectPrediction) {
  const std::vector<float> t{0.1f, -0.2f, 0.3f, 0.4f, 1.0f, 0.5f, 0.2f, -0.1f, 0.0f, -1.0f};
  const auto cats = categorical_columns(5);
  const RmseMetrics m = rmse_metrics(t, t, identity(5), cats);
  EXPECT_EQ(m.total_rmse, 0.0);
  EXPECT_EQ(m.fit_rmse, 0.0);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.count, 2u);
}

TEST(Rmse, HandComputedTwoSamples) {
  // Errors (1, 0, 0, 0, 2) and (0, 1, 1, 1, 0): total 8/10, fit 4/8.
  const std::vector<float> t{0, 0, 0, 0, 1, 0, 0, 0, 0, -1};
  const std::vector<float> p{1, 0, 0, 0, -1, 0, 1, 1, 1, -1};
  const RmseMetrics m = rmse_metrics(p, t, identity(5), categorical_columns(5));
  EXPECT_NEAR(m.total_rmse, std::sqrt(0.8), 1e-12);
  EXPECT_NEAR(m.fit_rmse, std::sqrt(0.5), 1e-12);
  EXPECT_EQ(m.accuracy, 0.5);
}

TEST(Rmse, AccuracyDecodedAfterDestandardizing) {
  // C mean 0.5, variance 1: a standardized -0.3 is +0.2 raw (COM sway).
  const Standardizer s({0, 0, 0, 0, 0.5}, {1, 1, 1, 1, 1});
  const std::vector<float> t{0, 0, 0, 0, 0.5f};  // raw +1
  const std::vector<float> p{0, 0, 0, 0, -0.3f};
  EXPECT_EQ(rmse_metrics(p, t, s, categorical_columns(5)).accuracy, 1.0);
  std::vector<float> scaled = p;
  scaled[4] = -0.45f;  // still positive raw
  EXPECT_EQ(rmse_metrics(scaled, t, s, categorical_columns(5)).accuracy, 1.0);
}

TEST(Rmse, AccuracyInvariantUnderPositiveRescaling) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> p(50), t(50);
  for (std::size_t i = 0; i < 50; ++i) {
    p[i] = n(rng);
    t[i] = (i % 5 == 4) ? (n(rng) > 0 ? 1.0f : -1.0f) : n(rng);
  }
  const double a = rmse_metrics(p, t, identity(5), categorical_columns(5)).accuracy;
  for (auto& v : p) v *= 3.7f;
  EXPECT_EQ(rmse_metrics(p, t, identity(5), categorical_columns(5)).accuracy, a);
}

TEST(Rmse, RejectsEmptyOrMismatched) {
  const std::vector<float> e;
  EXPECT_THROW(rmse_metrics(e, e, identity(5), categorical_columns(5)), std::invalid_argument);
  const std::vector<float> a(5, 0.0f), b(10, 0.0f);
  EXPECT_THROW(rmse_metrics(a, b, identity(5), categorical_columns(5)), std::invalid_argument);
}

TEST(Rmse, CategoricalColumnsOfStackedTargets) {
  EXPECT_EQ(categorical_columns(15), (std::vector<std::size_t>{4, 9, 14}));
}

TEST(ParameterErrors, MeanAbsAndVariance) {
  const Standardizer s({0, 0}, {2, 2});  // scale 2
  const std::vector<float> t{0, 0, 0, 0};
  const std::vector<float> p{1, -1, -1, 3};  // raw errors (2, -2), (-2, 6)
  const ParameterErrors e = parameter_errors(p, t, s);
  EXPECT_NEAR(e.mean_abs[0], 2.0, 1e-12);
  EXPECT_NEAR(e.mean_abs[1], 4.0, 1e-12);
  EXPECT_NEAR(e.variance[0], 4.0, 1e-12);
  EXPECT_NEAR(e.variance[1], 16.0, 1e-12);
}

TEST(IdentificationError, ClosedForms) {
  std::vector<double> a(6051, 0.01), b = a;
  EXPECT_EQ(identification_error(a, b), 0.0);
  for (auto& v : b) v += 0.1 * std::numbers::pi / 180.0;
  EXPECT_NEAR(identification_error(a, b), 0.1 * std::sqrt(6051.0) / 6051.0, 1e-9);
  EXPECT_NEAR(identification_error(a, b), 0.001286, 5e-7);
  std::vector<double> c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += 3.0 * (b[i] - a[i]);
  EXPECT_NEAR(identification_error(a, c), 3.0 * identification_error(a, b), 1e-12);
  EXPECT_THROW(identification_error(a, std::vector<double>(10)), std::invalid_argument);
}

TEST(ParamMse, ClosedForms) {
  EXPECT_EQ(param_mse(std::vector<double>(15, 0.0)), 0.0);
  EXPECT_NEAR(param_mse(std::vector<double>(15, 1.0)), std::sqrt(15.0) / 15.0, 1e-12);
  EXPECT_NEAR(param_mse(std::vector<double>(15, 1.0)), 0.2582, 5e-5);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<double> e(15);
  double ss = 0.0;
  for (auto& v : e) {
    v = u(rng);
    ss += v * v;
  }
  EXPECT_NEAR(param_mse(e), std::pow(ss, 0.5) / 15.0, 1e-12);
  EXPECT_THROW(param_mse(std::vector<double>(5, 1.0)), std::invalid_argument);
}

TEST(Pearson, KnownAndDegenerate) {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8}, z{4, 3, 2, 1}, c{1, 1, 1, 1};
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, z), -1.0, 1e-12);
  EXPECT_TRUE(std::isnan(pearson(c, x)));
  EXPECT_TRUE(std::isnan(pearson(std::vector<double>{1}, std::vector<double>{2})));
}

TEST(Decode, ZeroOutputGivesDefaults) {
  const auto d = DecDefaults::table();
  std::vector<double> v(15, 0.0);
  v[4] = 0.3;
  v[9] = -0.3;
  v[14] = 0.3;
  const Identified id = decode_targets(v, d);
  for (int j = 0; j < kJoints; ++j) {
    EXPECT_EQ(id.params[j].kp, d.active[j].kp);
    EXPECT_EQ(id.params[j].ki, d.active[j].ki);
    EXPECT_EQ(id.params[j].kd, d.active[j].kd);
    EXPECT_EQ(id.params[j].delay, d.active[j].delay);
  }
  EXPECT_EQ(id.params[0].controlled, ControlledVariable::ComSway);
  EXPECT_EQ(id.params[1].controlled, ControlledVariable::JointAngle);
}

TEST(LoopClosure, PerfectPredictorReproducesTraces) {
  const PlantModel plant = build_plant(Anthropometry::standard());
  const StimulusProfile stim = prts_profile();
  const auto d = DecDefaults::table();
  DatasetSettings s;
  s.n_target = 30;
  s.seed = 5;
  const Dataset ds = build_dataset(plant, d, stim, s);
  std::vector<std::size_t> trials{0, 3, 7};
  std::vector<Identified> ids;
  for (auto t : trials) ids.push_back({ds.trials[t].targets, ds.trials[t].params});
  const LoopClosureReport r = loop_closure(ds, trials, ids, plant, d, stim, 2);
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) {
    EXPECT_FALSE(row.diverged);
    EXPECT_EQ(row.e_id_deg, 0.0);
    EXPECT_EQ(row.param_mse, 0.0);
  }
  EXPECT_TRUE(std::isnan(r.correlation));
  EXPECT_EQ(r.correlated, 3u);
  EXPECT_EQ(r.max_e_id, 0.0);

  ids[1].params[0].kp *= 1.3;
  ids[1].targets[0].kp += 0.3;
  const LoopClosureReport r2 = loop_closure(ds, trials, ids, plant, d, stim, 1);
  EXPECT_GT(r2.rows[1].e_id_deg, 0.0);
  EXPECT_NEAR(r2.rows[1].param_mse, 0.3 / 15.0, 1e-12);
}
