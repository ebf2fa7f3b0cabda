#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "posture/net.hpp"

using namespace posture;
using namespace posture::nn;

namespace {

ArchSpec tiny() {
  ArchSpec s;
  s.height = s.width = 8;
  s.channels = 2;
  s.conv_widths = {3, 4};
  s.outputs = 3;
  return s;
}

std::vector<double> normal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST(Arch, ModularParameterCountByHand) {
  // 3x3 kernels: in*out*9 + out per block; spatial 51, 26, 13, 7, 4, 2.
  const std::size_t conv = (3 * 16 * 9 + 16) + (16 * 32 * 9 + 32) + (32 * 64 * 9 + 64) + (64 * 128 * 9 + 128) +
                           (128 * 128 * 9 + 128);
  const std::size_t head = 5 * (128 * 2 * 2) + 5;
  EXPECT_EQ(ArchSpec::modular().parameter_count(), conv + head);
  EXPECT_EQ(ArchSpec::modular().parameter_count(), 247589u);
  EXPECT_EQ(Network<float>::init(ArchSpec::modular(), 1).parameter_count(), 247589u);
  EXPECT_EQ(ArchSpec::modular().spatial_chain(), (std::vector<std::size_t>{51, 26, 13, 7, 4, 2}));
  EXPECT_EQ(ArchSpec::monolithic().channels, 5u);
  EXPECT_EQ(ArchSpec::monolithic().outputs, 15u);
}

TEST(Network, SeededInitIsReproducible) {
  const auto a = Network<float>::init(ArchSpec::modular(), 9), b = Network<float>::init(ArchSpec::modular(), 9);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_NE(a.parameters(), Network<float>::init(ArchSpec::modular(), 10).parameters());
}

TEST(Network, ZeroWeightsGiveZeroOutput) {
  const auto net = Network<float>::zeros(tiny());
  const auto x = normal(2 * tiny().input_size(), 1);
  const std::vector<float> xf(x.begin(), x.end());
  for (float y : net.forward(xf, 2)) EXPECT_EQ(y, 0.0f);
}

TEST(Network, BatchOfOneMatchesSingleForward) {
  const auto net = Network<float>::init(tiny(), 2);
  const auto x = normal(4 * tiny().input_size(), 3);
  const std::vector<float> xf(x.begin(), x.end());
  const auto all = net.forward(xf, 4);
  for (std::size_t b = 0; b < 4; ++b) {
    const auto one = net.forward(std::span<const float>(xf).subspan(b * tiny().input_size(), tiny().input_size()), 1);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(one[k], all[b * 3 + k]);
  }
}

TEST(Network, PositivelyHomogeneousWithZeroBiases) {
  const auto net = Network<double>::init(tiny(), 4);
  auto x = normal(tiny().input_size(), 5);
  const auto y = net.forward(x, 1);
  for (auto& v : x) v *= 2.5;
  const auto y2 = net.forward(x, 1);
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y2[k], 2.5 * y[k], 1e-12);
}

TEST(Network, LinearLayerGradientsByHand) {
  ArchSpec s;
  s.height = s.width = 1;
  s.channels = 2;
  s.conv_widths = {};
  s.outputs = 1;
  auto net = Network<double>::zeros(s);
  net.parameters() = {0.5, -1.0, 0.25};  // w1, w2, b
  const std::vector<double> x{1.0, 2.0, -1.0, 3.0}, t{0.0, 1.0};
  // y = (-1.25, -3.25), residual (-1.25, -4.25); loss = mean of squares.
  std::vector<double> g;
  Workspace<double> ws;
  const double loss = net.loss_and_grads(x, t, 2, g, ws);
  EXPECT_NEAR(loss, (1.25 * 1.25 + 4.25 * 4.25) / 2, 1e-12);
  EXPECT_NEAR(g[0], (-1.25 * 1.0 + -4.25 * -1.0), 1e-12);
  EXPECT_NEAR(g[1], (-1.25 * 2.0 + -4.25 * 3.0), 1e-12);
  EXPECT_NEAR(g[2], (-1.25 + -4.25), 1e-12);
}

TEST(Network, PerfectPredictionHasZeroLossAndGradient) {
  const auto net = Network<double>::init(tiny(), 6);
  const auto x = normal(2 * tiny().input_size(), 7);
  const auto y = net.forward(x, 2);
  std::vector<double> g;
  Workspace<double> ws;
  EXPECT_EQ(net.loss_and_grads(x, y, 2, g, ws), 0.0);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Network, GradientsMatchCentralDifferences) {
  auto net = Network<double>::init(tiny(), 5);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& p : net.parameters())
    if (p == 0.0) p = n(rng);
  const std::size_t B = 2;
  const auto x = normal(B * tiny().input_size(), 11), t = normal(B * 3, 12);
  std::vector<double> g, scratch;
  Workspace<double> ws;
  net.loss_and_grads(x, t, B, g, ws);
  double worst = 0.0;
  for (std::size_t i = 0; i < net.parameter_count(); ++i) {
    double& p = net.parameters()[i];
    const double old = p, h = 1e-6;
    p = old + h;
    const double lp = net.loss_and_grads(x, t, B, scratch, ws);
    p = old - h;
    const double lm = net.loss_and_grads(x, t, B, scratch, ws);
    p = old;
    const double fd = (lp - lm) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1e-8, std::abs(fd) + std::abs(g[i])));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Network, CastPreservesValues) {
  const auto d = Network<double>::init(tiny(), 8);
  const auto f = d.cast<float>();
  for (std::size_t i = 0; i < d.parameter_count(); ++i)
    EXPECT_EQ(f.parameters()[i], static_cast<float>(d.parameters()[i]));
}

namespace {

struct ToySet {
  std::vector<float> x, t;
  std::size_t n;
};

ToySet toy(std::size_t n, std::uint64_t seed) {
  const auto x = normal(n * tiny().input_size(), seed), t = normal(n * 3, seed + 1);
  return {std::vector<float>(x.begin(), x.end()), std::vector<float>(t.begin(), t.end()), n};
}

}  // namespace

TEST(Training, ZeroLearningRateLeavesParametersUnchanged) {
  const ToySet d = toy(20, 3);
  TrainSchedule s;
  s.learning_rate = 0.0;
  s.epochs = 5;
  s.batch_size = 8;
  const auto net = Network<float>::init(tiny(), 1);
  const auto r = train(net, {d.x, d.t, d.n}, {}, s);
  EXPECT_EQ(r.best.parameters(), net.parameters());
}

TEST(Training, DeterministicHistory) {
  const ToySet d = toy(20, 3), v = toy(6, 30);
  TrainSchedule s;
  s.learning_rate = 0.01;
  s.epochs = 6;
  s.batch_size = 8;
  const auto net = Network<float>::init(tiny(), 1);
  const auto a = train(net, {d.x, d.t, d.n}, {v.x, v.t, v.n}, s);
  const auto b = train(net, {d.x, d.t, d.n}, {v.x, v.t, v.n}, s);
  ASSERT_EQ(a.history.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].validation_loss, b.history[i].validation_loss);
  }
  EXPECT_EQ(a.best.parameters(), b.best.parameters());
}

TEST(Training, LearningRateSchedule) {
  const ToySet d = toy(8, 3);
  TrainSchedule s;
  s.learning_rate = 0.01;
  s.epochs = 5;
  s.lr_drop_every = 2;
  s.lr_drop_factor = 0.5;
  const auto r = train(Network<float>::init(tiny(), 1), {d.x, d.t, d.n}, {}, s);
  EXPECT_DOUBLE_EQ(r.history[0].learning_rate, 0.01);
  EXPECT_DOUBLE_EQ(r.history[2].learning_rate, 0.005);
  EXPECT_DOUBLE_EQ(r.history[4].learning_rate, 0.0025);
}

TEST(Training, FitsSmallSet) {
  const ToySet d = toy(16, 4);
  TrainSchedule s;
  s.learning_rate = 0.01;
  s.epochs = 300;
  s.batch_size = 16;
  const auto r = train(Network<float>::init(tiny(), 1), {d.x, d.t, d.n}, {}, s);
  EXPECT_LT(r.history.back().train_loss, 0.2 * r.history.front().train_loss);
}

TEST(Training, DivergenceIsReported) {
  const ToySet d = toy(16, 4);
  TrainSchedule s;
  s.learning_rate = 1e6;
  s.epochs = 20;
  EXPECT_THROW(train(Network<float>::init(tiny(), 1), {d.x, d.t, d.n}, {}, s), TrainingDiverged);
}

TEST(Checkpoint, RoundTrip) {
  Model m;
  m.kind = ModelKind::Monolithic;
  ArchSpec s = tiny();
  s.outputs = 15;
  m.network = Network<float>::init(s, 3);
  m.image_stats = Standardizer(std::vector<double>(s.input_size(), 0.5), std::vector<double>(s.input_size(), 4.0),
                               ScaleMode::StdDev);
  m.target_stats = Standardizer(std::vector<double>(15, -0.25), std::vector<double>(15, 0.2));
  m.history = {{1, 0.01, 2.0, 3.0}, {2, 0.01, 1.5, 2.5}};
  m.best_epoch = 2;
  const auto path = std::filesystem::temp_directory_path() / "posture_ckpt_roundtrip.ckpt";
  save_model(m, path);
  const Model b = load_model(path);
  EXPECT_EQ(b.kind, ModelKind::Monolithic);
  EXPECT_EQ(b.network.spec(), s);
  EXPECT_EQ(b.network.parameters(), m.network.parameters());
  EXPECT_EQ(b.image_stats.scale(), m.image_stats.scale());
  EXPECT_EQ(b.image_stats.mode(), ScaleMode::StdDev);
  EXPECT_EQ(b.target_stats.mean(), m.target_stats.mean());
  EXPECT_EQ(b.target_stats.mode(), ScaleMode::Variance);
  ASSERT_EQ(b.history.size(), 2u);
  EXPECT_EQ(b.history[1].validation_loss, 2.5);
  EXPECT_EQ(b.best_epoch, 2u);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignFile) {
  const auto path = std::filesystem::temp_directory_path() / "posture_not_a_ckpt.bin";
  std::ofstream(path) << "hello world";
  EXPECT_THROW(load_model(path), std::exception);
  std::filesystem::remove(path);
}
