#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "posture/features.hpp"

using namespace posture;

namespace {

std::vector<double> sinusoid(double hz, std::size_t n = 6051, double fs = 50.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * hz * i / fs + phase);
  return x;
}

SimTrace trace_of(std::vector<double> fs, std::vector<double> ss, std::vector<double> ls, std::vector<double> ts) {
  SimTrace t;
  t.alpha_fs = std::move(fs);
  t.alpha_ss = std::move(ss);
  t.alpha_ls = std::move(ls);
  t.alpha_ts = std::move(ts);
  t.alpha_bs.assign(t.alpha_ss.size(), 0.0);
  return t;
}

}  // namespace

TEST(Stft, FrameAndBinArithmetic) {
  const StftSettings s;
  EXPECT_EQ(s.frames(), 51u);
  const Spectrogram sp = spectrogram(sinusoid(1.0), s);
  EXPECT_EQ(sp.frames, 51u);
  EXPECT_EQ(sp.bins, 51u);
  EXPECT_THROW(spectrogram(std::vector<double>(6000, 0.0), s), std::invalid_argument);
}

TEST(Stft, ConstantSignalOnlyInDcBin) {
  const Spectrogram sp = spectrogram(std::vector<double>(6051, 0.7));
  for (std::size_t f = 0; f < sp.frames; ++f) {
    EXPECT_NEAR(std::abs(sp.at(f, 0)), 0.7 * 250, 1e-9);
    for (std::size_t b = 1; b < sp.bins; ++b) EXPECT_LE(std::abs(sp.at(f, b)), 1e-9 * 0.7 * 250);
  }
}

TEST(Stft, OneHertzPeaksAtBinFive) {
  const Spectrogram sp = spectrogram(sinusoid(1.0));
  for (std::size_t f = 0; f < sp.frames; ++f) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < sp.bins; ++b)
      if (std::abs(sp.at(f, b)) > std::abs(sp.at(f, best))) best = b;
    EXPECT_EQ(best, 5u);
    EXPECT_NEAR(std::abs(sp.at(f, 5)), 125.0, 1e-9);
  }
}

TEST(Stft, ParsevalPerFrame) {
  std::vector<double> x(6051);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.37 * i) + 0.2 * std::cos(1.9 * i + 0.4) + 1e-3 * (i % 7);
  const StftSettings s;
  for (std::size_t f = 0; f < s.frames(); ++f) {
    std::span<const double> frame(x.data() + f * s.hop, s.window_length);
    const auto X = frame_spectrum(frame, s.fft_points);
    double time = 0.0, freq = 0.0;
    for (double v : frame) time += v * v;
    for (const auto& c : X) freq += std::norm(c);
    freq /= static_cast<double>(s.fft_points);
    EXPECT_LE(std::abs(time - freq) / time, 1e-9);
  }
}

TEST(Stft, DftMatchesDirectSum) {
  std::vector<double> x(250);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::cos(0.1 * i * i);
  const auto X = frame_spectrum(x, 250);
  for (std::size_t k : {0u, 3u, 17u, 50u, 124u, 125u}) {
    std::complex<double> d = 0.0;
    for (std::size_t n = 0; n < 250; ++n) d += x[n] * std::polar(1.0, -2 * std::numbers::pi * k * n / 250.0);
    EXPECT_LE(std::abs(X[k] - d), 1e-9);
  }
}

TEST(Phase, WrapsAndIgnoresSilentBins) {
  EXPECT_NEAR(phase_difference(std::polar(1.0, 3.0), std::polar(1.0, -3.0)), 6.0 - 2 * std::numbers::pi, 1e-12);
  EXPECT_EQ(phase_difference({1.0, 0.0}, {-1.0, 0.0}), std::numbers::pi);
  EXPECT_EQ(phase_difference({0.0, 0.0}, {0.0, 1.0}), -std::numbers::pi / 2);
}

TEST(ModularImage, ChannelsAndPhaseInvariants) {
  const auto s = sinusoid(0.6), neg = [&] {
    auto v = s;
    for (auto& x : v) x = -x;
    return v;
  }();
  const SimTrace same = trace_of(s, s, s, s);
  const FeatureImage a = modular_image(same, Joint::Knee);
  EXPECT_EQ(a.channels, 3u);
  EXPECT_EQ(a.height, 51u);
  EXPECT_EQ(a.width, 51u);
  for (std::size_t i = 0; i < a.plane(); ++i) EXPECT_EQ(a.data[2 * a.plane() + i], 0.0f);

  const SimTrace anti = trace_of(s, s, neg, s);
  const FeatureImage b = modular_image(anti, Joint::Knee);
  for (std::size_t h = 0; h < b.height; ++h)
    EXPECT_FLOAT_EQ(b.at(2, h, 3), static_cast<float>(std::numbers::pi));  // 0.6 Hz sits on bin 3
}

TEST(ModularImage, QuietTraceHasOnlyDc) {
  const std::vector<double> zero(6051, 0.0);
  const FeatureImage img = modular_image(trace_of(zero, zero, zero, zero), Joint::Ankle);
  for (float v : img.data) EXPECT_EQ(v, 0.0f);
}

TEST(ModularImage, LogMagnitudeScale) {
  const SimTrace t = trace_of(sinusoid(0.3), sinusoid(1.0), sinusoid(0.7), sinusoid(1.1));
  StftSettings log_scale;
  log_scale.magnitude = MagnitudeScale::Log;
  const FeatureImage lin = modular_image(t, Joint::Ankle);
  const FeatureImage lg = modular_image(t, Joint::Ankle, log_scale);
  for (std::size_t i = 0; i < 2 * lin.plane(); ++i)
    EXPECT_NEAR(lg.data[i], std::log(static_cast<double>(lin.data[i]) + 1e-6), 1e-6);
  for (std::size_t i = 2 * lin.plane(); i < lin.data.size(); ++i) EXPECT_EQ(lg.data[i], lin.data[i]);
  EXPECT_NEAR(lg.at(0, 0, 5), std::log(125.0), 1e-5);
}

TEST(MonolithicImage, ShapeAndSharedMagnitudes) {
  const SimTrace t = trace_of(sinusoid(0.3), sinusoid(0.5), sinusoid(0.7, 6051, 50.0, 0.3), sinusoid(1.1));
  const FeatureImage mono = monolithic_image(t);
  EXPECT_EQ(mono.channels, 5u);
  EXPECT_EQ(mono.height, 51u);
  EXPECT_EQ(mono.width, 51u);
  const FeatureImage knee = modular_image(t, Joint::Knee), hip = modular_image(t, Joint::Hip);
  const std::size_t p = mono.plane();
  for (std::size_t i = 0; i < p; ++i) {
    EXPECT_EQ(mono.data[0 * p + i], knee.data[1 * p + i]);  // |SS|
    EXPECT_EQ(mono.data[1 * p + i], knee.data[0 * p + i]);  // |LS|
    EXPECT_EQ(mono.data[2 * p + i], hip.data[0 * p + i]);   // |TS|
    // Phase channels run bottom-up here and top-down in the modular images.
    if (std::abs(knee.data[2 * p + i]) < 3.14f) EXPECT_EQ(mono.data[3 * p + i], -knee.data[2 * p + i]);
    if (std::abs(hip.data[2 * p + i]) < 3.14f) EXPECT_EQ(mono.data[4 * p + i], -hip.data[2 * p + i]);
  }
}

TEST(MonolithicImage, EqualSegmentsGiveZeroPhase) {
  const auto s = sinusoid(0.8);
  const FeatureImage mono = monolithic_image(trace_of(s, s, s, s));
  const std::size_t p = mono.plane();
  for (std::size_t i = 0; i < p; ++i) {
    EXPECT_EQ(mono.data[3 * p + i], 0.0f);
    EXPECT_EQ(mono.data[4 * p + i], 0.0f);
  }
}
