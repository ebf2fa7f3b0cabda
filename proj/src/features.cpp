#include "posture/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace posture {

namespace {

std::vector<double> window_weights(std::size_t n, WindowKind kind) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::Hann && n > 1)
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

std::vector<std::complex<double>> twiddles(std::size_t n) {
  std::vector<std::complex<double>> t(n);
  for (std::size_t k = 0; k < n; ++k)
    t[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  return t;
}

// DFT bins [0, bins) of a frame zero-padded (or truncated) to n points.
void dft(std::span<const double> x, const std::vector<double>& w, const std::vector<std::complex<double>>& tw,
         std::size_t bins, std::complex<double>* out) {
  const std::size_t n = tw.size();
  const std::size_t len = std::min(x.size(), n);
  for (std::size_t k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < len; ++i) {
      const double v = x[i] * w[i];
      re += v * tw[idx].real();
      im += v * tw[idx].imag();
      idx += k;
      if (idx >= n) idx -= n;
    }
    out[k] = {re, im};
  }
}

void fill_magnitude(const Spectrogram& s, FeatureImage& img, std::size_t channel, MagnitudeScale scale) {
  constexpr double kLogFloor = 1e-6;
  float* dst = img.data.data() + channel * img.plane();
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double m = std::abs(s.values[i]);
    dst[i] = static_cast<float>(scale == MagnitudeScale::Log ? std::log(m + kLogFloor) : m);
  }
}

void fill_phase(const Spectrogram& a, const Spectrogram& b, FeatureImage& img, std::size_t channel) {
  float* dst = img.data.data() + channel * img.plane();
  for (std::size_t i = 0; i < a.values.size(); ++i) dst[i] = static_cast<float>(phase_difference(a.values[i], b.values[i]));
}

FeatureImage blank(std::size_t channels, const StftSettings& settings) {
  FeatureImage img;
  img.channels = channels;
  img.height = settings.frames();
  img.width = settings.kept_bins;
  img.data.assign(channels * img.plane(), 0.0f);
  return img;
}

}  // namespace

std::vector<std::complex<double>> frame_spectrum(std::span<const double> frame, std::size_t fft_points,
                                                 WindowKind window) {
  if (fft_points == 0) throw std::invalid_argument("frame_spectrum: fft_points must be positive");
  std::vector<std::complex<double>> out(fft_points);
  dft(frame, window_weights(frame.size(), window), twiddles(fft_points), fft_points, out.data());
  return out;
}

Spectrogram spectrogram(std::span<const double> signal, const StftSettings& settings) {
  if (signal.size() != settings.signal_length)
    throw std::invalid_argument("spectrogram: expected " + std::to_string(settings.signal_length) + " samples, got " +
                                std::to_string(signal.size()));
  if (settings.window_length == 0 || settings.hop == 0 || settings.window_length > settings.signal_length ||
      settings.kept_bins > settings.fft_points)
    throw std::invalid_argument("spectrogram: inconsistent window settings");

  const auto w = window_weights(settings.window_length, settings.window);
  const auto tw = twiddles(settings.fft_points);
  Spectrogram s;
  s.frames = settings.frames();
  s.bins = settings.kept_bins;
  s.values.resize(s.frames * s.bins);
  for (std::size_t f = 0; f < s.frames; ++f)
    dft(signal.subspan(f * settings.hop, settings.window_length), w, tw, s.bins, s.values.data() + f * s.bins);
  return s;
}

double phase_difference(std::complex<double> a, std::complex<double> b) {
  constexpr double kTiny = 1e-12;
  const bool silent_a = std::abs(a) < kTiny, silent_b = std::abs(b) < kTiny;
  double d;
  if ((silent_a && silent_b) || a == b) return 0.0;
  if (silent_a) d = -std::arg(b);
  else if (silent_b) d = std::arg(a);
  else d = std::arg(a * std::conj(b));
  return d <= -std::numbers::pi ? std::numbers::pi : d;
}

std::pair<const std::vector<double>*, const std::vector<double>*> joint_segments(const SimTrace& trace,
                                                                                  Joint joint) {
  switch (joint) {
    case Joint::Ankle: return {&trace.alpha_fs, &trace.alpha_ss};
    case Joint::Knee: return {&trace.alpha_ss, &trace.alpha_ls};
    case Joint::Hip: return {&trace.alpha_ls, &trace.alpha_ts};
  }
  throw std::invalid_argument("unknown joint");
}

FeatureImage modular_image(const SimTrace& trace, Joint joint, const StftSettings& settings) {
  const auto [below, above] = joint_segments(trace, joint);
  const Spectrogram s_below = spectrogram(*below, settings);
  const Spectrogram s_above = spectrogram(*above, settings);
  FeatureImage img = blank(kModularChannels, settings);
  fill_magnitude(s_above, img, 0, settings.magnitude);
  fill_magnitude(s_below, img, 1, settings.magnitude);
  fill_phase(s_above, s_below, img, 2);
  return img;
}

FeatureImage monolithic_image(const SimTrace& trace, const StftSettings& settings) {
  const Spectrogram ss = spectrogram(trace.alpha_ss, settings);
  const Spectrogram ls = spectrogram(trace.alpha_ls, settings);
  const Spectrogram ts = spectrogram(trace.alpha_ts, settings);
  FeatureImage img = blank(kMonolithicChannels, settings);
  fill_magnitude(ss, img, 0, settings.magnitude);
  fill_magnitude(ls, img, 1, settings.magnitude);
  fill_magnitude(ts, img, 2, settings.magnitude);
  fill_phase(ss, ls, img, 3);
  fill_phase(ls, ts, img, 4);
  return img;
}

}  // namespace posture
