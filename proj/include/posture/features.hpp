#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "posture/plant.hpp"
#include "posture/trial.hpp"

namespace posture {

enum class WindowKind { Rectangular, Hann };

/// Magnitude channels as |S| or as log(|S| + 1e-6).
enum class MagnitudeScale { Linear, Log };

struct StftSettings {
  std::size_t signal_length = 6051;
  std::size_t window_length = 250;
  std::size_t hop = 115;           // window_length - overlap (135)
  std::size_t fft_points = 250;
  std::size_t kept_bins = 51;      // 0 .. 10 Hz at 50 Hz sampling
  WindowKind window = WindowKind::Rectangular;
  MagnitudeScale magnitude = MagnitudeScale::Linear;

  std::size_t frames() const { return 1 + (signal_length - window_length) / hop; }
};

/// Row-major frames x kept_bins matrix of complex STFT coefficients.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> values;

  const std::complex<double>& at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
};

/// All fft_points DFT coefficients of one windowed frame.
std::vector<std::complex<double>> frame_spectrum(std::span<const double> frame, std::size_t fft_points,
                                                 WindowKind window = WindowKind::Rectangular);

/// Short-time Fourier transform keeping the low-frequency bins.
/// Throws std::invalid_argument if the signal length differs from settings.
Spectrogram spectrogram(std::span<const double> signal, const StftSettings& settings = {});

/// Phase difference wrapped to (-pi, pi]; bins with magnitude below 1e-12
/// are treated as phase 0.
double phase_difference(std::complex<double> a, std::complex<double> b);

/// Channel-major (C, H = frames, W = bins) float image.
struct FeatureImage {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  std::size_t plane() const { return height * width; }
  float at(std::size_t c, std::size_t h, std::size_t w) const { return data[(c * height + h) * width + w]; }
};

inline constexpr std::size_t kModularChannels = 3;
inline constexpr std::size_t kMonolithicChannels = 5;

/// Segments (below, above) a joint: ankle (FS, SS), knee (SS, LS), hip (LS, TS).
std::pair<const std::vector<double>*, const std::vector<double>*> joint_segments(const SimTrace& trace, Joint joint);

/// Channels |S_above|, |S_below|, arg S_above - arg S_below (magnitudes
/// scaled per settings.magnitude).
FeatureImage modular_image(const SimTrace& trace, Joint joint, const StftSettings& settings = {});

/// Channels |S_SS|, |S_LS|, |S_TS|, arg S_SS - arg S_LS, arg S_LS - arg S_TS.
FeatureImage monolithic_image(const SimTrace& trace, const StftSettings& settings = {});

}  // namespace posture
