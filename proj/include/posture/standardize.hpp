#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace posture {

/// What the centred value is divided by.
enum class ScaleMode { Variance, StdDev };

/// Element-wise (x - mean) / scale with statistics fitted on the training
/// split, where scale is the variance or its square root. Variances below
/// kVarianceFloor are clamped and counted.
class Standardizer {
 public:
  static constexpr double kVarianceFloor = 1e-8;

  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> variance, ScaleMode mode = ScaleMode::Variance);

  /// Fits per-element population mean and variance over rows of length
  /// `width` taken from `data` at the given row indices.
  template <typename T>
  static Standardizer fit(std::span<const T> data, std::size_t width, std::span<const std::size_t> rows,
                          ScaleMode mode = ScaleMode::Variance);

  std::size_t width() const { return mean_.size(); }
  ScaleMode mode() const { return mode_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& variance() const { return variance_; }
  const std::vector<double>& scale() const { return scale_; }
  /// Number of elements whose variance was raised to the floor.
  std::size_t floored() const { return floored_; }

  /// Copy with mean and variance rounded to float, as stored in checkpoints.
  Standardizer rounded_to_float() const;

  void standardize(std::span<const double> in, std::span<double> out) const;
  void destandardize(std::span<const double> in, std::span<double> out) const;
  void standardize_in_place(std::span<float> row) const;

 private:
  std::vector<double> mean_;
  std::vector<double> variance_;  // floored
  std::vector<double> scale_;
  ScaleMode mode_ = ScaleMode::Variance;
  std::size_t floored_ = 0;
};

}  // namespace posture
