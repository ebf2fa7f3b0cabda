#include "posture/standardize.hpp"

#include <cmath>
#include <stdexcept>

namespace posture {

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> variance, ScaleMode mode)
    : mean_(std::move(mean)), variance_(std::move(variance)), mode_(mode) {
  if (mean_.size() != variance_.size()) throw std::invalid_argument("standardizer: mean/variance size mismatch");
  scale_.resize(variance_.size());
  for (std::size_t i = 0; i < variance_.size(); ++i) {
    if (!(variance_[i] >= kVarianceFloor)) {
      variance_[i] = kVarianceFloor;
      ++floored_;
    }
    scale_[i] = mode_ == ScaleMode::Variance ? variance_[i] : std::sqrt(variance_[i]);
  }
}

template <typename T>
Standardizer Standardizer::fit(std::span<const T> data, std::size_t width, std::span<const std::size_t> rows,
                               ScaleMode mode) {
  if (rows.empty()) throw std::invalid_argument("standardizer: no training rows");
  std::vector<double> mean(width, 0.0), var(width, 0.0);
  // Two passes in fixed row order so the result does not depend on threading.
  for (std::size_t r : rows) {
    const T* row = data.data() + r * width;
    for (std::size_t i = 0; i < width; ++i) mean[i] += static_cast<double>(row[i]);
  }
  const double n = static_cast<double>(rows.size());
  for (auto& m : mean) m /= n;
  for (std::size_t r : rows) {
    const T* row = data.data() + r * width;
    for (std::size_t i = 0; i < width; ++i) {
      const double d = static_cast<double>(row[i]) - mean[i];
      var[i] += d * d;
    }
  }
  for (auto& v : var) v /= n;
  return Standardizer(std::move(mean), std::move(var), mode);
}

template Standardizer Standardizer::fit<double>(std::span<const double>, std::size_t, std::span<const std::size_t>,
                                                ScaleMode);
template Standardizer Standardizer::fit<float>(std::span<const float>, std::size_t, std::span<const std::size_t>,
                                               ScaleMode);

Standardizer Standardizer::rounded_to_float() const {
  auto round = [](std::vector<double> v) {
    for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
    return v;
  };
  return Standardizer(round(mean_), round(variance_), mode_);
}

void Standardizer::standardize(std::span<const double> in, std::span<double> out) const {
  if (in.size() != width() || out.size() != width()) throw std::invalid_argument("standardize: width mismatch");
  for (std::size_t i = 0; i < width(); ++i) out[i] = (in[i] - mean_[i]) / scale_[i];
}

void Standardizer::destandardize(std::span<const double> in, std::span<double> out) const {
  if (in.size() != width() || out.size() != width()) throw std::invalid_argument("destandardize: width mismatch");
  for (std::size_t i = 0; i < width(); ++i) out[i] = in[i] * scale_[i] + mean_[i];
}

void Standardizer::standardize_in_place(std::span<float> row) const {
  if (row.size() != width()) throw std::invalid_argument("standardize: width mismatch");
  for (std::size_t i = 0; i < width(); ++i)
    row[i] = static_cast<float>((static_cast<double>(row[i]) - mean_[i]) / scale_[i]);
}

}  // namespace posture
