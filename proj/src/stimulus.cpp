#include "posture/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace posture {

TernaryTaps TernaryTaps::canonical() { return TernaryTaps{{1, 2, 0, 2, 2}, {1, 0, 0, 0, 0}}; }

std::vector<int> prts_sequence(std::size_t stages, const TernaryTaps& taps) {
  if (stages < 2) throw std::invalid_argument("PRTS needs at least 2 stages");
  const std::size_t degree = taps.coefficients.size();
  if (degree == 0 || taps.seed.size() != degree)
    throw std::invalid_argument("PRTS taps and seed must have the same non-zero length");
  auto valid = [](int v) { return v >= 0 && v <= 2; };
  if (!std::all_of(taps.coefficients.begin(), taps.coefficients.end(), valid) ||
      !std::all_of(taps.seed.begin(), taps.seed.end(), valid))
    throw std::invalid_argument("PRTS taps and seed must be GF(3) symbols");
  if (std::all_of(taps.seed.begin(), taps.seed.end(), [](int v) { return v == 0; }))
    throw std::invalid_argument("PRTS seed must not be all zero");

  std::vector<int> reg(taps.seed);
  std::vector<int> out;
  out.reserve(stages);
  for (std::size_t n = 0; n < stages; ++n) {
    const int symbol = reg.front();
    out.push_back(symbol == 2 ? -1 : symbol);
    int feedback = 0;
    for (std::size_t k = 0; k < degree; ++k) feedback += taps.coefficients[k] * reg[k];
    feedback = (3 - feedback % 3) % 3;
    std::rotate(reg.begin(), reg.begin() + 1, reg.end());
    reg.back() = feedback;
  }
  return out;
}

StimulusProfile::StimulusProfile(std::vector<int> sequence, double stage_duration, double peak_to_peak,
                                 double sample_rate)
    : sequence_(std::move(sequence)), stage_duration_(stage_duration), sample_rate_(sample_rate) {
  if (!(stage_duration > 0.0) || !(sample_rate > 0.0) || !(peak_to_peak >= 0.0))
    throw std::invalid_argument("stimulus: duration and rate must be positive, amplitude non-negative");

  // Angle at each stage boundary in units of velocity * stage_duration.
  std::vector<double> boundary(sequence_.size() + 1, 0.0);
  for (std::size_t i = 0; i < sequence_.size(); ++i) boundary[i + 1] = boundary[i] + sequence_[i];
  const auto [lo, hi] = std::minmax_element(boundary.begin(), boundary.end());
  const double span = *hi - *lo;
  velocity_ = span > 0.0 ? peak_to_peak / (span * stage_duration_) : 0.0;

  stage_start_angle_.resize(boundary.size());
  for (std::size_t i = 0; i < boundary.size(); ++i) stage_start_angle_[i] = boundary[i] * velocity_ * stage_duration_;

  const auto samples = static_cast<std::size_t>(std::floor(duration() * sample_rate_ + 1e-9)) + 1;
  tilt_.resize(samples);
  rate_.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    tilt_[i] = tilt_at(time(i));
    rate_[i] = rate_at(time(i));
  }
}

double StimulusProfile::rate_at(double t) const {
  if (t < 0.0) return 0.0;
  const auto stage = static_cast<std::size_t>(std::floor(t / stage_duration_ + 1e-12));
  if (stage >= sequence_.size()) return 0.0;
  return sequence_[stage] * velocity_;
}

double StimulusProfile::tilt_at(double t) const {
  if (t <= 0.0) return 0.0;
  const auto stage = static_cast<std::size_t>(std::floor(t / stage_duration_ + 1e-12));
  if (stage >= sequence_.size()) return stage_start_angle_.back();
  const double into = t - static_cast<double>(stage) * stage_duration_;
  return stage_start_angle_[stage] + sequence_[stage] * velocity_ * into;
}

void StimulusProfile::write_csv(std::ostream& out) const {
  out << "time_s,tilt_rad,rate_rad_s\n";
  char line[128];
  for (std::size_t i = 0; i < length(); ++i) {
    std::snprintf(line, sizeof line, "%.2f,%.12e,%.12e\n", time(i), tilt_[i], rate_[i]);
    out << line;
  }
}

StimulusProfile prts_profile(const StimulusSettings& settings, const TernaryTaps& taps) {
  return StimulusProfile(prts_sequence(settings.stages, taps), settings.stage_duration,
                         settings.peak_to_peak_deg * std::numbers::pi / 180.0, settings.sample_rate);
}

}  // namespace posture
