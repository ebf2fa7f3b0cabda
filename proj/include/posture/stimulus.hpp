#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace posture {

/// Feedback polynomial over GF(3): x^n + c[n-1] x^(n-1) + ... + c[1] x + c[0],
/// coefficients stored low order first.
struct TernaryTaps {
  std::vector<int> coefficients;
  std::vector<int> seed;  // initial register contents, not all zero

  /// Degree-5 primitive polynomial x^5 + 2x^4 + 2x^3 + 2x + 1, period 242.
  static TernaryTaps canonical();
};

/// Ternary maximum-length shift-register sequence mapped to {-1, 0, +1}
/// (register symbol 2 -> -1). Throws std::invalid_argument for stages < 2 or
/// malformed taps.
std::vector<int> prts_sequence(std::size_t stages, const TernaryTaps& taps = TernaryTaps::canonical());

/// Support-surface tilt profile: piecewise-constant velocity steps, angle
/// integrated from zero.
class StimulusProfile {
 public:
  StimulusProfile(std::vector<int> sequence, double stage_duration, double peak_to_peak, double sample_rate);

  double sample_rate() const { return sample_rate_; }
  double stage_duration() const { return stage_duration_; }
  double velocity() const { return velocity_; }
  double duration() const { return stage_duration_ * static_cast<double>(sequence_.size()); }
  const std::vector<int>& sequence() const { return sequence_; }

  /// Exact tilt angle (rad) and rate (rad/s) at time t; held after the end.
  double tilt_at(double t) const;
  double rate_at(double t) const;

  std::size_t length() const { return tilt_.size(); }
  const std::vector<double>& tilt() const { return tilt_; }
  const std::vector<double>& rate() const { return rate_; }
  double time(std::size_t i) const { return static_cast<double>(i) / sample_rate_; }

  void write_csv(std::ostream& out) const;

 private:
  std::vector<int> sequence_;
  std::vector<double> stage_start_angle_;
  double stage_duration_;
  double sample_rate_;
  double velocity_ = 0.0;
  std::vector<double> tilt_;
  std::vector<double> rate_;
};

struct StimulusSettings {
  std::size_t stages = 242;
  double stage_duration = 0.5;   // s
  double peak_to_peak_deg = 2.0;
  double sample_rate = 50.0;     // Hz
};

StimulusProfile prts_profile(const StimulusSettings& settings = {},
                             const TernaryTaps& taps = TernaryTaps::canonical());

}  // namespace posture
