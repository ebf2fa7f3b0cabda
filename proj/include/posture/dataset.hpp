#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "posture/dec.hpp"
#include "posture/features.hpp"
#include "posture/standardize.hpp"
#include "posture/stimulus.hpp"
#include "posture/tensor_io.hpp"
#include "posture/trial.hpp"

namespace posture {

inline constexpr std::size_t kTargetDim = 5;
inline constexpr std::size_t kMonolithicTargetDim = kJoints * kTargetDim;
/// Index of the categorical component within a module target.
inline constexpr std::size_t kCategoricalIndex = 4;

/// Normalized deviations from the defaults plus the controlled-variable code.
struct TargetVector {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double delay = 0.0;
  double cv = 1.0;  // +1 COM sway, -1 joint angle

  std::array<double, kTargetDim> values() const { return {kp, ki, kd, delay, cv}; }
  static TargetVector from(std::span<const double> v);
};

/// (value - default) / default per continuous parameter.
TargetVector normalize_params(const ModuleParams& params, const ModuleParams& defaults);
/// Inverse of normalize_params, clamped at zero for deviations below -1; the
/// categorical component is decoded by sign.
ModuleParams denormalize_params(const TargetVector& target, const ModuleParams& defaults);

struct SamplingSettings {
  double deviation_sigma = 0.5;  // std. dev. of the normal deviation draw
};

struct ParameterDraw {
  std::array<ModuleParams, kJoints> params;
  std::array<TargetVector, kJoints> targets;
};

/// Per module and continuous parameter: x ~ N(0, sigma), value =
/// default * |1 + x|; C uniform on {-1, +1}.
ParameterDraw sample_parameters(std::mt19937_64& rng, const DecDefaults& defaults,
                                const SamplingSettings& settings = {});

/// Parameter value for a given deviation draw x: default * |1 + x|.
double warp_deviation(double default_value, double x);

/// Random stream for trial `index` of a dataset seeded with `seed`.
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t index);

enum class Split : std::uint8_t { Train = 0, Validation = 1, Test = 2 };
const char* split_name(Split s);

struct AttemptRecord {
  std::uint64_t index = 0;
  bool accepted = false;
  bool diverged = false;
  double peak_sway = 0.0;   // rad
  double abort_time = 0.0;  // s, 0 when accepted
};

struct TrialRecord {
  std::uint64_t index = 0;  // attempt index (rng stream)
  std::array<ModuleParams, kJoints> params;
  std::array<TargetVector, kJoints> targets;
  double peak_sway = 0.0;
};

struct DatasetSettings {
  std::size_t n_target = 30;  // modular samples; ceil(n/3) accepted trials
  std::uint64_t seed = 1;
  std::array<double, 3> split_fractions{0.7, 0.15, 0.15};
  SamplingSettings sampling;
  TrialSettings trial;
  StftSettings stft;
  std::size_t jobs = 1;
  double min_acceptance = 0.01;
  std::size_t min_attempts_before_abort = 200;
};

/// Trial series stored per dataset: FS, SS, LS, TS, BS.
inline constexpr std::size_t kTraceChannels = 5;

/// Accepted trials, their sway series, feature images and normalization
/// statistics. Modular sample i belongs to trial i / 3 and joint i % 3.
struct Dataset {
  DatasetSettings settings;
  std::vector<TrialRecord> trials;
  std::vector<AttemptRecord> attempts;
  std::vector<Split> trial_split;

  FloatTensor traces;           // [trials, 5, samples]
  FloatTensor images;           // [3 * trials, 3, H, W]
  FloatTensor mono_images;      // [trials, 5, H, W]
  FloatTensor targets;          // [3 * trials, 5]
  FloatTensor mono_targets;     // [trials, 15]

  Standardizer target_stats;
  Standardizer mono_target_stats;
  Standardizer image_stats;
  Standardizer mono_image_stats;

  std::size_t trial_count() const { return trials.size(); }
  std::size_t sample_count() const { return trials.size() * kJoints; }
  Split sample_split(std::size_t sample) const { return trial_split[sample / kJoints]; }

  /// Sample indices (modular or trial-level) in the given split.
  std::vector<std::size_t> modular_indices(Split s) const;
  std::vector<std::size_t> trial_indices(Split s) const;

  /// Rebuilds the sway series of one trial from the stored traces.
  SimTrace trace(std::size_t trial) const;
};

/// Number of trials per split for n trials: round(f0 n), round(f1 n), rest.
std::array<std::size_t, 3> split_sizes(std::size_t trials, const std::array<double, 3>& fractions);

/// Simulates random parameter draws until ceil(n_target / 3) trials are
/// accepted, featurizes them and fits statistics on the training split.
/// Throws std::runtime_error if the acceptance rate falls below the minimum.
Dataset build_dataset(const PlantModel& plant, const DecDefaults& defaults, const StimulusProfile& stimulus,
                      const DatasetSettings& settings);

/// Recomputes feature images and image statistics from the stored traces.
void featurize(Dataset& dataset);

/// Recomputes target tensors and target statistics from the trial records.
void assemble_targets(Dataset& dataset);

/// Standardized copy of the images of the given samples.
FloatTensor normalized_images(const FloatTensor& images, const Standardizer& stats,
                              std::span<const std::size_t> rows);
FloatTensor standardized_targets(const FloatTensor& targets, const Standardizer& stats,
                                 std::span<const std::size_t> rows);

// Directory persistence: manifest.json, traces.bin, images.bin,
// images_mono.bin, targets.bin, targets_mono.bin, splits.bin.
inline constexpr int kDatasetFormatVersion = 1;
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace posture
