#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "posture/dataset.hpp"
#include "posture/net.hpp"

namespace posture {

/// Regression and classification scores in standardized target space.
struct RmseMetrics {
  double total_rmse = 0.0;  // all components
  double fit_rmse = 0.0;    // continuous components only
  double accuracy = 0.0;    // fraction with matching C sign
  std::size_t count = 0;
};

/// `predictions` and `targets` hold `count` rows of `stats.width()`
/// standardized values; `categorical` lists the C columns. C signs are
/// compared after destandardizing.
RmseMetrics rmse_metrics(std::span<const float> predictions, std::span<const float> targets,
                         const Standardizer& stats, std::span<const std::size_t> categorical);

/// Per-column mean |error| and error variance in destandardized space.
struct ParameterErrors {
  std::vector<double> mean_abs;
  std::vector<double> variance;
};
ParameterErrors parameter_errors(std::span<const float> predictions, std::span<const float> targets,
                                 const Standardizer& stats);

/// Categorical column indices of a target layout of the given width (4, 9, 14).
std::vector<std::size_t> categorical_columns(std::size_t width);

/// ||a - b|| / N of two body sway series given in rad, returned in degrees.
double identification_error(std::span<const double> truth, std::span<const double> identified);

/// sqrt(e . e) / 15 for the 15 stacked module target errors.
double param_mse(std::span<const double> error);

/// Pearson correlation; NaN with fewer than two points or zero spread.
double pearson(std::span<const double> x, std::span<const double> y);

/// Parameters identified for one trial.
struct Identified {
  std::array<TargetVector, kJoints> targets;
  std::array<ModuleParams, kJoints> params;
};

/// Identified parameters from predicted target rows: continuous parts are
/// denormalized, C is decoded by sign.
Identified decode_targets(std::span<const double> values, const DecDefaults& defaults);

/// Raw (unstandardized) feature images of `count` samples in, destandardized
/// target rows out.
std::vector<double> predict_targets(const nn::Model& model, std::span<const float> raw_images, std::size_t count);

/// Identification of the given trials of a dataset with a modular or
/// monolithic model.
std::vector<Identified> identify_trials(const nn::Model& model, const Dataset& dataset,
                                        std::span<const std::size_t> trials, const DecDefaults& defaults);

struct LoopClosureRow {
  std::size_t trial = 0;
  double e_id_deg = 0.0;  // NaN when diverged
  double param_mse = 0.0;
  bool diverged = false;
};

struct LoopClosureReport {
  std::vector<LoopClosureRow> rows;
  double correlation = 0.0;  // E_id vs param_mse over non-diverged rows
  std::size_t correlated = 0;
  std::size_t diverged = 0;
  double median_e_id = 0.0;
  double max_e_id = 0.0;  // infinite when any row diverged
};

/// Re-simulates each trial with its identified parameters (no sway limit)
/// and compares the body sway with the stored one. The re-simulated series
/// is rounded to float like the stored traces.
LoopClosureReport loop_closure(const Dataset& dataset, std::span<const std::size_t> trials,
                               std::span<const Identified> identified, const PlantModel& plant,
                               const DecDefaults& defaults, const StimulusProfile& stimulus, std::size_t jobs);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
  std::size_t overflow_count = 0;  // terminal bin beyond the last edge
};

/// Normalized Kp of every module of the accepted trials, in [lo, hi) with
/// values outside clamped to the end bins.
Histogram kp_histogram(const Dataset& dataset, double lo = -1.0, double hi = 2.5, std::size_t bins = 35);

/// Peak |alpha_BS| of accepted trials in degrees over [0, limit); rejected
/// attempts are counted in the terminal bin.
Histogram sway_histogram(const Dataset& dataset, double limit_deg = 6.0, std::size_t bins = 12);

void write_histogram_csv(std::ostream& out, const Histogram& h, bool with_terminal);
void write_loop_closure_csv(std::ostream& out, const LoopClosureReport& report);

}  // namespace posture
