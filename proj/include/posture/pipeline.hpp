#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "posture/config.hpp"
#include "posture/eval.hpp"

namespace posture {

/// Input that cannot be used as given (bad files, formats, arguments).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulation or training run that blew up.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

PlantModel plant_for(const Config& config);
StimulusProfile stimulus_for(const Config& config);

/// Header time_s,alpha_fs_rad,alpha_ss_rad,alpha_ls_rad,alpha_ts_rad.
void write_trace_csv(std::ostream& out, const SimTrace& trace, double sample_rate);

/// Reads a trace CSV (columns by header name). alpha_ls_rad may be absent
/// when `need_thigh` is false, it is then taken equal to the shank. Refuses
/// traces whose length or sample spacing differ from the expected ones.
SimTrace read_trace_csv(const std::filesystem::path& path, std::size_t expected_samples, double sample_rate,
                        bool need_thigh);

/// Dataset directory plus config.ini and Kp / peak sway histograms.
Dataset run_dataset(const Config& config, const std::filesystem::path& out_dir);

/// Trains the modular or monolithic network on a dataset and writes the
/// checkpoint and its epoch history (<checkpoint stem>_history.csv).
nn::Model run_train(const Config& config, const Dataset& dataset, nn::ModelKind kind,
                    const std::filesystem::path& checkpoint, std::ostream* log = nullptr);

struct SplitMetrics {
  Split split = Split::Train;
  RmseMetrics model;
  RmseMetrics baseline;  // training-mean predictor
};

struct EvalReport {
  nn::ModelKind kind = nn::ModelKind::Modular;
  std::vector<SplitMetrics> splits;
  ParameterErrors test_errors;  // destandardized, per target column
  std::optional<LoopClosureReport> loop_closure;

  const SplitMetrics& at(Split s) const;
};

/// Metrics of a model on every non-empty split of the dataset.
EvalReport evaluate_model(const nn::Model& model, const Dataset& dataset);

/// Loop closure on the first `count` test trials.
LoopClosureReport run_loop_closure(const Config& config, const nn::Model& model, const Dataset& dataset,
                                   std::size_t count);

/// metrics.csv, parameter_errors.csv, loop_closure.csv (when present),
/// summary.txt and config.ini into out_dir.
void write_eval_report(const EvalReport& report, const Config& config, const std::filesystem::path& out_dir);

/// Side by side modular / monolithic test metrics: compare.csv and
/// compare.txt.
void write_comparison(const EvalReport& modular, const EvalReport& monolithic, const std::filesystem::path& out_dir);

struct IdentifiedModule {
  Joint joint;
  ModuleParams params;
  TargetVector target;
};

/// Predicts the parameters of the requested modules from a measured trace.
std::vector<IdentifiedModule> identify_trace(const nn::Model& model, const SimTrace& trace,
                                             const std::vector<Joint>& modules, const StftSettings& stft,
                                             const DecDefaults& defaults);

void write_identification(std::ostream& out, const std::vector<IdentifiedModule>& modules);

std::string format_number(double v);

}  // namespace posture
