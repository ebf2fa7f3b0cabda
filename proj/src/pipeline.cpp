#include "posture/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace posture {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

void echo_config(const Config& config, const fs::path& dir) {
  auto out = open_out(dir / "config.ini");
  write_config(out, config);
}

const char* kind_name(nn::ModelKind k) { return k == nn::ModelKind::Modular ? "modular" : "monolithic"; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

struct Prepared {
  FloatTensor images;
  FloatTensor targets;
  std::size_t count = 0;
};

bool is_modular(nn::ModelKind k) { return k == nn::ModelKind::Modular; }

std::vector<std::size_t> rows_for(const Dataset& ds, nn::ModelKind kind, Split s) {
  return is_modular(kind) ? ds.modular_indices(s) : ds.trial_indices(s);
}

Prepared prepare(const Dataset& ds, nn::ModelKind kind, const Standardizer& image_stats,
                 const Standardizer& target_stats, Split s) {
  const auto rows = rows_for(ds, kind, s);
  Prepared p;
  p.count = rows.size();
  if (rows.empty()) return p;
  p.images = normalized_images(is_modular(kind) ? ds.images : ds.mono_images, image_stats, rows);
  p.targets = standardized_targets(is_modular(kind) ? ds.targets : ds.mono_targets, target_stats, rows);
  return p;
}

}  // namespace

PlantModel plant_for(const Config& config) {
  try {
    return build_plant(config.anthropometry);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

StimulusProfile stimulus_for(const Config& config) {
  try {
    return prts_profile(config.stimulus, config.taps);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

void write_trace_csv(std::ostream& out, const SimTrace& trace, double sample_rate) {
  out << "time_s,alpha_fs_rad,alpha_ss_rad,alpha_ls_rad,alpha_ts_rad\n";
  char line[160];
  for (std::size_t i = 0; i < trace.length(); ++i) {
    std::snprintf(line, sizeof line, "%.2f,%.12e,%.12e,%.12e,%.12e\n", static_cast<double>(i) / sample_rate,
                  trace.alpha_fs[i], trace.alpha_ss[i], trace.alpha_ls[i], trace.alpha_ts[i]);
    out << line;
  }
}

SimTrace read_trace_csv(const fs::path& path, std::size_t expected_samples, double sample_rate, bool need_thigh) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  const std::string expected = "expected header time_s,alpha_fs_rad,alpha_ss_rad,alpha_ls_rad,alpha_ts_rad";
  for (const char* name : {"time_s", "alpha_fs_rad", "alpha_ss_rad", "alpha_ts_rad"})
    if (!column.count(name)) throw ValidationError(path.string() + ": missing column " + name + "; " + expected);
  const bool has_thigh = column.count("alpha_ls_rad") > 0;
  if (need_thigh && !has_thigh)
    throw ValidationError(path.string() + ": missing column alpha_ls_rad (required for the knee module)");

  std::vector<double> time;
  SimTrace t;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    auto get = [&](const char* name) {
      const std::size_t c = column.at(name);
      double v = 0.0;
      if (c >= cells.size()) throw ValidationError(path.string() + ":" + std::to_string(n) + ": too few columns");
      const std::string& s = cells[c];
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw ValidationError(path.string() + ":" + std::to_string(n) + ": bad number '" + s + "' in " + name);
      return v;
    };
    time.push_back(get("time_s"));
    t.alpha_fs.push_back(get("alpha_fs_rad"));
    t.alpha_ss.push_back(get("alpha_ss_rad"));
    t.alpha_ts.push_back(get("alpha_ts_rad"));
    t.alpha_ls.push_back(has_thigh ? get("alpha_ls_rad") : t.alpha_ss.back());
  }
  const std::string format = "; expected " + std::to_string(expected_samples) + " samples at " +
                             format_number(sample_rate) + " Hz (resampling is not supported)";
  if (time.size() != expected_samples)
    throw ValidationError(path.string() + ": " + std::to_string(time.size()) + " samples" + format);
  for (std::size_t i = 1; i < time.size(); ++i)
    if (std::abs(time[i] - time[0] - static_cast<double>(i) / sample_rate) > 1e-6)
      throw ValidationError(path.string() + ": sample spacing differs from " + format_number(1.0 / sample_rate) + " s" +
                            format);
  t.alpha_bs.assign(time.size(), 0.0);
  return t;
}

Dataset run_dataset(const Config& config, const fs::path& out_dir) {
  const PlantModel plant = plant_for(config);
  const StimulusProfile stimulus = stimulus_for(config);
  Dataset ds;
  try {
    ds = build_dataset(plant, config.dec, stimulus, config.dataset);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  } catch (const std::runtime_error& e) {
    throw DivergenceError(e.what());
  }
  save_dataset(ds, out_dir);
  echo_config(config, out_dir);
  auto kp = open_out(out_dir / "hist_kp.csv");
  write_histogram_csv(kp, kp_histogram(ds), false);
  auto sway = open_out(out_dir / "hist_peak_sway.csv");
  write_histogram_csv(sway, sway_histogram(ds, config.dataset.trial.sway_limit_deg > 0 ? config.dataset.trial.sway_limit_deg : 6.0), true);
  return ds;
}

nn::Model run_train(const Config& config, const Dataset& ds, nn::ModelKind kind, const fs::path& checkpoint,
                    std::ostream* log) {
  if (ds.images.dims.empty() || ds.mono_images.dims.empty())
    throw ValidationError("dataset has no feature images; run featurize first");
  const bool modular = is_modular(kind);
  nn::ArchSpec spec = modular ? config.modular_spec() : config.monolithic_spec();
  const FloatTensor& images = modular ? ds.images : ds.mono_images;
  if (images.dims.size() != 4 || images.dims[1] != spec.channels || images.dims[2] != spec.height ||
      images.dims[3] != spec.width)
    throw ValidationError("feature images do not match the configured network input");

  nn::Model model;
  model.kind = kind;
  model.image_stats = (modular ? ds.image_stats : ds.mono_image_stats).rounded_to_float();
  model.target_stats = (modular ? ds.target_stats : ds.mono_target_stats).rounded_to_float();
  const Prepared train = prepare(ds, kind, model.image_stats, model.target_stats, Split::Train);
  const Prepared val = prepare(ds, kind, model.image_stats, model.target_stats, Split::Validation);

  auto net = nn::Network<float>::init(spec, config.init_seed);
  nn::TrainResult result;
  try {
    result = nn::train(std::move(net), {train.images.data, train.targets.data, train.count},
                       {val.images.data, val.targets.data, val.count}, config.training, [&](const nn::EpochRecord& r) {
                         if (log)
                           *log << kind_name(kind) << " epoch " << r.epoch << " lr " << format_number(r.learning_rate)
                                << " train " << format_number(r.train_loss) << " val "
                                << format_number(r.validation_loss) << std::endl;
                       });
  } catch (const nn::TrainingDiverged& e) {
    throw DivergenceError(e.what());
  }
  model.network = std::move(result.best);
  model.history = std::move(result.history);
  model.best_epoch = result.best_epoch;

  if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());
  nn::save_model(model, checkpoint);
  auto hist = open_out(checkpoint.parent_path() / (checkpoint.stem().string() + "_history.csv"));
  hist << "epoch,learning_rate,train_loss,validation_loss\n";
  for (const auto& r : model.history)
    hist << r.epoch << ',' << format_number(r.learning_rate) << ',' << format_number(r.train_loss) << ','
         << format_number(r.validation_loss) << '\n';
  return model;
}

const SplitMetrics& EvalReport::at(Split s) const {
  for (const auto& m : splits)
    if (m.split == s) return m;
  throw std::out_of_range(std::string("no metrics for split ") + split_name(s));
}

EvalReport evaluate_model(const nn::Model& model, const Dataset& ds) {
  EvalReport rep;
  rep.kind = model.kind;
  const auto cats = categorical_columns(model.target_stats.width());
  for (Split s : {Split::Train, Split::Validation, Split::Test}) {
    const Prepared p = prepare(ds, model.kind, model.image_stats, model.target_stats, s);
    if (p.count == 0) continue;
    if (p.images.data.size() != p.count * model.network.spec().input_size())
      throw ValidationError("model input does not match the dataset images");
    const std::vector<float> pred = nn::predict(model.network, p.images.data, p.count);
    const std::vector<float> mean(pred.size(), 0.0f);
    SplitMetrics m;
    m.split = s;
    m.model = rmse_metrics(pred, p.targets.data, model.target_stats, cats);
    m.baseline = rmse_metrics(mean, p.targets.data, model.target_stats, cats);
    rep.splits.push_back(m);
    if (s == Split::Test) rep.test_errors = parameter_errors(pred, p.targets.data, model.target_stats);
  }
  return rep;
}

LoopClosureReport run_loop_closure(const Config& config, const nn::Model& model, const Dataset& ds,
                                   std::size_t count) {
  auto trials = ds.trial_indices(Split::Test);
  if (trials.size() > count) trials.resize(count);
  const auto ids = identify_trials(model, ds, trials, config.dec);
  return loop_closure(ds, trials, ids, plant_for(config), config.dec, stimulus_for(config), config.dataset.jobs);
}

void write_eval_report(const EvalReport& rep, const Config& config, const fs::path& dir) {
  fs::create_directories(dir);
  echo_config(config, dir);
  auto metrics = open_out(dir / "metrics.csv");
  metrics << "model,split,total_rmse,fit_rmse,accuracy,count\n";
  for (const auto& m : rep.splits)
    for (const auto& [name, r] : {std::pair{kind_name(rep.kind), m.model}, std::pair{"mean_predictor", m.baseline}})
      metrics << name << ',' << split_name(m.split) << ',' << format_number(r.total_rmse) << ','
              << format_number(r.fit_rmse) << ',' << format_number(r.accuracy) << ',' << r.count << '\n';

  static const char* params[kTargetDim] = {"kp", "ki", "kd", "delay", "cv"};
  auto errors = open_out(dir / "parameter_errors.csv");
  errors << "module,parameter,mean_abs_error,error_variance\n";
  for (std::size_t c = 0; c < rep.test_errors.mean_abs.size(); ++c) {
    const std::string module =
        is_modular(rep.kind) ? "all" : joint_name(static_cast<Joint>(c / kTargetDim));
    errors << module << ',' << params[c % kTargetDim] << ',' << format_number(rep.test_errors.mean_abs[c]) << ','
           << format_number(rep.test_errors.variance[c]) << '\n';
  }

  auto summary = open_out(dir / "summary.txt");
  summary << kind_name(rep.kind) << " model\n";
  for (const auto& m : rep.splits) {
    summary << split_name(m.split) << ": total RMSE " << format_number(m.model.total_rmse) << ", fit RMSE "
            << format_number(m.model.fit_rmse) << ", accuracy " << format_number(m.model.accuracy) << " (" << m.model.count
            << " samples); mean predictor fit RMSE " << format_number(m.baseline.fit_rmse) << ", accuracy "
            << format_number(m.baseline.accuracy) << '\n';
  }
  if (rep.loop_closure) {
    const auto& lc = *rep.loop_closure;
    auto csv = open_out(dir / "loop_closure.csv");
    write_loop_closure_csv(csv, lc);
    summary << "loop closure: " << lc.rows.size() << " trials, " << lc.diverged << " diverged, median E_id "
            << format_number(lc.median_e_id) << " deg, max E_id " << format_number(lc.max_e_id)
            << " deg, correlation E_id vs parameter MSE " << format_number(lc.correlation) << " (rows "
            << lc.correlated << ")\n";
  }
}

void write_comparison(const EvalReport& modular, const EvalReport& monolithic, const fs::path& dir) {
  auto csv = open_out(dir / "compare.csv");
  csv << "model,split,total_rmse,fit_rmse,accuracy,count\n";
  auto txt = open_out(dir / "compare.txt");
  for (const EvalReport* r : {&modular, &monolithic}) {
    const auto& m = r->at(Split::Test).model;
    csv << kind_name(r->kind) << ",test," << format_number(m.total_rmse) << ',' << format_number(m.fit_rmse) << ','
        << format_number(m.accuracy) << ',' << m.count << '\n';
    txt << kind_name(r->kind) << " test: total RMSE " << format_number(m.total_rmse) << ", fit RMSE "
        << format_number(m.fit_rmse) << ", accuracy " << format_number(m.accuracy) << '\n';
  }
  const double gap = modular.at(Split::Test).model.accuracy - monolithic.at(Split::Test).model.accuracy;
  txt << "accuracy gap (modular - monolithic): " << format_number(gap) << '\n';
}

std::vector<IdentifiedModule> identify_trace(const nn::Model& model, const SimTrace& trace,
                                             const std::vector<Joint>& modules, const StftSettings& stft,
                                             const DecDefaults& defaults) {
  if (!is_modular(model.kind)) throw ValidationError("identification needs a modular model");
  std::vector<IdentifiedModule> out;
  for (Joint j : modules) {
    const FeatureImage img = modular_image(trace, j, stft);
    const std::vector<double> v = predict_targets(model, img.data, 1);
    IdentifiedModule m{j, {}, TargetVector::from(v)};
    m.params = denormalize_params(m.target, defaults.active[static_cast<int>(j)]);
    out.push_back(m);
  }
  return out;
}

void write_identification(std::ostream& out, const std::vector<IdentifiedModule>& modules) {
  out << "module,kp,ki,kd,delay_s,controlled,kp_norm,ki_norm,kd_norm,delay_norm,cv_score\n";
  for (const auto& m : modules)
    out << joint_name(m.joint) << ',' << format_number(m.params.kp) << ',' << format_number(m.params.ki) << ','
        << format_number(m.params.kd) << ',' << format_number(m.params.delay) << ','
        << controlled_variable_name(m.params.controlled) << ',' << format_number(m.target.kp) << ','
        << format_number(m.target.ki) << ',' << format_number(m.target.kd) << ',' << format_number(m.target.delay)
        << ',' << format_number(m.target.cv) << '\n';
}

}  // namespace posture
