#include "posture/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "posture/parallel.hpp"

namespace posture {

using nlohmann::json;

TargetVector TargetVector::from(std::span<const double> v) {
  if (v.size() != kTargetDim) throw std::invalid_argument("target vector needs 5 components");
  return TargetVector{v[0], v[1], v[2], v[3], v[4]};
}

TargetVector normalize_params(const ModuleParams& p, const ModuleParams& d) {
  return TargetVector{(p.kp - d.kp) / d.kp, (p.ki - d.ki) / d.ki, (p.kd - d.kd) / d.kd, (p.delay - d.delay) / d.delay,
                      controlled_variable_code(p.controlled)};
}

ModuleParams denormalize_params(const TargetVector& t, const ModuleParams& d) {
  auto value = [](double def, double k) { return def * std::max(0.0, 1.0 + k); };
  return ModuleParams{value(d.kp, t.kp), value(d.ki, t.ki), value(d.kd, t.kd), value(d.delay, t.delay),
                      decode_controlled_variable(t.cv)};
}

double warp_deviation(double default_value, double x) { return default_value * std::abs(1.0 + x); }

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

ParameterDraw sample_parameters(std::mt19937_64& rng, const DecDefaults& defaults, const SamplingSettings& settings) {
  std::normal_distribution<double> deviation(0.0, settings.deviation_sigma);
  std::bernoulli_distribution coin(0.5);
  ParameterDraw draw;
  for (int j = 0; j < kJoints; ++j) {
    const ModuleParams& d = defaults.active[j];
    std::array<double, 4> x{};
    for (auto& v : x) v = deviation(rng);
    const bool com = coin(rng);
    ModuleParams& p = draw.params[j];
    p.kp = warp_deviation(d.kp, x[0]);
    p.ki = warp_deviation(d.ki, x[1]);
    p.kd = warp_deviation(d.kd, x[2]);
    p.delay = warp_deviation(d.delay, x[3]);
    p.controlled = com ? ControlledVariable::ComSway : ControlledVariable::JointAngle;
    draw.targets[j] = TargetVector{std::abs(1.0 + x[0]) - 1.0, std::abs(1.0 + x[1]) - 1.0,
                                   std::abs(1.0 + x[2]) - 1.0, std::abs(1.0 + x[3]) - 1.0, com ? 1.0 : -1.0};
  }
  return draw;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

std::array<std::size_t, 3> split_sizes(std::size_t trials, const std::array<double, 3>& f) {
  if (f[0] < 0 || f[1] < 0 || f[2] < 0 || std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must be non-negative and sum to 1");
  const auto n = static_cast<double>(trials);
  auto train = static_cast<std::size_t>(std::llround(f[0] * n));
  auto val = static_cast<std::size_t>(std::llround(f[1] * n));
  train = std::min(train, trials);
  val = std::min(val, trials - train);
  return {train, val, trials - train - val};
}

std::vector<std::size_t> Dataset::modular_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample_count(); ++i)
    if (sample_split(i) == s) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::trial_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < trial_count(); ++i)
    if (trial_split[i] == s) out.push_back(i);
  return out;
}

SimTrace Dataset::trace(std::size_t trial) const {
  if (trial >= trial_count()) throw std::out_of_range("trial index out of range");
  const std::size_t samples = traces.dims.at(2);
  SimTrace t;
  std::vector<double>* series[kTraceChannels] = {&t.alpha_fs, &t.alpha_ss, &t.alpha_ls, &t.alpha_ts, &t.alpha_bs};
  for (std::size_t c = 0; c < kTraceChannels; ++c) {
    const float* src = traces.data.data() + (trial * kTraceChannels + c) * samples;
    series[c]->assign(src, src + samples);
  }
  t.params = trials[trial].params;
  return t;
}

namespace {

void fill_trace(FloatTensor& traces, std::size_t trial, const SimTrace& t) {
  const std::size_t samples = traces.dims[2];
  const std::vector<double>* series[kTraceChannels] = {&t.alpha_fs, &t.alpha_ss, &t.alpha_ls, &t.alpha_ts, &t.alpha_bs};
  for (std::size_t c = 0; c < kTraceChannels; ++c) {
    float* dst = traces.data.data() + (trial * kTraceChannels + c) * samples;
    for (std::size_t i = 0; i < samples; ++i) dst[i] = static_cast<float>((*series[c])[i]);
  }
}

std::vector<std::size_t> expand_rows(const std::vector<std::size_t>& trials, std::size_t per_trial) {
  std::vector<std::size_t> rows;
  rows.reserve(trials.size() * per_trial);
  for (auto t : trials)
    for (std::size_t k = 0; k < per_trial; ++k) rows.push_back(t * per_trial + k);
  return rows;
}

}  // namespace

void assemble_targets(Dataset& ds) {
  const std::size_t n = ds.trial_count();
  ds.targets = FloatTensor{{n * kJoints, kTargetDim}, std::vector<float>(n * kJoints * kTargetDim)};
  ds.mono_targets = FloatTensor{{n, kMonolithicTargetDim}, std::vector<float>(n * kMonolithicTargetDim)};
  for (std::size_t t = 0; t < n; ++t)
    for (int j = 0; j < kJoints; ++j) {
      const auto v = ds.trials[t].targets[j].values();
      for (std::size_t k = 0; k < kTargetDim; ++k) {
        ds.targets.data[(t * kJoints + j) * kTargetDim + k] = static_cast<float>(v[k]);
        ds.mono_targets.data[t * kMonolithicTargetDim + j * kTargetDim + k] = static_cast<float>(v[k]);
      }
    }
  const auto train = ds.trial_indices(Split::Train);
  const auto rows = expand_rows(train, kJoints);
  ds.target_stats = Standardizer::fit<float>(ds.targets.data, kTargetDim, rows);
  ds.mono_target_stats = Standardizer::fit<float>(ds.mono_targets.data, kMonolithicTargetDim, train);
}

void featurize(Dataset& ds) {
  const std::size_t n = ds.trial_count();
  const StftSettings& stft = ds.settings.stft;
  const std::size_t h = stft.frames(), w = stft.kept_bins;
  const std::size_t mod_width = kModularChannels * h * w, mono_width = kMonolithicChannels * h * w;
  ds.images = FloatTensor{{n * kJoints, kModularChannels, h, w}, std::vector<float>(n * kJoints * mod_width)};
  ds.mono_images = FloatTensor{{n, kMonolithicChannels, h, w}, std::vector<float>(n * mono_width)};

  parallel_for(n, ds.settings.jobs, [&](std::size_t t) {
    const SimTrace trace = ds.trace(t);
    for (int j = 0; j < kJoints; ++j) {
      const FeatureImage img = modular_image(trace, static_cast<Joint>(j), stft);
      std::copy(img.data.begin(), img.data.end(), ds.images.data.begin() + (t * kJoints + j) * mod_width);
    }
    const FeatureImage mono = monolithic_image(trace, stft);
    std::copy(mono.data.begin(), mono.data.end(), ds.mono_images.data.begin() + t * mono_width);
  });

  const auto train = ds.trial_indices(Split::Train);
  ds.image_stats = Standardizer::fit<float>(ds.images.data, mod_width, expand_rows(train, kJoints), ScaleMode::StdDev);
  ds.mono_image_stats = Standardizer::fit<float>(ds.mono_images.data, mono_width, train, ScaleMode::StdDev);
}

Dataset build_dataset(const PlantModel& plant, const DecDefaults& defaults, const StimulusProfile& stimulus,
                      const DatasetSettings& settings) {
  if (settings.n_target < 30) throw std::invalid_argument("dataset: n_target must be at least 30");
  const std::size_t wanted = (settings.n_target + kJoints - 1) / kJoints;
  const std::size_t jobs = std::max<std::size_t>(1, settings.jobs);
  const std::size_t wave = std::max<std::size_t>(16, jobs * 8);

  Dataset ds;
  ds.settings = settings;
  std::vector<SimTrace> accepted;
  accepted.reserve(wanted);

  std::uint64_t next_index = 0;
  while (accepted.size() < wanted) {
    std::vector<ParameterDraw> draws(wave);
    std::vector<std::optional<TrialOutcome>> outcomes(wave);
    parallel_for(wave, jobs, [&](std::size_t k) {
      auto rng = trial_rng(settings.seed, next_index + k);
      draws[k] = sample_parameters(rng, defaults, settings.sampling);
      outcomes[k] = run_trial(plant, draws[k].params, defaults, stimulus, settings.trial);
    });
    // Consume in index order so the result does not depend on the job count.
    for (std::size_t k = 0; k < wave && accepted.size() < wanted; ++k) {
      AttemptRecord rec;
      rec.index = next_index + k;
      if (auto* trace = std::get_if<SimTrace>(&*outcomes[k])) {
        rec.accepted = true;
        rec.peak_sway = trace->peak_body_sway();
        ds.trials.push_back(TrialRecord{rec.index, draws[k].params, draws[k].targets, rec.peak_sway});
        accepted.push_back(std::move(*trace));
      } else {
        const auto& rej = std::get<Rejected>(*outcomes[k]);
        rec.diverged = rej.diverged;
        rec.peak_sway = rej.peak_sway;
        rec.abort_time = rej.abort_time;
      }
      ds.attempts.push_back(rec);
    }
    next_index += wave;
    const double rate = static_cast<double>(accepted.size()) / static_cast<double>(ds.attempts.size());
    if (ds.attempts.size() >= settings.min_attempts_before_abort && rate < settings.min_acceptance)
      throw std::runtime_error("dataset: acceptance rate " + std::to_string(rate * 100.0) + "% after " +
                               std::to_string(ds.attempts.size()) + " attempts is below the minimum");
  }

  const auto sizes = split_sizes(wanted, settings.split_fractions);
  ds.trial_split.resize(wanted);
  for (std::size_t t = 0; t < wanted; ++t)
    ds.trial_split[t] = t < sizes[0] ? Split::Train : (t < sizes[0] + sizes[1] ? Split::Validation : Split::Test);

  const std::size_t samples = stimulus.length();
  ds.traces = FloatTensor{{wanted, kTraceChannels, samples}, std::vector<float>(wanted * kTraceChannels * samples)};
  for (std::size_t t = 0; t < wanted; ++t) fill_trace(ds.traces, t, accepted[t]);
  accepted.clear();

  assemble_targets(ds);
  featurize(ds);
  return ds;
}

FloatTensor normalized_images(const FloatTensor& images, const Standardizer& stats, std::span<const std::size_t> rows) {
  const std::size_t width = images.size() / images.dims.at(0);
  if (width != stats.width()) throw std::invalid_argument("image statistics do not match image size");
  FloatTensor out;
  out.dims = images.dims;
  out.dims[0] = rows.size();
  out.data.resize(rows.size() * width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(images.data.begin() + rows[i] * width, width, out.data.begin() + i * width);
    stats.standardize_in_place(std::span<float>(out.data.data() + i * width, width));
  }
  return out;
}

FloatTensor standardized_targets(const FloatTensor& targets, const Standardizer& stats,
                                 std::span<const std::size_t> rows) {
  return normalized_images(targets, stats, rows);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json params_json(const ModuleParams& p) {
  return {{"kp", p.kp}, {"ki", p.ki}, {"kd", p.kd}, {"delay", p.delay}, {"controlled", controlled_variable_name(p.controlled)}};
}

ModuleParams params_from_json(const json& j) {
  ModuleParams p;
  p.kp = j.at("kp").get<double>();
  p.ki = j.at("ki").get<double>();
  p.kd = j.at("kd").get<double>();
  p.delay = j.at("delay").get<double>();
  const auto cv = j.at("controlled").get<std::string>();
  if (cv == "com_sway") p.controlled = ControlledVariable::ComSway;
  else if (cv == "joint_angle") p.controlled = ControlledVariable::JointAngle;
  else throw FormatError("unknown controlled variable '" + cv + "'");
  return p;
}

json stats_json(const Standardizer& s) {
  return {{"mean", s.mean()},
          {"variance", s.variance()},
          {"scale", s.mode() == ScaleMode::Variance ? "variance" : "std"}};
}

Standardizer stats_from_json(const json& j) {
  const auto mode = j.value("scale", std::string("variance")) == "std" ? ScaleMode::StdDev : ScaleMode::Variance;
  return Standardizer(j.at("mean").get<std::vector<double>>(), j.at("variance").get<std::vector<double>>(), mode);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& s = ds.settings;
  json m;
  m["format_version"] = kDatasetFormatVersion;
  m["seed"] = s.seed;
  m["n_target"] = s.n_target;
  m["split_fractions"] = s.split_fractions;
  m["deviation_sigma"] = s.sampling.deviation_sigma;
  m["trial"] = {{"dt", s.trial.dt}, {"sway_limit_deg", s.trial.sway_limit_deg}, {"decimation", s.trial.decimation}};
  m["stft"] = {{"signal_length", s.stft.signal_length}, {"window_length", s.stft.window_length},
               {"hop", s.stft.hop}, {"fft_points", s.stft.fft_points}, {"kept_bins", s.stft.kept_bins},
               {"window", s.stft.window == WindowKind::Hann ? "hann" : "rectangular"},
               {"magnitude", s.stft.magnitude == MagnitudeScale::Log ? "log" : "linear"}};
  const auto sizes = split_sizes(ds.trial_count(), s.split_fractions);
  m["counts"] = {{"attempts", ds.attempts.size()}, {"trials", ds.trial_count()},
                 {"modular_samples", ds.sample_count()}, {"monolithic_samples", ds.trial_count()},
                 {"train_trials", sizes[0]}, {"validation_trials", sizes[1]}, {"test_trials", sizes[2]}};
  json trials = json::array();
  for (std::size_t t = 0; t < ds.trial_count(); ++t) {
    const auto& tr = ds.trials[t];
    json modules = json::array();
    for (int j = 0; j < kJoints; ++j) {
      json mj = params_json(tr.params[j]);
      mj["target"] = tr.targets[j].values();
      modules.push_back(mj);
    }
    trials.push_back({{"index", tr.index}, {"split", split_name(ds.trial_split[t])}, {"peak_sway_rad", tr.peak_sway},
                      {"modules", modules}});
  }
  m["trials"] = trials;
  json attempts = json::array();
  for (const auto& a : ds.attempts)
    attempts.push_back({{"index", a.index}, {"accepted", a.accepted}, {"diverged", a.diverged},
                        {"peak_sway_rad", a.peak_sway}, {"abort_time_s", a.abort_time}});
  m["attempts"] = attempts;
  m["target_stats"] = stats_json(ds.target_stats);
  m["mono_target_stats"] = stats_json(ds.mono_target_stats);
  m["image_stats"] = stats_json(ds.image_stats);
  m["mono_image_stats"] = stats_json(ds.mono_image_stats);
  m["layout"] = {{"images", "N,C,frames,bins"}, {"traces", "trial,[fs,ss,ls,ts,bs],sample"},
                 {"sample_order", "trial-major, joint-minor (ankle, knee, hip)"}};

  std::ofstream(dir / "manifest.json") << m.dump(1) << '\n';
  save_tensor(dir / "traces.bin", ds.traces);
  save_tensor(dir / "images.bin", ds.images);
  save_tensor(dir / "images_mono.bin", ds.mono_images);
  save_tensor(dir / "targets.bin", ds.targets);
  save_tensor(dir / "targets_mono.bin", ds.mono_targets);
  FloatTensor splits{{ds.trial_count()}, {}};
  for (auto sp : ds.trial_split) splits.data.push_back(static_cast<float>(sp));
  save_tensor(dir / "splits.bin", splits);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("no manifest.json in " + dir.string() + " (run the dataset command first)");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  if (m.at("format_version").get<int>() != kDatasetFormatVersion) throw FormatError("unsupported dataset format");

  Dataset ds;
  auto& s = ds.settings;
  s.seed = m.at("seed").get<std::uint64_t>();
  s.n_target = m.at("n_target").get<std::size_t>();
  s.split_fractions = m.at("split_fractions").get<std::array<double, 3>>();
  s.sampling.deviation_sigma = m.at("deviation_sigma").get<double>();
  s.trial.dt = m.at("trial").at("dt").get<double>();
  s.trial.sway_limit_deg = m.at("trial").at("sway_limit_deg").get<double>();
  s.trial.decimation = m.at("trial").at("decimation").get<std::size_t>();
  const auto& st = m.at("stft");
  s.stft.signal_length = st.at("signal_length").get<std::size_t>();
  s.stft.window_length = st.at("window_length").get<std::size_t>();
  s.stft.hop = st.at("hop").get<std::size_t>();
  s.stft.fft_points = st.at("fft_points").get<std::size_t>();
  s.stft.kept_bins = st.at("kept_bins").get<std::size_t>();
  s.stft.window = st.at("window").get<std::string>() == "hann" ? WindowKind::Hann : WindowKind::Rectangular;
  s.stft.magnitude = st.value("magnitude", "linear") == "log" ? MagnitudeScale::Log : MagnitudeScale::Linear;

  for (const auto& t : m.at("trials")) {
    TrialRecord rec;
    rec.index = t.at("index").get<std::uint64_t>();
    rec.peak_sway = t.at("peak_sway_rad").get<double>();
    const auto& mods = t.at("modules");
    if (mods.size() != kJoints) throw FormatError("trial record must list 3 modules");
    for (int j = 0; j < kJoints; ++j) {
      rec.params[j] = params_from_json(mods[j]);
      rec.targets[j] = TargetVector::from(mods[j].at("target").get<std::vector<double>>());
    }
    ds.trials.push_back(rec);
    const auto split = t.at("split").get<std::string>();
    ds.trial_split.push_back(split == "train" ? Split::Train : split == "validation" ? Split::Validation : Split::Test);
  }
  for (const auto& a : m.at("attempts"))
    ds.attempts.push_back(AttemptRecord{a.at("index").get<std::uint64_t>(), a.at("accepted").get<bool>(),
                                        a.at("diverged").get<bool>(), a.at("peak_sway_rad").get<double>(),
                                        a.at("abort_time_s").get<double>()});
  ds.target_stats = stats_from_json(m.at("target_stats"));
  ds.mono_target_stats = stats_from_json(m.at("mono_target_stats"));
  ds.image_stats = stats_from_json(m.at("image_stats"));
  ds.mono_image_stats = stats_from_json(m.at("mono_image_stats"));

  ds.traces = load_tensor(dir / "traces.bin");
  ds.targets = load_tensor(dir / "targets.bin");
  ds.mono_targets = load_tensor(dir / "targets_mono.bin");
  if (ds.traces.dims.size() != 3 || ds.traces.dims[0] != ds.trial_count())
    throw FormatError("traces.bin does not match the manifest");
  if (std::filesystem::exists(dir / "images.bin")) {
    ds.images = load_tensor(dir / "images.bin");
    ds.mono_images = load_tensor(dir / "images_mono.bin");
  }
  return ds;
}

}  // namespace posture
