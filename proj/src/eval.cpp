#include "posture/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "posture/parallel.hpp"

namespace posture {

namespace {

double destandardized(const Standardizer& stats, std::size_t column, double v) {
  return v * stats.scale()[column] + stats.mean()[column];
}

void check_rows(std::span<const float> a, std::span<const float> b, std::size_t width) {
  if (width == 0) throw std::invalid_argument("metrics: empty target layout");
  if (a.size() != b.size()) throw std::invalid_argument("metrics: prediction/target count mismatch");
  if (a.empty() || a.size() % width != 0) throw std::invalid_argument("metrics: empty or ragged input");
}

}  // namespace

RmseMetrics rmse_metrics(std::span<const float> predictions, std::span<const float> targets,
                         const Standardizer& stats, std::span<const std::size_t> categorical) {
  const std::size_t width = stats.width();
  check_rows(predictions, targets, width);
  std::vector<bool> is_cat(width, false);
  for (auto c : categorical) {
    if (c >= width) throw std::invalid_argument("metrics: categorical column out of range");
    is_cat[c] = true;
  }
  const std::size_t n = predictions.size() / width;
  double total = 0.0, fit = 0.0;
  std::size_t fit_terms = 0, hits = 0, votes = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < width; ++k) {
      const double p = predictions[i * width + k], t = targets[i * width + k];
      const double d = p - t;
      total += d * d;
      if (!is_cat[k]) {
        fit += d * d;
        ++fit_terms;
      } else {
        const bool pos_p = destandardized(stats, k, p) >= 0.0;
        const bool pos_t = destandardized(stats, k, t) >= 0.0;
        hits += pos_p == pos_t;
        ++votes;
      }
    }
  }
  RmseMetrics m;
  m.count = n;
  m.total_rmse = std::sqrt(total / static_cast<double>(n * width));
  m.fit_rmse = fit_terms ? std::sqrt(fit / static_cast<double>(fit_terms)) : 0.0;
  m.accuracy = votes ? static_cast<double>(hits) / static_cast<double>(votes) : 0.0;
  return m;
}

ParameterErrors parameter_errors(std::span<const float> predictions, std::span<const float> targets,
                                 const Standardizer& stats) {
  const std::size_t width = stats.width();
  check_rows(predictions, targets, width);
  const std::size_t n = predictions.size() / width;
  ParameterErrors e{std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
  std::vector<double> mean(width, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < width; ++k) {
      const double d = (predictions[i * width + k] - targets[i * width + k]) * stats.scale()[k];
      e.mean_abs[k] += std::abs(d);
      mean[k] += d;
    }
  for (std::size_t k = 0; k < width; ++k) {
    e.mean_abs[k] /= static_cast<double>(n);
    mean[k] /= static_cast<double>(n);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < width; ++k) {
      const double d = (predictions[i * width + k] - targets[i * width + k]) * stats.scale()[k] - mean[k];
      e.variance[k] += d * d;
    }
  for (auto& v : e.variance) v /= static_cast<double>(n);
  return e;
}

std::vector<std::size_t> categorical_columns(std::size_t width) {
  std::vector<std::size_t> cols;
  for (std::size_t c = kCategoricalIndex; c < width; c += kTargetDim) cols.push_back(c);
  return cols;
}

double identification_error(std::span<const double> truth, std::span<const double> identified) {
  if (truth.size() != identified.size()) throw std::invalid_argument("identification error: length mismatch");
  if (truth.empty()) throw std::invalid_argument("identification error: empty series");
  double ss = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = (truth[i] - identified[i]) * 180.0 / std::numbers::pi;
    ss += d * d;
  }
  return std::sqrt(ss) / static_cast<double>(truth.size());
}

double param_mse(std::span<const double> error) {
  if (error.size() != kMonolithicTargetDim) throw std::invalid_argument("param_mse: expected 15 components");
  double ss = 0.0;
  for (double e : error) ss += e * e;
  return std::sqrt(ss) / static_cast<double>(kMonolithicTargetDim);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (x.size() != y.size() || x.size() < 2) return nan;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return nan;
  return sxy / std::sqrt(sxx * syy);
}

Identified decode_targets(std::span<const double> values, const DecDefaults& defaults) {
  if (values.size() != kMonolithicTargetDim) throw std::invalid_argument("decode: expected 15 target values");
  Identified id;
  for (int j = 0; j < kJoints; ++j) {
    id.targets[j] = TargetVector::from(values.subspan(j * kTargetDim, kTargetDim));
    id.params[j] = denormalize_params(id.targets[j], defaults.active[j]);
  }
  return id;
}

std::vector<double> predict_targets(const nn::Model& model, std::span<const float> raw_images, std::size_t count) {
  const std::size_t in = model.network.spec().input_size();
  const std::size_t out = model.network.spec().outputs;
  if (raw_images.size() != count * in) throw std::invalid_argument("predict: image size does not match the model");
  if (model.image_stats.width() != in || model.target_stats.width() != out)
    throw std::invalid_argument("predict: model statistics do not match the network");
  std::vector<float> x(raw_images.begin(), raw_images.end());
  for (std::size_t i = 0; i < count; ++i) model.image_stats.standardize_in_place(std::span(x).subspan(i * in, in));
  const std::vector<float> y = nn::predict(model.network, x, count);
  std::vector<double> result(count * out);
  std::vector<double> row(out);
  for (std::size_t i = 0; i < count; ++i) {
    std::copy(y.begin() + i * out, y.begin() + (i + 1) * out, row.begin());
    model.target_stats.destandardize(row, std::span(result).subspan(i * out, out));
  }
  return result;
}

std::vector<Identified> identify_trials(const nn::Model& model, const Dataset& ds,
                                        std::span<const std::size_t> trials, const DecDefaults& defaults) {
  std::vector<float> images;
  std::size_t count = 0;
  const bool modular = model.kind == nn::ModelKind::Modular;
  const FloatTensor& src = modular ? ds.images : ds.mono_images;
  if (src.dims.empty()) throw std::invalid_argument("identify: dataset has no feature images");
  const std::size_t width = src.data.size() / src.dims[0];
  for (std::size_t t : trials) {
    if (t >= ds.trial_count()) throw std::out_of_range("identify: trial index out of range");
    const std::size_t rows = modular ? kJoints : 1, first = modular ? t * kJoints : t;
    images.insert(images.end(), src.data.begin() + first * width, src.data.begin() + (first + rows) * width);
    count += rows;
  }
  const std::vector<double> values = predict_targets(model, images, count);
  std::vector<Identified> out;
  out.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i)
    out.push_back(decode_targets(std::span(values).subspan(i * kMonolithicTargetDim, kMonolithicTargetDim), defaults));
  return out;
}

LoopClosureReport loop_closure(const Dataset& ds, std::span<const std::size_t> trials,
                               std::span<const Identified> identified, const PlantModel& plant,
                               const DecDefaults& defaults, const StimulusProfile& stimulus, std::size_t jobs) {
  if (trials.size() != identified.size()) throw std::invalid_argument("loop closure: one identification per trial");
  LoopClosureReport rep;
  rep.rows.resize(trials.size());
  TrialSettings settings = ds.settings.trial;
  settings.sway_limit_deg = 0.0;

  parallel_for(trials.size(), jobs, [&](std::size_t i) {
    LoopClosureRow& row = rep.rows[i];
    row.trial = trials[i];
    const TrialRecord& rec = ds.trials.at(trials[i]);
    std::vector<double> err;
    for (int j = 0; j < kJoints; ++j) {
      const auto p = identified[i].targets[j].values();
      const auto t = rec.targets[j].values();
      for (std::size_t k = 0; k < kTargetDim; ++k) err.push_back(p[k] - t[k]);
    }
    row.param_mse = param_mse(err);
    const TrialOutcome out = run_trial(plant, identified[i].params, defaults, stimulus, settings);
    if (const auto* trace = std::get_if<SimTrace>(&out)) {
      std::vector<double> sim(trace->alpha_bs.size());
      for (std::size_t s = 0; s < sim.size(); ++s) sim[s] = static_cast<float>(trace->alpha_bs[s]);
      const SimTrace truth = ds.trace(row.trial);
      row.e_id_deg = identification_error(truth.alpha_bs, sim);
    } else {
      row.diverged = true;
      row.e_id_deg = std::numeric_limits<double>::quiet_NaN();
    }
  });

  std::vector<double> e, m;
  for (const auto& r : rep.rows) {
    if (r.diverged) {
      ++rep.diverged;
      continue;
    }
    e.push_back(r.e_id_deg);
    m.push_back(r.param_mse);
  }
  rep.correlated = e.size();
  rep.correlation = pearson(e, m);
  if (!e.empty()) {
    std::vector<double> sorted = e;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    rep.median_e_id = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    rep.max_e_id = sorted.back();
  } else {
    rep.median_e_id = std::numeric_limits<double>::quiet_NaN();
  }
  if (rep.diverged) rep.max_e_id = std::numeric_limits<double>::infinity();
  return rep;
}

namespace {

Histogram uniform_bins(double lo, double hi, std::size_t bins) {
  if (!(hi > lo) || bins == 0) throw std::invalid_argument("histogram: bad range");
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / bins);
  return h;
}

std::size_t bin_of(const Histogram& h, double v) {
  const double lo = h.edges.front(), hi = h.edges.back();
  const std::size_t bins = h.counts.size();
  if (v < lo) return 0;
  const auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
  return std::min(b, bins - 1);
}

}  // namespace

Histogram kp_histogram(const Dataset& ds, double lo, double hi, std::size_t bins) {
  Histogram h = uniform_bins(lo, hi, bins);
  for (const auto& t : ds.trials)
    for (const auto& target : t.targets) ++h.counts[bin_of(h, target.kp)];
  return h;
}

Histogram sway_histogram(const Dataset& ds, double limit_deg, std::size_t bins) {
  Histogram h = uniform_bins(0.0, limit_deg, bins);
  for (const auto& a : ds.attempts) {
    if (a.accepted)
      ++h.counts[bin_of(h, a.peak_sway * 180.0 / std::numbers::pi)];
    else
      ++h.overflow_count;
  }
  return h;
}

void write_histogram_csv(std::ostream& out, const Histogram& h, bool with_terminal) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
  if (with_terminal) out << h.edges.back() << ",inf," << h.overflow_count << '\n';
}

void write_loop_closure_csv(std::ostream& out, const LoopClosureReport& report) {
  out << "trial,e_id_deg,param_mse,diverged\n";
  for (const auto& r : report.rows) {
    out << r.trial << ',';
    if (r.diverged) out << "nan";
    else out << r.e_id_deg;
    out << ',' << r.param_mse << ',' << (r.diverged ? 1 : 0) << '\n';
  }
}

}  // namespace posture
