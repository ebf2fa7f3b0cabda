#include "posture/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace posture {

namespace {

namespace pt = boost::property_tree;

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(v))
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::uint64_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(' '), b = item.find_last_not_of(' ');
    if (a == std::string::npos) throw ConfigError(key + ": empty list element in '" + text + "'");
    out.push_back(parse_uint(key, item.substr(a, b - a + 1)));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

ControlledVariable parse_cv(const std::string& key, const std::string& text) {
  if (text == "com_sway") return ControlledVariable::ComSway;
  if (text == "joint_angle") return ControlledVariable::JointAngle;
  throw ConfigError(key + ": expected com_sway or joint_angle, got '" + text + "'");
}

/// One configurable value: how to print it and how to set it from text.
struct Entry {
  std::function<std::string()> get;
  std::function<void(const std::string& key, const std::string& text)> set;
};

using Schema = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Entry>>>>;

Entry real(double& v) {
  return {[&v] { return format_double(v); }, [&v](const std::string& k, const std::string& t) { v = parse_double(k, t); }};
}

template <typename T>
Entry uint(T& v) {
  return {[&v] { return std::to_string(v); },
          [&v](const std::string& k, const std::string& t) { v = static_cast<T>(parse_uint(k, t)); }};
}

Entry flag(bool& v) {
  return {[&v] { return std::string(v ? "true" : "false"); },
          [&v](const std::string& k, const std::string& t) { v = parse_bool(k, t); }};
}

Entry cv(ControlledVariable& v) {
  return {[&v] { return std::string(controlled_variable_name(v)); },
          [&v](const std::string& k, const std::string& t) { v = parse_cv(k, t); }};
}

Entry int_list(std::vector<int>& v) {
  return {[&v] { return join(v); },
          [&v](const std::string& k, const std::string& t) {
            const auto l = parse_list(k, t);
            v.assign(l.begin(), l.end());
          }};
}

Entry size_list(std::vector<std::size_t>& v) {
  return {[&v] { return join(v); },
          [&v](const std::string& k, const std::string& t) {
            const auto l = parse_list(k, t);
            v.assign(l.begin(), l.end());
          }};
}

Entry window(WindowKind& v) {
  return {[&v] { return std::string(v == WindowKind::Rectangular ? "rectangular" : "hann"); },
          [&v](const std::string& k, const std::string& t) {
            if (t == "rectangular") v = WindowKind::Rectangular;
            else if (t == "hann") v = WindowKind::Hann;
            else throw ConfigError(k + ": expected rectangular or hann, got '" + t + "'");
          }};
}

Entry magnitude(MagnitudeScale& v) {
  return {[&v] { return std::string(v == MagnitudeScale::Linear ? "linear" : "log"); },
          [&v](const std::string& k, const std::string& t) {
            if (t == "linear") v = MagnitudeScale::Linear;
            else if (t == "log") v = MagnitudeScale::Log;
            else throw ConfigError(k + ": expected linear or log, got '" + t + "'");
          }};
}

std::vector<std::pair<std::string, Entry>> module_entries(ModuleParams& m, PassiveParams* p) {
  std::vector<std::pair<std::string, Entry>> e{
      {"kp", real(m.kp)}, {"ki", real(m.ki)}, {"kd", real(m.kd)}, {"delay", real(m.delay)},
      {"controlled", cv(m.controlled)}};
  if (p) {
    e.push_back({"stiffness", real(p->stiffness)});
    e.push_back({"damping", real(p->damping)});
  }
  return e;
}

Schema schema(Config& c) {
  const char* seg_names[kJoints] = {"shank", "thigh", "trunk"};
  std::vector<std::pair<std::string, Entry>> plant{{"gravity", real(c.anthropometry.gravity)}};
  for (int i = 0; i < kJoints; ++i) {
    auto& s = c.anthropometry.segments[i];
    const std::string n = seg_names[i];
    plant.push_back({n + "_mass", real(s.mass)});
    plant.push_back({n + "_length", real(s.length)});
    plant.push_back({n + "_com", real(s.com_distance)});
    plant.push_back({n + "_inertia", real(s.inertia_com)});
  }
  auto& d = c.dataset;
  return {
      {"plant", plant},
      {"ankle", module_entries(c.dec.active[0], &c.dec.passive[0])},
      {"knee", module_entries(c.dec.active[1], &c.dec.passive[1])},
      {"hip", module_entries(c.dec.active[2], &c.dec.passive[2])},
      {"dec", {{"tilt_threshold", real(c.dec.tilt_threshold)}}},
      {"stimulus",
       {{"stages", uint(c.stimulus.stages)},
        {"stage_duration", real(c.stimulus.stage_duration)},
        {"peak_to_peak_deg", real(c.stimulus.peak_to_peak_deg)},
        {"sample_rate", real(c.stimulus.sample_rate)},
        {"taps", int_list(c.taps.coefficients)},
        {"taps_seed", int_list(c.taps.seed)}}},
      {"simulation",
       {{"dt", real(d.trial.dt)},
        {"sway_limit_deg", real(d.trial.sway_limit_deg)},
        {"decimation", uint(d.trial.decimation)},
        {"lock_knee", flag(d.trial.locks.knee)},
        {"lock_hip", flag(d.trial.locks.hip)}}},
      {"dataset",
       {{"n_target", uint(d.n_target)},
        {"seed", uint(d.seed)},
        {"split_train", real(d.split_fractions[0])},
        {"split_validation", real(d.split_fractions[1])},
        {"split_test", real(d.split_fractions[2])},
        {"deviation_sigma", real(d.sampling.deviation_sigma)},
        {"min_acceptance", real(d.min_acceptance)},
        {"min_attempts_before_abort", uint(d.min_attempts_before_abort)}}},
      {"features",
       {{"signal_length", uint(d.stft.signal_length)},
        {"window_length", uint(d.stft.window_length)},
        {"hop", uint(d.stft.hop)},
        {"fft_points", uint(d.stft.fft_points)},
        {"kept_bins", uint(d.stft.kept_bins)},
        {"window", window(d.stft.window)},
        {"magnitude", magnitude(d.stft.magnitude)}}},
      {"network", {{"conv_widths", size_list(c.conv_widths)}, {"init_seed", uint(c.init_seed)}}},
      {"training",
       {{"learning_rate", real(c.training.learning_rate)},
        {"momentum", real(c.training.momentum)},
        {"weight_decay", real(c.training.weight_decay)},
        {"batch_size", uint(c.training.batch_size)},
        {"epochs", uint(c.training.epochs)},
        {"lr_drop_every", uint(c.training.lr_drop_every)},
        {"lr_drop_factor", real(c.training.lr_drop_factor)},
        {"shuffle_seed", uint(c.training.shuffle_seed)}}},
      {"eval", {{"loop_closure_trials", uint(c.loop_closure_trials)}}},
  };
}

/// Line of `key` inside `[section]` in the raw text, 0 if not found.
std::size_t line_of(const std::string& text, const std::string& section, const std::string& key) {
  std::istringstream in(text);
  std::string line, current;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto a = line.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    if (line[a] == '[') {
      const auto b = line.find(']', a);
      current = line.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1);
      continue;
    }
    const auto eq = line.find('=', a);
    if (eq == std::string::npos) continue;
    std::string k = line.substr(a, eq - a);
    k.erase(k.find_last_not_of(" \t") + 1);
    if (current == section && k == key) return n;
  }
  return 0;
}

void apply(Schema& s, std::istream& in, const std::string& source, bool allow_other_sections = false) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream stream(text);
  pt::ptree tree;
  try {
    pt::read_ini(stream, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  auto where = [&](const std::string& section, const std::string& key) {
    const std::size_t n = line_of(text, section, key);
    return source + (n ? ":" + std::to_string(n) : "") + ": ";
  };
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty())
      throw ConfigError(where("", section) + "key '" + section + "' outside of a section");
    auto sec = std::find_if(s.begin(), s.end(), [&](const auto& p) { return p.first == section; });
    if (sec == s.end()) {
      if (allow_other_sections) continue;
      throw ConfigError(source + ": unknown section [" + section + "]");
    }
    for (const auto& [key, value] : keys) {
      auto e = std::find_if(sec->second.begin(), sec->second.end(), [&](const auto& p) { return p.first == key; });
      if (e == sec->second.end()) throw ConfigError(where(section, key) + "unknown key '" + key + "' in [" + section + "]");
      try {
        e->second.set(section + "." + key, value.data());
      } catch (const ConfigError& err) {
        throw ConfigError(where(section, key) + err.what());
      }
    }
  }
}

void validate(const Config& c) {
  try {
    build_plant(c.anthropometry);
    prts_sequence(c.stimulus.stages, c.taps);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto& d = c.dataset;
  if (!(d.trial.dt > 0.0) || d.trial.decimation == 0) throw ConfigError("simulation: dt and decimation must be positive");
  if (std::abs(d.trial.dt * static_cast<double>(d.trial.decimation) * c.stimulus.sample_rate - 1.0) > 1e-9)
    throw ConfigError("simulation: dt * decimation must equal one stimulus sample period");
  const double f = d.split_fractions[0] + d.split_fractions[1] + d.split_fractions[2];
  if (std::abs(f - 1.0) > 1e-9 || d.split_fractions[0] <= 0.0 || d.split_fractions[1] < 0.0 || d.split_fractions[2] < 0.0)
    throw ConfigError("dataset: split fractions must be non-negative and sum to 1");
  if (!(d.sampling.deviation_sigma > 0.0)) throw ConfigError("dataset: deviation_sigma must be positive");
  if (d.stft.window_length > d.stft.signal_length || d.stft.hop == 0 || d.stft.kept_bins > d.stft.fft_points / 2 + 1 ||
      d.stft.fft_points < d.stft.window_length)
    throw ConfigError("features: inconsistent STFT settings");
  if (c.training.batch_size == 0 || c.training.lr_drop_every == 0 || !(c.training.learning_rate >= 0.0))
    throw ConfigError("training: batch_size and lr_drop_every must be positive, learning_rate non-negative");
  for (int j = 0; j < kJoints; ++j) {
    const auto& m = c.dec.active[j];
    if (m.kp < 0 || m.ki < 0 || m.kd < 0 || m.delay < 0) throw ConfigError("module gains and delays must be non-negative");
  }
  try {
    c.modular_spec().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }
}

}  // namespace

nn::ArchSpec Config::modular_spec() const {
  nn::ArchSpec s = nn::ArchSpec::modular();
  s.height = dataset.stft.frames();
  s.width = dataset.stft.kept_bins;
  s.conv_widths = conv_widths;
  return s;
}

nn::ArchSpec Config::monolithic_spec() const {
  nn::ArchSpec s = nn::ArchSpec::monolithic();
  s.height = dataset.stft.frames();
  s.width = dataset.stft.kept_bins;
  s.conv_widths = conv_widths;
  return s;
}

Config parse_config(std::istream& in, const std::string& source) {
  Config c;
  Schema s = schema(c);
  apply(s, in, source);
  validate(c);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

void write_config(std::ostream& out, const Config& config) {
  Config copy = config;
  const Schema s = schema(copy);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << (i ? "\n" : "") << '[' << s[i].first << "]\n";
    for (const auto& [key, entry] : s[i].second) out << key << " = " << entry.get() << '\n';
  }
}

std::string config_text(const Config& config) {
  std::ostringstream out;
  write_config(out, config);
  return out.str();
}

std::array<ModuleParams, kJoints> load_params(const std::filesystem::path& path, const DecDefaults& defaults) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open parameter file " + path.string());
  std::array<ModuleParams, kJoints> p = defaults.active;
  Schema s{{"ankle", module_entries(p[0], nullptr)}, {"knee", module_entries(p[1], nullptr)},
           {"hip", module_entries(p[2], nullptr)}};
  apply(s, in, path.string());
  for (const auto& m : p)
    if (m.kp < 0 || m.ki < 0 || m.kd < 0 || m.delay < 0)
      throw ConfigError(path.string() + ": gains and delays must be non-negative");
  return p;
}

}  // namespace posture
