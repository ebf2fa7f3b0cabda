// Command-line front end: simulate, stimulus, dataset, featurize, train,
// eval, compare, identify.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "posture/config.hpp"
#include "posture/parallel.hpp"
#include "posture/pipeline.hpp"

namespace fs = std::filesystem;
using namespace posture;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitAcceptance = 4;

struct AcceptanceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::size_t jobs = default_jobs();
  std::optional<std::uint64_t> seed;
};

Config effective_config(const Globals& g) {
  Config c = g.config_path.empty() ? Config{} : load_config(g.config_path);
  c.dataset.jobs = std::max<std::size_t>(1, g.jobs);
  if (g.seed) c.dataset.seed = *g.seed;
  return c;
}

void echo(const Config& c, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.ini");
  write_config(out, c);
}

std::vector<Joint> parse_modules(const std::string& text) {
  std::vector<Joint> out;
  std::stringstream ss(text);
  std::string name;
  while (std::getline(ss, name, ',')) {
    Joint j;
    if (name == "ankle") j = Joint::Ankle;
    else if (name == "knee") j = Joint::Knee;
    else if (name == "hip") j = Joint::Hip;
    else throw ValidationError("unknown module '" + name + "' (expected ankle, knee, hip)");
    if (std::find(out.begin(), out.end(), j) != out.end()) throw ValidationError("module '" + name + "' listed twice");
    out.push_back(j);
  }
  if (out.empty()) throw ValidationError("no modules given");
  return out;
}

void require(bool ok, const std::string& what) {
  std::cout << (ok ? "PASS " : "FAIL ") << what << '\n';
  if (!ok) throw AcceptanceFailure(what);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Posture control parameter identification from body sway"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--jobs", g.jobs, "Worker threads (1 gives byte-identical output)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Dataset seed (dataset.seed)");

  std::function<int()> action;

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one closed-loop trial and write the sway trace");
  std::string params_file, sim_out;
  std::optional<double> tilt_amplitude;
  sim->add_option("--params", params_file, "Module parameter file ([ankle] [knee] [hip])")->check(CLI::ExistingFile);
  sim->add_option("--tilt-amplitude", tilt_amplitude, "Peak-to-peak support tilt in degrees (stimulus.peak_to_peak_deg)");
  sim->add_option("--out", sim_out, "Trace CSV")->required();
  sim->callback([&] {
    action = [&] {
      Config c = effective_config(g);
      if (tilt_amplitude) c.stimulus.peak_to_peak_deg = *tilt_amplitude;
      const auto params = params_file.empty() ? c.dec.active : load_params(params_file, c.dec);
      const TrialOutcome out = run_trial(plant_for(c), params, c.dec, stimulus_for(c), c.dataset.trial);
      if (const auto* r = std::get_if<Rejected>(&out)) {
        std::cerr << (r->diverged ? "diverged" : "sway limit exceeded") << " at t = " << format_number(r->abort_time)
                  << " s (peak |alpha_BS| " << format_number(r->peak_sway * 180.0 / std::numbers::pi) << " deg)\n";
        return kExitDivergence;
      }
      const auto& trace = std::get<SimTrace>(out);
      if (fs::path(sim_out).has_parent_path()) fs::create_directories(fs::path(sim_out).parent_path());
      std::ofstream f(sim_out);
      write_trace_csv(f, trace, c.stimulus.sample_rate);
      std::cout << trace.length() << " samples, peak |alpha_BS| "
                << format_number(trace.peak_body_sway() * 180.0 / std::numbers::pi) << " deg\n";
      return 0;
    };
  });

  // stimulus export
  auto* stim = app.add_subcommand("stimulus", "Export the PRTS support tilt profile");
  std::string stim_out;
  stim->add_option("--tilt-amplitude", tilt_amplitude, "Peak-to-peak support tilt in degrees (stimulus.peak_to_peak_deg)");
  stim->add_option("--out", stim_out, "Profile CSV")->required();
  stim->callback([&] {
    action = [&] {
      Config c = effective_config(g);
      if (tilt_amplitude) c.stimulus.peak_to_peak_deg = *tilt_amplitude;
      std::ofstream f(stim_out);
      if (!f) throw ValidationError("cannot write " + stim_out);
      stimulus_for(c).write_csv(f);
      return 0;
    };
  });

  // dataset
  auto* dset = app.add_subcommand("dataset", "Simulate, filter and featurize a training set");
  std::string dataset_dir;
  std::optional<std::size_t> n_target;
  dset->add_option("--out", dataset_dir, "Dataset directory")->required();
  dset->add_option("--n-target", n_target, "Number of modular samples (dataset.n_target)");
  dset->callback([&] {
    action = [&] {
      Config c = effective_config(g);
      if (n_target) c.dataset.n_target = *n_target;
      const Dataset ds = run_dataset(c, dataset_dir);
      std::cout << ds.trial_count() << " trials accepted of " << ds.attempts.size() << " attempts\n";
      return 0;
    };
  });

  // featurize
  auto* feat = app.add_subcommand("featurize", "Recompute feature images and statistics of a dataset");
  std::string feat_dir;
  feat->add_option("--dataset", feat_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  feat->callback([&] {
    action = [&] {
      Config c = effective_config(g);
      Dataset ds = load_dataset(feat_dir);
      ds.settings.stft = c.dataset.stft;
      ds.settings.jobs = c.dataset.jobs;
      featurize(ds);
      save_dataset(ds, feat_dir);
      std::cout << ds.sample_count() << " modular images\n";
      return 0;
    };
  });

  // train
  auto* trn = app.add_subcommand("train", "Train a network on a dataset");
  std::string train_dataset, train_out;
  bool train_mono = false;
  std::optional<std::size_t> epochs;
  trn->add_option("--dataset", train_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  trn->add_option("--out", train_out, "Checkpoint file")->required();
  trn->add_flag("--monolithic", train_mono, "Train the single network over all three modules");
  trn->add_option("--epochs", epochs, "Training epochs (training.epochs)");
  trn->callback([&] {
    action = [&] {
      Config c = effective_config(g);
      if (epochs) c.training.epochs = *epochs;
      const Dataset ds = load_dataset(train_dataset);
      const auto m = run_train(c, ds, train_mono ? nn::ModelKind::Monolithic : nn::ModelKind::Modular, train_out,
                               &std::cout);
      echo(c, fs::absolute(train_out).parent_path());
      std::cout << "best epoch " << m.best_epoch << '\n';
      return 0;
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a trained network");
  std::string eval_dataset, eval_model, eval_out;
  std::optional<std::size_t> loop_trials;
  bool check = false;
  ev->add_option("--dataset", eval_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--model", eval_model, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", eval_out, "Report directory")->required();
  ev->add_option("--loop-closure", loop_trials, "Test trials to re-simulate, 0 to skip (eval.loop_closure_trials)");
  ev->add_flag("--check", check, "Exit with status 4 unless the desk-scale thresholds are met");
  ev->callback([&] {
    action = [&] {
      Config c = effective_config(g);
      if (loop_trials) c.loop_closure_trials = *loop_trials;
      const Dataset ds = load_dataset(eval_dataset);
      const nn::Model model = nn::load_model(eval_model);
      EvalReport rep = evaluate_model(model, ds);
      if (c.loop_closure_trials > 0) rep.loop_closure = run_loop_closure(c, model, ds, c.loop_closure_trials);
      write_eval_report(rep, c, eval_out);
      std::ifstream summary(fs::path(eval_out) / "summary.txt");
      std::cout << summary.rdbuf();
      if (check) {
        const auto& t = rep.at(Split::Test);
        require(t.model.fit_rmse <= 0.8 * t.baseline.fit_rmse, "test fit RMSE <= 0.8 x mean predictor");
        require(t.model.accuracy >= 0.75, "test accuracy >= 75%");
        if (rep.loop_closure) {
          require(rep.loop_closure->median_e_id <= 0.02, "loop closure median E_id <= 0.02 deg");
          require(rep.loop_closure->max_e_id <= 0.1, "loop closure max E_id <= 0.1 deg");
        }
      }
      return 0;
    };
  });

  // compare
  auto* cmp = app.add_subcommand("compare", "Modular against monolithic network on the same trials");
  std::string cmp_dataset, cmp_model, cmp_mono, cmp_out;
  cmp->add_option("--dataset", cmp_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--model", cmp_model, "Modular checkpoint")->required()->check(CLI::ExistingFile);
  cmp->add_option("--monolithic", cmp_mono,
                  "Monolithic checkpoint; trained into <out>/monolithic.ckpt when omitted")->check(CLI::ExistingFile);
  cmp->add_option("--out", cmp_out, "Report directory")->required();
  cmp->add_option("--epochs", epochs, "Training epochs (training.epochs)");
  cmp->add_flag("--check", check, "Exit with status 4 unless modular accuracy exceeds monolithic by 10 points");
  cmp->callback([&] {
    action = [&] {
      Config c = effective_config(g);
      if (epochs) c.training.epochs = *epochs;
      const Dataset ds = load_dataset(cmp_dataset);
      const nn::Model modular = nn::load_model(cmp_model);
      if (modular.kind != nn::ModelKind::Modular) throw ValidationError(cmp_model + " is not a modular checkpoint");
      const nn::Model mono = cmp_mono.empty()
                                 ? run_train(c, ds, nn::ModelKind::Monolithic, fs::path(cmp_out) / "monolithic.ckpt", &std::cout)
                                 : nn::load_model(cmp_mono);
      if (mono.kind != nn::ModelKind::Monolithic) throw ValidationError("not a monolithic checkpoint");
      const EvalReport a = evaluate_model(modular, ds), b = evaluate_model(mono, ds);
      echo(c, cmp_out);
      write_comparison(a, b, cmp_out);
      std::ifstream txt(fs::path(cmp_out) / "compare.txt");
      std::cout << txt.rdbuf();
      if (check)
        require(a.at(Split::Test).model.accuracy - b.at(Split::Test).model.accuracy >= 0.10,
                "modular accuracy exceeds monolithic by >= 10 points");
      return 0;
    };
  });

  // identify
  auto* idf = app.add_subcommand("identify", "Identify module parameters from a recorded sway trace");
  std::string trace_path, id_model, id_out, overlay;
  std::string modules_text = "ankle,knee,hip";
  idf->add_option("--trace", trace_path, "Trace CSV (time_s,alpha_fs_rad,alpha_ss_rad,alpha_ls_rad,alpha_ts_rad)")
      ->required()
      ->check(CLI::ExistingFile);
  idf->add_option("--model", id_model, "Modular checkpoint")->required()->check(CLI::ExistingFile);
  idf->add_option("--modules", modules_text, "Modules to identify; without knee the knee is locked straight")
      ->capture_default_str();
  idf->add_option("--out", id_out, "Report CSV (stdout when omitted)");
  idf->add_option("--resimulate", overlay, "Write measured vs re-simulated segment angles to this CSV");
  idf->callback([&] {
    action = [&] {
      Config c = effective_config(g);
      const auto modules = parse_modules(modules_text);
      const bool knee = std::find(modules.begin(), modules.end(), Joint::Knee) != modules.end();
      const SimTrace trace = read_trace_csv(trace_path, c.dataset.stft.signal_length, c.stimulus.sample_rate, knee);
      const nn::Model model = nn::load_model(id_model);
      const auto ids = identify_trace(model, trace, modules, c.dataset.stft, c.dec);
      if (id_out.empty()) {
        write_identification(std::cout, ids);
      } else {
        std::ofstream f(id_out);
        write_identification(f, ids);
      }
      if (!overlay.empty()) {
        auto params = c.dec.active;
        for (const auto& m : ids) params[static_cast<int>(m.joint)] = m.params;
        TrialSettings ts = c.dataset.trial;
        ts.sway_limit_deg = 0.0;
        ts.locks.knee = ts.locks.knee || !knee;
        const TrialOutcome out = run_trial(plant_for(c), params, c.dec, stimulus_for(c), ts);
        const auto* sim = std::get_if<SimTrace>(&out);
        if (!sim) {
          std::cerr << "re-simulation with the identified parameters diverged\n";
          return kExitDivergence;
        }
        std::ofstream f(overlay);
        f << "time_s,alpha_ss_rad,alpha_ss_rad_sim,alpha_ls_rad,alpha_ls_rad_sim,alpha_ts_rad,alpha_ts_rad_sim\n";
        char line[200];
        for (std::size_t i = 0; i < trace.length() && i < sim->length(); ++i) {
          std::snprintf(line, sizeof line, "%.2f,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e\n",
                        static_cast<double>(i) / c.stimulus.sample_rate, trace.alpha_ss[i], sim->alpha_ss[i],
                        trace.alpha_ls[i], sim->alpha_ls[i], trace.alpha_ts[i], sim->alpha_ts[i]);
          f << line;
        }
      }
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  try {
    return action();
  } catch (const AcceptanceFailure&) {
    return kExitAcceptance;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}
