// koopman-ctl: batch front end for the identification and control pipeline.
//
//   collect -> train -> spectrum / reduce -> control, evaluate
//
// Each stage reads the artifacts of the previous one from the output
// directory and refuses to run when their recorded fingerprints no longer
// match (exit code 4).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "koopman/errors.hpp"
#include "koopman/experiment.hpp"

namespace fs = std::filesystem;
using namespace koopman;
using io::Json;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kNumerical = 3, kStale = 4 };

int exit_code_for(const Error& e) {
  const std::string& k = e.kind();
  if (k == "ConfigError" || k == "InvalidSpec") return kConfig;
  if (k == "StaleArtifact") return kStale;
  if (k == "NumericalFailure" || k == "DegenerateSpectrum" || k == "NoStabilizingSolution" ||
      k == "SimulationDiverged" || k == "IllConditionedBasis" || k == "LiftOverflow" ||
      k == "InvalidMatrix") {
    return kNumerical;
  }
  return kOther;
}

void log(const std::string& stage, const std::string& msg) {
  std::fprintf(stderr, "[%s] %s\n", stage.c_str(), msg.c_str());
}

std::string pretty(const Json& j) { return j.dump(1) + "\n"; }

struct Context {
  experiment::ExperimentConfig cfg;
  std::string config_fp;
  fs::path out;
  bool on_training = false;

  fs::path data_dir() const { return out / "data"; }
  fs::path model_path() const { return out / "model.json"; }
  fs::path reduced_path(Eigen::Index n) const {
    return out / ("reduced_" + experiment::mode_label(n) + ".json");
  }
  std::string data_name(std::size_t r) const { return "data/" + cfg.regimes[r].name + ".csv"; }
};

Json load_json(const fs::path& path) {
  if (!fs::exists(path)) {
    throw InsufficientData(path.string() + " does not exist; run the upstream stage first");
  }
  return io::parse_json(io::read_file(path), path.string());
}

// --- shared upstream loading --------------------------------------------

struct Upstream {
  std::vector<Trajectory> runs;
  io::Fingerprints data_fps;
};

Upstream load_dataset(const Context& ctx, const std::string& stage) {
  const Json manifest = load_json(ctx.data_dir() / "collect.json");
  const auto recorded = io::inputs_of(manifest);
  io::require_fingerprint(recorded, "config", ctx.config_fp, stage);
  Upstream up;
  for (std::size_t r = 0; r < ctx.cfg.regimes.size(); ++r) {
    const std::string name = ctx.data_name(r);
    const std::string text = io::read_file(ctx.out / name);
    const std::string fp = io::sha256_hex(text);
    const auto files = manifest.at("files");
    if (!files.contains(name) || files.at(name) != fp) {
      throw StaleArtifact(stage + ": " + name + " does not match collect.json");
    }
    Trajectory t = io::parse_trajectory_csv(text, name);
    t.sample_dt = ctx.cfg.plant.sample_dt;
    up.runs.push_back(std::move(t));
    up.data_fps[name] = fp;
  }
  return up;
}

struct ModelArtifact {
  LiftedModel model;
  std::string fingerprint;
};

ModelArtifact load_model(const Context& ctx, const Upstream& up, const std::string& stage) {
  const std::string text = io::read_file(ctx.model_path());
  const Json j = io::parse_json(text, ctx.model_path().string());
  const auto recorded = io::inputs_of(j);
  io::require_fingerprint(recorded, "config", ctx.config_fp, stage);
  for (const auto& [name, fp] : up.data_fps) io::require_fingerprint(recorded, name, fp, stage);
  return {io::model_from_json(j), io::sha256_hex(text)};
}

KoopmanSpectrum compute_spectrum(const LiftedModel& model, const experiment::Split& split) {
  const auto training = concatenate(experiment::lift_parts(split.training, model.dictionary));
  return hdmd::spectrum(model, training);
}

// --- stages ---------------------------------------------------------------

void cmd_collect(const Context& ctx) {
  const std::string stage = "collect";
  const auto data = experiment::collect(ctx.cfg);
  Json files = Json::object();
  for (std::size_t r = 0; r < data.runs.size(); ++r) {
    const auto& run = data.runs[r];
    if (run.samples() == 1) {
      log(stage, "warning: regime '" + ctx.cfg.regimes[r].name +
                     "' has zero duration; writing a single-sample trajectory");
    }
    const std::string text = io::trajectory_csv(run);
    io::write_atomic(ctx.out / ctx.data_name(r), text);
    io::write_atomic(ctx.data_dir() / (ctx.cfg.regimes[r].name + "_signal.csv"),
                     io::signal_csv(run.inputs, run.sample_dt, true));
    files[ctx.data_name(r)] = io::sha256_hex(text);
    log(stage, ctx.data_name(r) + ": " + std::to_string(run.samples()) + " samples");
  }
  Json manifest{{"format", "koopman-dataset"},
                {"inputs", {{"config", ctx.config_fp}}},
                {"config", experiment::config_to_json(ctx.cfg)},
                {"files", files}};
  io::write_atomic(ctx.data_dir() / "collect.json", pretty(manifest));
}

void cmd_train(const Context& ctx) {
  const std::string stage = "train";
  const auto up = load_dataset(ctx, stage);
  const auto split = experiment::split_halves(up.runs);
  const auto model = experiment::train(ctx.cfg, split);
  io::Fingerprints inputs = up.data_fps;
  inputs["config"] = ctx.config_fp;
  io::write_atomic(ctx.model_path(), pretty(io::model_to_json(model, inputs)));
  log(stage, "lifted model " + std::to_string(model.system.state_dim()) + "x" +
                 std::to_string(model.system.state_dim()) + " from " +
                 std::to_string(model.training_snapshots) + " snapshots");
}

void cmd_spectrum(const Context& ctx) {
  const std::string stage = "spectrum";
  const auto up = load_dataset(ctx, stage);
  const auto art = load_model(ctx, up, stage);
  const auto split = experiment::split_halves(up.runs);
  const auto spec = compute_spectrum(art.model, split);
  Json summary{{"format", "koopman-spectrum"},
               {"inputs", {{"config", ctx.config_fp}, {"model.json", art.fingerprint}}},
               {"lifted_dim", spec.size()},
               {"eigenvector_condition", spec.condition},
               {"spectral_radius", spec.eigenvalues.cwiseAbs().maxCoeff()},
               {"files", Json::object()}};
  for (auto n : ctx.cfg.mode_counts) {
    const std::string name = "spectrum_" + experiment::mode_label(n) + ".csv";
    const std::string text = io::spectrum_csv(spec, experiment::mode_selection(spec, n));
    io::write_atomic(ctx.out / name, text);
    summary["files"][name] = io::sha256_hex(text);
  }
  io::write_atomic(ctx.out / "spectrum.json", pretty(summary));
  log(stage, std::to_string(spec.size()) + " eigenvalues, condition " +
                 io::format_double(spec.condition));
}

void cmd_reduce(const Context& ctx) {
  const std::string stage = "reduce";
  const auto up = load_dataset(ctx, stage);
  const auto art = load_model(ctx, up, stage);
  const auto split = experiment::split_halves(up.runs);
  const auto spec = compute_spectrum(art.model, split);
  for (auto n : ctx.cfg.mode_counts) {
    auto rm = reduce::project(art.model, spec, experiment::mode_selection(spec, n));
    rm.parent_fingerprint = art.fingerprint;
    io::write_atomic(ctx.reduced_path(n),
                     pretty(io::reduced_to_json(
                         rm, art.model, {{"config", ctx.config_fp}, {"model.json", art.fingerprint}})));
    log(stage, experiment::mode_label(n) + ": dimension " + std::to_string(rm.dimension()) +
                   ", power fraction " + io::format_double(rm.power_fraction));
  }
}

void cmd_control(const Context& ctx) {
  const std::string stage = "control";
  const auto up = load_dataset(ctx, stage);
  const auto art = load_model(ctx, up, stage);
  const auto split = experiment::split_halves(up.runs);
  const auto target = experiment::pick_target(
      split.training.at(static_cast<std::size_t>(ctx.cfg.lqr.target_regime)).trajectory);
  const auto start = experiment::initial_state(ctx.cfg);
  const RealVector x0 = plant::observe(start);
  const double dt = ctx.cfg.plant.sample_dt;

  Json results = Json::array();
  for (auto n : ctx.cfg.mode_counts) {
    const std::string label = experiment::mode_label(n);
    const Json j = load_json(ctx.reduced_path(n));
    io::require_fingerprint(io::inputs_of(j), "model.json", art.fingerprint, stage);
    const ReducedModel rm = io::reduced_from_json(j);
    const auto pm = experiment::planning_model(art.model, &rm, x0, target.x_ref);
    const auto outcome = experiment::run_control(ctx.cfg, pm, start, target, ctx.cfg.lqr.feedforward);
    io::write_atomic(ctx.out / ("plan_" + label + ".csv"), io::signal_csv(outcome.plan.inputs, dt, false));
    io::write_atomic(ctx.out / ("deployed_" + label + ".csv"), io::trajectory_csv(outcome.deployed));
    io::write_atomic(ctx.out / ("pose_" + label + ".csv"), io::pose_csv(outcome.pose_error, dt));
    results.push_back({{"modes", label},
                       {"dimension", outcome.dimension},
                       {"steady_state_error", outcome.steady_state_error},
                       {"final_error_m", (outcome.deployed.states.rightCols(1) - target.x_ref).norm()},
                       {"saturation_fraction", outcome.plan.saturation_fraction},
                       {"closed_loop_radius", outcome.design.closed_loop_radius},
                       {"dare_iterations", outcome.design.dare_iterations}});
    log(stage, label + ": steady-state pose error " + io::format_double(outcome.steady_state_error));
  }
  Json summary{{"format", "koopman-control"},
               {"config", experiment::config_to_json(ctx.cfg)},
               {"inputs", {{"config", ctx.config_fp}, {"model.json", art.fingerprint}}},
               {"target", {{"regime", ctx.cfg.regimes[static_cast<std::size_t>(ctx.cfg.lqr.target_regime)].name},
                           {"index", target.index},
                           {"hold_samples", target.hold_samples},
                           {"displacement_m", (target.x_ref - x0).norm()}}},
               {"feedforward", ctx.cfg.lqr.feedforward},
               {"results", results}};
  io::write_atomic(ctx.out / "control.json", pretty(summary));
}

void cmd_evaluate(const Context& ctx) {
  const std::string stage = "evaluate";
  const auto up = load_dataset(ctx, stage);
  const auto art = load_model(ctx, up, stage);
  const auto split = experiment::split_halves(up.runs);
  const auto& dict = art.model.dictionary;

  const auto verification = concatenate(experiment::lift_parts(split.verification, dict));
  const auto training = concatenate(experiment::lift_parts(split.training, dict));
  if (!eval::disjoint(training.times, verification.times)) {
    throw InvalidSpec("training and verification samples overlap");
  }
  auto report = eval::single_step_error(art.model.system, verification);
  Json summary{{"format", "koopman-evaluation"},
               {"inputs", {{"config", ctx.config_fp}, {"model.json", art.fingerprint}}},
               {"e_rms", report.e_rms},
               {"verification_samples", report.verification_samples},
               {"excluded", report.excluded},
               {"training_snapshots", art.model.training_snapshots}};
  log(stage, "held-out e_rms " + io::format_double(report.e_rms));
  if (ctx.on_training) {
    const auto self = eval::single_step_error(art.model.system, training);
    summary["e_rms_on_training"] = self.e_rms;
    log(stage, "on-training e_rms " + io::format_double(self.e_rms));
  }

  const auto roll = experiment::verification_rollout(ctx.cfg, art.model, split);
  io::write_atomic(ctx.out / "rollout.csv", io::rollout_csv(roll, ctx.cfg.plant.sample_dt));
  summary["rollout"] = {{"steps", roll.errors.size() - 1},
                        {"max_error", roll.max_error},
                        {"mean_error", roll.mean_error},
                        {"amplitude_m", roll.amplitude}};

  eval::SweepOptions opts;
  opts.threads = experiment::sweep_threads();
  opts.rcond = ctx.cfg.rcond;
  const std::pair<ObservableKind, const std::vector<int>*> sweeps[] = {
      {ObservableKind::delay, &ctx.cfg.sweep.delay_orders},
      {ObservableKind::monomial, &ctx.cfg.sweep.monomial_orders}};
  for (const auto& [kind, orders] : sweeps) {
    if (orders->empty()) continue;
    const auto cells = eval::convergence_sweep(split.training, split.verification, kind, *orders,
                                               ctx.cfg.sweep.sample_counts, opts);
    const std::string name = "sweep_" + to_string(kind) + ".csv";
    io::write_atomic(ctx.out / name, io::sweep_csv(cells));
    for (const auto& c : cells) {
      if (c.status == eval::CellStatus::failed) {
        log(stage, name + ": cell order " + std::to_string(c.order) + " failed: " + c.message);
      }
    }
  }
  io::write_atomic(ctx.out / "evaluate.json", pretty(summary));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman lifted-model identification and LQR planning for a soft-arm surrogate"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool feedforward = false;
  bool on_training = false;

  const std::map<std::string, void (*)(const Context&)> stages{
      {"collect", cmd_collect}, {"train", cmd_train},     {"spectrum", cmd_spectrum},
      {"reduce", cmd_reduce},   {"control", cmd_control}, {"evaluate", cmd_evaluate}};
  const std::map<std::string, std::string> help{
      {"collect", "simulate both training regimes and write trajectory CSVs"},
      {"train", "fit the lifted linear model"},
      {"spectrum", "eigenvalues and mode powers of the lifted model"},
      {"reduce", "mode-trimmed models for each configured mode count"},
      {"control", "plan open-loop LQR inputs and deploy them on the plant"},
      {"evaluate", "single-step error, rollout and convergence sweeps"}};
  for (const auto& [name, fn] : stages) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "global seed (overrides the config)");
    sub->add_flag("--feedforward", feedforward, "add the held training input to the LQR law");
    if (name == "evaluate") {
      sub->add_flag("--on-training", on_training, "also score the training data");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    Context ctx;
    ctx.cfg = experiment::load_config(config_path);
    if (seed) ctx.cfg.seed = *seed;
    if (feedforward) ctx.cfg.lqr.feedforward = true;
    if (!out_dir.empty()) ctx.cfg.output_dir = out_dir;
    ctx.config_fp = experiment::config_fingerprint(ctx.cfg);
    ctx.out = ctx.cfg.output_dir;
    ctx.on_training = on_training;
    stages.at(stage)(ctx);
    return kOk;
  } catch (const Error& e) {
    log(stage, e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    log(stage, e.what());
    return kOther;
  }
}
