#include "koopman/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "koopman/errors.hpp"
#include "koopman/rng.hpp"

namespace koopman::experiment {

namespace {

using io::Json;

// Stream ids for derive_seed.
constexpr std::uint64_t kSignalStream = 1;
constexpr std::uint64_t kNoiseStream = 1000;

void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

Eigen::Index read_count(const Json& v, const char* word, Eigen::Index word_value,
                        const std::string& where) {
  if (v.is_string() && v.get<std::string>() == word) return word_value;
  if (v.is_number_integer() && v.get<long long>() > 0) return v.get<Eigen::Index>();
  throw ConfigError(where + " entries must be positive integers or \"" + word + "\"");
}

Json count_json(Eigen::Index n, const char* word) {
  return n == 0 ? Json(word) : Json(n);
}

plant::PlantConfig plant_from(const Json& j) {
  const std::string w = "plant";
  check_keys(j, {"node_count", "segment_rest_length", "axial_stiffness", "cubic_stiffness",
                 "bending_stiffness", "damping", "node_mass", "tip_extra_mass", "muscle_gain",
                 "helical_pitch", "axial_component", "gravity", "integrator_dt", "sample_dt",
                 "observation_noise"},
             w);
  plant::PlantConfig p;
  read(j, "node_count", p.node_count, w);
  read(j, "segment_rest_length", p.segment_rest_length, w);
  read(j, "axial_stiffness", p.axial_stiffness, w);
  read(j, "cubic_stiffness", p.cubic_stiffness, w);
  read(j, "bending_stiffness", p.bending_stiffness, w);
  read(j, "damping", p.damping, w);
  read(j, "node_mass", p.node_mass, w);
  read(j, "tip_extra_mass", p.tip_extra_mass, w);
  read(j, "muscle_gain", p.muscle_gain, w);
  read(j, "helical_pitch", p.helical_pitch, w);
  read(j, "axial_component", p.axial_component, w);
  read(j, "gravity", p.gravity, w);
  read(j, "integrator_dt", p.integrator_dt, w);
  read(j, "sample_dt", p.sample_dt, w);
  read(j, "observation_noise", p.observation_noise, w);
  return p;
}

Json plant_json(const plant::PlantConfig& p) {
  return Json{{"node_count", p.node_count},
              {"segment_rest_length", p.segment_rest_length},
              {"axial_stiffness", p.axial_stiffness},
              {"cubic_stiffness", p.cubic_stiffness},
              {"bending_stiffness", p.bending_stiffness},
              {"damping", p.damping},
              {"node_mass", p.node_mass},
              {"tip_extra_mass", p.tip_extra_mass},
              {"muscle_gain", p.muscle_gain},
              {"helical_pitch", p.helical_pitch},
              {"axial_component", p.axial_component},
              {"gravity", p.gravity},
              {"integrator_dt", p.integrator_dt},
              {"sample_dt", p.sample_dt},
              {"observation_noise", p.observation_noise}};
}

Regime regime_from(const Json& j, const std::string& w) {
  check_keys(j, {"name", "kind", "duration", "u_min", "u_max", "n_gaussians", "hold_min",
                 "hold_max", "level"},
             w);
  Regime r;
  read(j, "name", r.name, w);
  std::string kind = signals::to_string(r.signal.kind);
  read(j, "kind", kind, w);
  try {
    r.signal.kind = signals::signal_kind_from_string(kind);
  } catch (const Error& e) {
    throw ConfigError(w + ".kind: " + e.what());
  }
  read(j, "duration", r.signal.duration, w);
  read(j, "u_min", r.signal.u_min, w);
  read(j, "u_max", r.signal.u_max, w);
  read(j, "n_gaussians", r.signal.n_gaussians, w);
  read(j, "hold_min", r.signal.hold_min, w);
  read(j, "hold_max", r.signal.hold_max, w);
  if (j.contains("level")) {
    double level = 0.0;
    read(j, "level", level, w);
    r.signal.level = level;
  }
  return r;
}

Json regime_json(const Regime& r) {
  Json out{{"name", r.name},
           {"kind", signals::to_string(r.signal.kind)},
           {"duration", r.signal.duration},
           {"u_min", r.signal.u_min},
           {"u_max", r.signal.u_max},
           {"n_gaussians", r.signal.n_gaussians},
           {"hold_min", r.signal.hold_min},
           {"hold_max", r.signal.hold_max}};
  if (r.signal.level) out["level"] = *r.signal.level;
  return out;
}

void validate_config(const ExperimentConfig& cfg) {
  try {
    plant::validate(cfg.plant);
    validate(cfg.dictionary);
    for (std::size_t r = 0; r < cfg.regimes.size(); ++r) signals::validate(regime_signal(cfg, r));
  } catch (const InvalidSpec& e) {
    throw ConfigError(e.what());
  }
  if (cfg.dictionary.state_dim != cfg.plant.state_dim()) {
    throw ConfigError("dictionary.state_dim must equal 3 * plant.node_count");
  }
  if (cfg.regimes.empty()) throw ConfigError("at least one regime is required");
  const auto n_regimes = static_cast<int>(cfg.regimes.size());
  if (cfg.lqr.target_regime < 0 || cfg.lqr.target_regime >= n_regimes ||
      cfg.rollout_regime < 0 || cfg.rollout_regime >= n_regimes) {
    throw ConfigError("target_regime and rollout_regime must index a regime");
  }
  if (!(cfg.lqr.q_weight >= 0.0) || !(cfg.lqr.r_weight > 0.0)) {
    throw ConfigError("lqr.q must be >= 0 and lqr.r > 0");
  }
  if (!(cfg.lqr.bounds.lower < cfg.lqr.bounds.upper) || cfg.lqr.bounds.lower < 0.0 ||
      cfg.lqr.bounds.upper > 1.0) {
    throw ConfigError("lqr bounds must satisfy 0 <= u_min < u_max <= 1");
  }
  if (cfg.lqr.horizon_steps < 1) throw ConfigError("lqr.horizon_steps must be positive");
  if (!(cfg.rcond > 0.0)) throw ConfigError("rcond must be positive");
  if (!(cfg.settle_seconds >= 0.0)) throw ConfigError("settle_seconds must be >= 0");
  if (!(cfg.rollout_seconds > 0.0)) throw ConfigError("rollout_seconds must be positive");
  if (cfg.mode_counts.empty()) throw ConfigError("mode_counts is empty");
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  Regime gauss;
  gauss.name = "gaussian";
  gauss.signal.kind = signals::SignalKind::gaussian_mixture;
  Regime steps;
  steps.name = "steps";
  steps.signal.kind = signals::SignalKind::random_steps;
  cfg.regimes = {gauss, steps};
  return cfg;
}

ExperimentConfig config_from_json(const Json& j) {
  check_keys(j, {"seed", "output_dir", "plant", "settle_seconds", "regimes", "dictionary",
                 "rcond", "lqr", "mode_counts", "sweep", "rollout_seconds", "rollout_regime"},
             "config");
  ExperimentConfig cfg = default_config();
  read(j, "seed", cfg.seed, "config");
  std::string out_dir = cfg.output_dir.string();
  read(j, "output_dir", out_dir, "config");
  cfg.output_dir = out_dir;
  if (j.contains("plant")) cfg.plant = plant_from(j.at("plant"));
  read(j, "settle_seconds", cfg.settle_seconds, "config");
  if (j.contains("regimes")) {
    if (!j.at("regimes").is_array()) throw ConfigError("regimes must be an array");
    cfg.regimes.clear();
    for (std::size_t i = 0; i < j.at("regimes").size(); ++i) {
      cfg.regimes.push_back(regime_from(j.at("regimes")[i], "regimes[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("dictionary")) {
    const Json& d = j.at("dictionary");
    check_keys(d, {"kind", "order"}, "dictionary");
    std::string kind = to_string(cfg.dictionary.kind);
    read(d, "kind", kind, "dictionary");
    try {
      cfg.dictionary.kind = observable_kind_from_string(kind);
    } catch (const Error& e) {
      throw ConfigError(std::string("dictionary.kind: ") + e.what());
    }
    read(d, "order", cfg.dictionary.order, "dictionary");
  }
  cfg.dictionary.state_dim = cfg.plant.state_dim();
  read(j, "rcond", cfg.rcond, "config");
  if (j.contains("lqr")) {
    const Json& l = j.at("lqr");
    check_keys(l, {"q", "r", "u_min", "u_max", "horizon_steps", "steady_state_from",
                   "feedforward", "target_regime"},
               "lqr");
    read(l, "q", cfg.lqr.q_weight, "lqr");
    read(l, "r", cfg.lqr.r_weight, "lqr");
    read(l, "u_min", cfg.lqr.bounds.lower, "lqr");
    read(l, "u_max", cfg.lqr.bounds.upper, "lqr");
    read(l, "horizon_steps", cfg.lqr.horizon_steps, "lqr");
    read(l, "steady_state_from", cfg.lqr.steady_state_from, "lqr");
    read(l, "feedforward", cfg.lqr.feedforward, "lqr");
    read(l, "target_regime", cfg.lqr.target_regime, "lqr");
  }
  if (j.contains("mode_counts")) {
    if (!j.at("mode_counts").is_array()) throw ConfigError("mode_counts must be an array");
    cfg.mode_counts.clear();
    for (const auto& v : j.at("mode_counts")) {
      cfg.mode_counts.push_back(read_count(v, "full", kFullModel, "mode_counts"));
    }
  }
  if (j.contains("sweep")) {
    const Json& s = j.at("sweep");
    check_keys(s, {"delay_orders", "monomial_orders", "sample_counts"}, "sweep");
    read(s, "delay_orders", cfg.sweep.delay_orders, "sweep");
    read(s, "monomial_orders", cfg.sweep.monomial_orders, "sweep");
    if (s.contains("sample_counts")) {
      if (!s.at("sample_counts").is_array()) throw ConfigError("sweep.sample_counts must be an array");
      cfg.sweep.sample_counts.clear();
      for (const auto& v : s.at("sample_counts")) {
        cfg.sweep.sample_counts.push_back(read_count(v, "all", kAllSamples, "sweep.sample_counts"));
      }
    }
  }
  read(j, "rollout_seconds", cfg.rollout_seconds, "config");
  read(j, "rollout_regime", cfg.rollout_regime, "config");
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  Json j;
  try {
    j = io::parse_json(text, path.string());
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j);
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json regimes = Json::array();
  for (const auto& r : cfg.regimes) regimes.push_back(regime_json(r));
  Json modes = Json::array();
  for (auto n : cfg.mode_counts) modes.push_back(count_json(n, "full"));
  Json counts = Json::array();
  for (auto n : cfg.sweep.sample_counts) counts.push_back(count_json(n, "all"));
  return Json{{"seed", cfg.seed},
              {"plant", plant_json(cfg.plant)},
              {"settle_seconds", cfg.settle_seconds},
              {"regimes", regimes},
              {"dictionary", {{"kind", to_string(cfg.dictionary.kind)},
                              {"order", cfg.dictionary.order}}},
              {"rcond", cfg.rcond},
              {"lqr", {{"q", cfg.lqr.q_weight},
                       {"r", cfg.lqr.r_weight},
                       {"u_min", cfg.lqr.bounds.lower},
                       {"u_max", cfg.lqr.bounds.upper},
                       {"horizon_steps", cfg.lqr.horizon_steps},
                       {"steady_state_from", cfg.lqr.steady_state_from},
                       {"feedforward", cfg.lqr.feedforward},
                       {"target_regime", cfg.lqr.target_regime}}},
              {"mode_counts", modes},
              {"sweep", {{"delay_orders", cfg.sweep.delay_orders},
                         {"monomial_orders", cfg.sweep.monomial_orders},
                         {"sample_counts", counts}}},
              {"rollout_seconds", cfg.rollout_seconds},
              {"rollout_regime", cfg.rollout_regime}};
}

std::string config_fingerprint(const ExperimentConfig& cfg) {
  Json j = config_to_json(cfg);
  // Planning and reporting settings only shape the last stages' own outputs.
  for (const char* key : {"lqr", "mode_counts", "sweep", "rollout_seconds", "rollout_regime"}) {
    j.erase(key);
  }
  return io::sha256_hex(j.dump());
}

signals::SignalSpec regime_signal(const ExperimentConfig& cfg, std::size_t regime) {
  signals::SignalSpec s = cfg.regimes.at(regime).signal;
  s.sample_dt = cfg.plant.sample_dt;
  s.channel_count = plant::kInputDim;
  s.seed = derive_seed(cfg.seed, kSignalStream + regime);
  return s;
}

plant::PlantState initial_state(const ExperimentConfig& cfg) {
  return plant::settle(cfg.plant, cfg.settle_seconds);
}

Dataset collect(const ExperimentConfig& cfg) {
  Dataset out;
  out.initial = initial_state(cfg);
  for (std::size_t r = 0; r < cfg.regimes.size(); ++r) {
    const RealMatrix u = signals::generate(regime_signal(cfg, r));
    plant::PlantConfig pc = cfg.plant;
    pc.noise_seed = derive_seed(cfg.seed, kNoiseStream + r);
    // N samples and N inputs; the last input is recorded but never applied.
    auto sim = plant::simulate(out.initial, u.leftCols(u.cols() - 1), pc);
    sim.trajectory.inputs = u;
    out.runs.push_back(std::move(sim.trajectory));
  }
  return out;
}

Split split_halves(const std::vector<Trajectory>& runs) {
  Split out;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const Eigen::Index n = runs[r].samples();
    const Eigen::Index half = n / 2;
    const Eigen::Index base = static_cast<Eigen::Index>(r) * kRunStride;
    out.training.push_back({runs[r].slice(0, half), base});
    out.verification.push_back({runs[r].slice(half, n - half), base + half});
  }
  return out;
}

std::vector<LiftedSnapshotSet> lift_parts(const std::vector<eval::IndexedTrajectory>& parts,
                                          const ObservableDictionary& dict) {
  std::vector<LiftedSnapshotSet> out;
  for (const auto& p : parts) out.push_back(lift(p.trajectory, dict, p.first_index));
  return out;
}

LiftedModel train(const ExperimentConfig& cfg, const Split& split) {
  return hdmd::fit(concatenate(lift_parts(split.training, cfg.dictionary)), cfg.rcond);
}

TargetPose pick_target(const Trajectory& run) {
  const Eigen::Index m = run.transitions();
  if (m < 1) throw InsufficientData("run too short to pick a target pose");
  TargetPose best;
  Eigen::Index start = 0;
  for (Eigen::Index k = 1; k <= m; ++k) {
    if (k < m && run.inputs.col(k) == run.inputs.col(start)) continue;
    const Eigen::Index len = k - start;
    if (len > best.hold_samples) {
      best.hold_samples = len;
      best.index = k;  // state after the last held input
      best.u_hold = run.inputs.col(start);
    }
    start = k;
  }
  best.x_ref = run.states.col(best.index);
  return best;
}

std::vector<Eigen::Index> mode_selection(const KoopmanSpectrum& spec, Eigen::Index n) {
  if (n != kFullModel) return reduce::select_modes(spec, n);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(spec.size()));
  for (Eigen::Index i = 0; i < spec.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

PlanningModel planning_model(const LiftedModel& model, const ReducedModel* reduced,
                             const RealVector& x0, const RealVector& x_ref) {
  PlanningModel pm;
  pm.system = reduced ? reduced->system : model.system;
  pm.z0 = control::lift_reference(x0, model.dictionary, reduced);
  pm.z_ref = control::lift_reference(x_ref, model.dictionary, reduced);
  return pm;
}

ControlOutcome run_control(const ExperimentConfig& cfg, const PlanningModel& pm,
                           const plant::PlantState& start, const TargetPose& target,
                           bool feedforward) {
  ControlOutcome out;
  out.dimension = pm.dimension();
  const auto p = pm.system.output_dim();
  const auto m = pm.system.input_dim();
  out.design = control::design(pm.system, control::diagonal(p, cfg.lqr.q_weight),
                               control::diagonal(m, cfg.lqr.r_weight));
  control::PlanOptions opts;
  opts.bounds = cfg.lqr.bounds;
  if (feedforward) opts.feedforward = target.u_hold;
  out.plan = control::plan_open_loop(out.design, pm.system, pm.z0, pm.z_ref,
                                     cfg.lqr.horizon_steps, opts);
  out.deployed = control::deploy(cfg.plant, start, out.plan.inputs).trajectory;
  out.pose_error =
      eval::pose_error_curve(out.deployed.states, target.x_ref, plant::observe(start));
  out.steady_state_error =
      eval::steady_state_error(out.pose_error, cfg.plant.sample_dt, cfg.lqr.steady_state_from);
  return out;
}

eval::RolloutResult verification_rollout(const ExperimentConfig& cfg, const LiftedModel& model,
                                         const Split& split) {
  const auto& run = split.verification.at(static_cast<std::size_t>(cfg.rollout_regime)).trajectory;
  const Eigen::Index lag = model.dictionary.history_length() - 1;
  const auto steps = static_cast<Eigen::Index>(std::llround(cfg.rollout_seconds / run.sample_dt));
  if (lag + steps + 1 > run.samples() || lag + steps > run.inputs.cols()) {
    throw InsufficientData("verification run is shorter than the rollout");
  }
  return eval::rollout_reconstruction(model, run.states.leftCols(lag + 1),
                                      run.inputs.middleCols(lag, steps),
                                      run.states.middleCols(lag, steps + 1));
}

unsigned sweep_threads() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("KOOPMAN_CTL_THREADS");
  if (env == nullptr || *env == '\0') return hw;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) {
    throw ConfigError("KOOPMAN_CTL_THREADS must be a positive integer");
  }
  return static_cast<unsigned>(std::min<unsigned long>(v, 1024));
}

std::string mode_label(Eigen::Index n) {
  return n == kFullModel ? "full" : "n" + std::to_string(n);
}

}  // namespace koopman::experiment
