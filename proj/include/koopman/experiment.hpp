#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "koopman/control.hpp"
#include "koopman/eval.hpp"
#include "koopman/io.hpp"
#include "koopman/signals.hpp"

namespace koopman::experiment {

/// Mode count 0 stands for the unreduced lifted model.
inline constexpr Eigen::Index kFullModel = 0;
/// Sample count 0 in a sweep means every available snapshot.
inline constexpr Eigen::Index kAllSamples = 0;
/// Global sample index offset between runs, for split bookkeeping.
inline constexpr Eigen::Index kRunStride = 100'000'000;

struct Regime {
  std::string name;
  signals::SignalSpec signal;  // seed is filled from the global seed
};

struct LqrConfig {
  double q_weight = 1.0;
  double r_weight = 10.0;
  control::InputBounds bounds;
  Eigen::Index horizon_steps = 2000;
  double steady_state_from = 25.0;  // s
  bool feedforward = false;
  /// Run whose training half supplies the target pose.
  int target_regime = 1;
};

struct SweepConfig {
  std::vector<int> delay_orders{0, 1, 3, 5, 10};
  std::vector<int> monomial_orders{1, 2, 3, 4};
  std::vector<Eigen::Index> sample_counts{1000, 3000, 10000, kAllSamples};
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  plant::PlantConfig plant;
  double settle_seconds = 60.0;
  std::vector<Regime> regimes;
  ObservableDictionary dictionary;
  double rcond = numerics::kDefaultRcond;
  LqrConfig lqr;
  std::vector<Eigen::Index> mode_counts{7, 16, 35, 60, kFullModel};
  SweepConfig sweep;
  double rollout_seconds = 20.0;
  int rollout_regime = 1;
};

/// Defaults: Gaussian-mixture run and random-step run, 540 s each.
ExperimentConfig default_config();
/// Strict: unknown keys and bad values raise ConfigError.
ExperimentConfig config_from_json(const io::Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical form of everything that affects outputs (output_dir excluded).
io::Json config_to_json(const ExperimentConfig& cfg);
/// Hash of the settings that determine the dataset and the lifted model.
std::string config_fingerprint(const ExperimentConfig& cfg);

signals::SignalSpec regime_signal(const ExperimentConfig& cfg, std::size_t regime);

struct Dataset {
  plant::PlantState initial;  // settled state every run starts from
  std::vector<Trajectory> runs;
};

plant::PlantState initial_state(const ExperimentConfig& cfg);
/// Drives every regime through the plant from the settled state.
Dataset collect(const ExperimentConfig& cfg);

/// First half of each run trains, second half verifies.
struct Split {
  std::vector<eval::IndexedTrajectory> training;
  std::vector<eval::IndexedTrajectory> verification;
};
Split split_halves(const std::vector<Trajectory>& runs);

std::vector<LiftedSnapshotSet> lift_parts(const std::vector<eval::IndexedTrajectory>& parts,
                                          const ObservableDictionary& dict);

LiftedModel train(const ExperimentConfig& cfg, const Split& split);

struct TargetPose {
  Eigen::Index index = 0;  // sample index within the run
  RealVector x_ref;
  RealVector u_hold;       // input held while the pose was reached
  Eigen::Index hold_samples = 0;
};

/// End of the longest constant-input stretch of `run`.
TargetPose pick_target(const Trajectory& run);

struct ControlOutcome {
  Eigen::Index requested_modes = 0;
  Eigen::Index dimension = 0;
  control::LQRDesign design;
  control::OpenLoopPlan plan;
  Trajectory deployed;
  RealVector pose_error;
  double steady_state_error = 0.0;
};

/// Top-n modes closed under conjugation; every mode for kFullModel. The
/// full selection still goes through reduce::project, which gives a modal
/// (realified eigenbasis) form of the lifted model. LQR is invariant under
/// that change of coordinates and the Riccati solve is far better scaled there.
std::vector<Eigen::Index> mode_selection(const KoopmanSpectrum& spec, Eigen::Index n);

/// Model used for planning; `reduced` null means the raw lifted coordinates.
struct PlanningModel {
  LinearModel system;
  RealVector z0;
  RealVector z_ref;
  Eigen::Index dimension() const { return system.state_dim(); }
};

PlanningModel planning_model(const LiftedModel& model, const ReducedModel* reduced,
                             const RealVector& x0, const RealVector& x_ref);

ControlOutcome run_control(const ExperimentConfig& cfg, const PlanningModel& pm,
                           const plant::PlantState& start, const TargetPose& target,
                           bool feedforward);

/// 20 s style rollout on the verification half of the rollout regime.
eval::RolloutResult verification_rollout(const ExperimentConfig& cfg, const LiftedModel& model,
                                         const Split& split);

/// Worker count for sweeps: KOOPMAN_CTL_THREADS if set, else the hardware.
unsigned sweep_threads();

std::string mode_label(Eigen::Index n);

}  // namespace koopman::experiment
