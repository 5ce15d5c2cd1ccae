#pragma once

#include <string>
#include <vector>

#include "koopman/hdmd.hpp"
#include "koopman/observables.hpp"
#include "koopman/plant.hpp"

namespace koopman::eval {

/// Single-step reconstruction scores.
///
///   e_i   = ||x+_predict - x+_actual|| / ||x+_actual - x_i||
///   e_RMS = sqrt(mean(e_i^2))
///
/// Samples with a zero denominator are left out of `errors` and counted in
/// `excluded`.
struct EvaluationReport {
  RealVector errors;
  double e_rms = 0.0;
  Eigen::Index excluded = 0;
  Eigen::Index verification_samples = 0;  // N (columns offered)
  Eigen::Index training_snapshots = 0;    // K
  std::string fingerprint;
};

double rms(const RealVector& errors);

EvaluationReport single_step_error(const LinearModel& model,
                                   const LiftedSnapshotSet& verification);

struct RolloutResult {
  RealMatrix predicted;  // x^_k, k = 0..steps
  RealVector errors;     // ||x^_k - x_k|| / amplitude
  double amplitude = 0.0;
  double max_error = 0.0;
  double mean_error = 0.0;
};

/// RMS distance of the samples from their mean, sqrt(mean_k ||x_k - mean||^2).
double rms_amplitude(const RealMatrix& states);

/// Iterates the lifted model from the lift of `history` (oldest to newest;
/// its newest column is x_0) under `inputs`, scoring against `actual`
/// (columns x_0..x_steps).
RolloutResult rollout_reconstruction(const LiftedModel& model, const RealMatrix& history,
                                     const RealMatrix& inputs, const RealMatrix& actual);

enum class CellStatus { ok, failed };

struct SweepCell {
  int order = 0;
  Eigen::Index samples = 0;
  double e_rms = 0.0;
  CellStatus status = CellStatus::ok;
  std::string message;
};

struct SweepOptions {
  unsigned threads = 1;
  double rcond = numerics::kDefaultRcond;
};

/// Takes `count` snapshots spread over the parts in proportion to their sizes,
/// each part contributing a prefix. A count of 0 takes everything.
LiftedSnapshotSet take_balanced(const std::vector<LiftedSnapshotSet>& parts,
                                Eigen::Index count);

/// One fit + single-step evaluation per (order, sample count) cell, returned
/// in row-major (order, count) order regardless of completion order. Each
/// trajectory part keeps its global index offset for split bookkeeping.
struct IndexedTrajectory {
  Trajectory trajectory;
  Eigen::Index first_index = 0;
};

std::vector<SweepCell> convergence_sweep(const std::vector<IndexedTrajectory>& training,
                                         const std::vector<IndexedTrajectory>& verification,
                                         ObservableKind kind,
                                         const std::vector<int>& orders,
                                         const std::vector<Eigen::Index>& sample_counts,
                                         const SweepOptions& options = {});

/// e(t) = ||x(t) - x_ref|| / ||x0 - x_ref||. Throws InvalidReference if x0 == x_ref.
RealVector pose_error_curve(const RealMatrix& actual, const RealVector& x_ref,
                            const RealVector& x0);

/// Mean of `curve` over samples with t = k * sample_dt >= from_time.
double steady_state_error(const RealVector& curve, double sample_dt, double from_time);

/// True when no verification time index appears among the training ones.
bool disjoint(const std::vector<Eigen::Index>& training,
              const std::vector<Eigen::Index>& verification);

}  // namespace koopman::eval
