#pragma once

#include <string>
#include <vector>

#include "koopman/numerics.hpp"
#include "koopman/plant.hpp"

namespace koopman {

enum class ObservableKind { delay, monomial };

std::string to_string(ObservableKind kind);
ObservableKind observable_kind_from_string(const std::string& name);

/// Lifting map z = f(x).
///
/// delay:    z_k = [x_k; x_{k-1}; ...; x_{k-d}], order = d >= 0
/// monomial: z_k = [x_k; x_k.^2; ...; x_k.^i],   order = i >= 1
struct ObservableDictionary {
  static constexpr int kMaxDelay = 200;
  static constexpr int kMaxMonomial = 32;

  ObservableKind kind = ObservableKind::delay;
  int order = 10;
  int state_dim = 45;

  Eigen::Index lifted_dim() const;
  /// Samples of history one lifted vector consumes.
  int history_length() const { return kind == ObservableKind::delay ? order + 1 : 1; }

  bool operator==(const ObservableDictionary&) const = default;
};

/// Throws InvalidSpec when order or state_dim are out of range.
void validate(const ObservableDictionary& dict);

/// Time-aligned lifted snapshot pairs: column k of `next` is the one-step
/// successor of column k of `current` under input column k of `inputs`.
struct LiftedSnapshotSet {
  RealMatrix current;  // X_lift
  RealMatrix next;     // X+_lift
  RealMatrix inputs;   // U
  ObservableDictionary dictionary;
  double sample_dt = 0.02;
  /// Global sample index of the time k each column is lifted at.
  std::vector<Eigen::Index> times;

  Eigen::Index size() const { return current.cols(); }
  /// First `count` columns.
  LiftedSnapshotSet head(Eigen::Index count) const;
};

/// `first_index` is the global index of the trajectory's first sample, used
/// only for split bookkeeping.
LiftedSnapshotSet delay_lift(const Trajectory& trajectory, int delays,
                             Eigen::Index first_index = 0);

LiftedSnapshotSet monomial_lift(const Trajectory& trajectory, int max_order,
                                Eigen::Index first_index = 0);

LiftedSnapshotSet lift(const Trajectory& trajectory, const ObservableDictionary& dict,
                       Eigen::Index first_index = 0);

/// Column-wise concatenation of sets built with the same dictionary.
LiftedSnapshotSet concatenate(const std::vector<LiftedSnapshotSet>& parts);

/// C with x = C z: selects the current-sample (delay) or power-1 (monomial)
/// block.
RealMatrix projection_matrix(const ObservableDictionary& dict);

/// Lifts the newest sample of `history` (columns oldest to newest).
RealVector lift_point(const RealMatrix& history, const ObservableDictionary& dict);

}  // namespace koopman
