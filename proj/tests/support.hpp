#pragma once

// Synthetic-data helpers shared by the unit tests and the acceptance gate.

#include "koopman/hdmd.hpp"
#include "koopman/numerics.hpp"
#include "koopman/observables.hpp"
#include "koopman/plant.hpp"
#include "koopman/rng.hpp"
#include "koopman/signals.hpp"

namespace koopman::testkit {

inline RealMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Xoshiro256& rng) {
  RealMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

/// Random A with spectral radius `rho`.
inline RealMatrix stable_matrix(Eigen::Index n, double rho, Xoshiro256& rng) {
  const RealMatrix a = gaussian_matrix(n, n, rng);
  return a * (rho / numerics::spectral_radius(a));
}

/// x_{k+1} = A x_k + B u_k from x_0 with i.i.d. Gaussian inputs; `samples`
/// states and as many inputs (the last one unused).
inline Trajectory linear_trajectory(const RealMatrix& a, const RealMatrix& b,
                                    Eigen::Index samples, Xoshiro256& rng,
                                    const RealVector* x0 = nullptr) {
  Trajectory t;
  t.inputs = gaussian_matrix(b.cols(), samples, rng);
  t.states.resize(a.rows(), samples);
  t.states.col(0) = x0 ? *x0 : RealVector(gaussian_matrix(a.rows(), 1, rng));
  for (Eigen::Index k = 0; k + 1 < samples; ++k) {
    t.states.col(k + 1) = a * t.states.col(k) + b * t.inputs.col(k);
  }
  return t;
}

/// Snapshot set of a linear system on the identity lift.
inline LiftedSnapshotSet linear_snapshots(const RealMatrix& a, const RealMatrix& b,
                                          Eigen::Index pairs, Xoshiro256& rng) {
  return delay_lift(linear_trajectory(a, b, pairs + 1, rng), 0);
}

/// Settled surrogate driven by `seconds` of the given input signal.
inline Trajectory surrogate_run(double seconds, signals::SignalKind kind, std::uint64_t seed) {
  const plant::PlantConfig cfg;
  static const plant::PlantState settled = plant::settle(cfg);
  signals::SignalSpec spec;
  spec.kind = kind;
  spec.duration = seconds;
  spec.seed = seed;
  const RealMatrix u = signals::generate(spec);
  auto run = plant::simulate(settled, u.leftCols(u.cols() - 1), cfg).trajectory;
  run.inputs = u;
  return run;
}

}  // namespace koopman::testkit
