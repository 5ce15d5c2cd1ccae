#pragma once

#include <vector>

#include "koopman/numerics.hpp"
#include "koopman/observables.hpp"

namespace koopman {

/// z+ = A z + B u, x = C z.
struct LinearModel {
  RealMatrix a;
  RealMatrix b;
  RealMatrix c;

  Eigen::Index state_dim() const { return a.rows(); }
  Eigen::Index input_dim() const { return b.cols(); }
  Eigen::Index output_dim() const { return c.rows(); }
};

/// Open-loop rollout: returns x_k = C z_k for k = 0..inputs.cols().
RealMatrix rollout(const LinearModel& model, const RealVector& z0,
                   const RealMatrix& inputs);

/// Lifted model identified from snapshot data.
struct LiftedModel {
  LinearModel system;
  ObservableDictionary dictionary;
  double sample_dt = 0.02;
  Eigen::Index training_snapshots = 0;
};

/// Eigen-triplets of A and the averaged magnitude of each eigenfunction
/// phi_i(z) = <z, w_i> over the training snapshots.
struct KoopmanSpectrum {
  ComplexVector eigenvalues;
  ComplexMatrix modes;          // v_i
  ComplexMatrix adjoint_modes;  // w_i
  RealVector mode_powers;       // aligned with eigenvalues
  /// Eigen indices by descending mode power (ties: larger |lambda|, then index).
  std::vector<Eigen::Index> ranking;
  double condition = 1.0;

  Eigen::Index size() const { return eigenvalues.size(); }
};

namespace hdmd {

/// [A B] = X+_lift * pinv([X_lift; U]).
LiftedModel fit(const LiftedSnapshotSet& data, double rcond = numerics::kDefaultRcond);

/// ||X+ - A X - B U||_F.
double fit_residual(const LinearModel& model, const LiftedSnapshotSet& data);

/// Mean of |<z_k, w_i>| over the columns of `lifted`.
RealVector mode_powers(const ComplexMatrix& adjoint_modes, const RealMatrix& lifted);

/// Descending-power order with the documented tie breaks.
std::vector<Eigen::Index> rank_modes(const RealVector& powers,
                                     const ComplexVector& eigenvalues);

KoopmanSpectrum spectrum(const LiftedModel& model, const LiftedSnapshotSet& training,
                         const numerics::EigenOptions& options = {});

}  // namespace hdmd
}  // namespace koopman
