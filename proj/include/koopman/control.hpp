#pragma once

#include <optional>

#include "koopman/hdmd.hpp"
#include "koopman/plant.hpp"
#include "koopman/reduce.hpp"

namespace koopman::control {

struct InputBounds {
  double lower = 0.3;
  double upper = 0.85;
};

/// Infinite-horizon LQR on a lifted (or reduced) model with the state penalty
/// Q acting on x = C z.
struct LQRDesign {
  RealMatrix q;  // output penalty, diagonal
  RealMatrix r;  // input penalty, diagonal
  RealMatrix gain;
  RealMatrix riccati;
  double closed_loop_radius = 0.0;
  int dare_iterations = 0;
};

/// Steady-pose lift of a target state: z_ref = f([x_ref, ..., x_ref]),
/// projected onto the reduced coordinates when `reduced` is given.
RealVector lift_reference(const RealVector& x_ref, const ObservableDictionary& dict,
                          const ReducedModel* reduced = nullptr);

/// K from the DARE with Q_z = C' Q C. Throws NoStabilizingSolution.
LQRDesign design(const LinearModel& model, const RealMatrix& q, const RealMatrix& r);

/// Diagonal penalty helpers.
RealMatrix diagonal(Eigen::Index n, double value);

struct OpenLoopPlan {
  RealMatrix inputs;     // p x steps, every entry within bounds
  RealMatrix predicted;  // x^_k = C z_{k+1}, output_dim x steps
  double saturation_fraction = 0.0;
};

struct PlanOptions {
  InputBounds bounds;
  /// Added to -K (z - z_ref) before clamping; absent means the pure law.
  std::optional<RealVector> feedforward;
};

/// u_k = clamp(u_ff - K (z_k - z_ref)), z_{k+1} = A z_k + B u_k, evaluated on
/// the model only. The returned inputs are replayed on the plant unchanged.
OpenLoopPlan plan_open_loop(const LQRDesign& design, const LinearModel& model,
                            const RealVector& z0, const RealVector& z_ref,
                            Eigen::Index steps, const PlanOptions& options = {});

/// Quadratic cost sum_k (x_k - x_ref)' Q (x_k - x_ref) + u_k' R u_k of an input
/// sequence rolled out on the model from z0, with x_k = C z_{k+1}.
double model_cost(const LinearModel& model, const RealVector& z0,
                  const RealMatrix& inputs, const RealVector& x_ref,
                  const RealMatrix& q, const RealMatrix& r);

/// Replays `inputs` on the plant from `state` without feedback.
plant::SimulationResult deploy(const plant::PlantConfig& cfg, const plant::PlantState& state,
                               const RealMatrix& inputs);

/// Training input at the snapshot whose state is nearest to x_ref.
RealVector nearest_input(const Trajectory& training, const RealVector& x_ref);

}  // namespace koopman::control
