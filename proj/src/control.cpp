#include "koopman/control.hpp"

#include <algorithm>

#include "koopman/errors.hpp"

namespace koopman::control {

RealVector lift_reference(const RealVector& x_ref, const ObservableDictionary& dict,
                          const ReducedModel* reduced) {
  if (!x_ref.allFinite()) throw InvalidReference("reference pose is not finite");
  const RealMatrix history = x_ref.replicate(1, dict.history_length());
  RealVector z_ref = lift_point(history, dict);
  if (reduced != nullptr) {
    if (reduced->projector.cols() != z_ref.size()) {
      throw InvalidSpec("reduced model does not match the dictionary");
    }
    z_ref = reduced->projector * z_ref;
  }
  return z_ref;
}

RealMatrix diagonal(Eigen::Index n, double value) {
  return RealMatrix(RealVector::Constant(n, value).asDiagonal());
}

LQRDesign design(const LinearModel& model, const RealMatrix& q, const RealMatrix& r) {
  if (q.rows() != model.output_dim() || q.cols() != model.output_dim()) {
    throw InvalidSpec("Q must be square in the output dimension");
  }
  if (r.rows() != model.input_dim() || r.cols() != model.input_dim()) {
    throw InvalidSpec("R must be square in the input dimension");
  }
  LQRDesign out;
  out.q = q;
  out.r = r;
  RealMatrix q_z = model.c.transpose() * q * model.c;
  q_z = 0.5 * (q_z + q_z.transpose());
  const auto sol = numerics::solve_dare(model.a, model.b, q_z, r);
  out.gain = sol.k;
  out.riccati = sol.p;
  out.dare_iterations = sol.iterations;
  out.closed_loop_radius = numerics::spectral_radius(model.a - model.b * sol.k);
  return out;
}

OpenLoopPlan plan_open_loop(const LQRDesign& design, const LinearModel& model,
                            const RealVector& z0, const RealVector& z_ref,
                            Eigen::Index steps, const PlanOptions& options) {
  if (z0.size() != model.state_dim() || z_ref.size() != model.state_dim()) {
    throw InvalidSpec("plan state vectors do not match the model");
  }
  if (options.feedforward && options.feedforward->size() != model.input_dim()) {
    throw InvalidSpec("feedforward input has the wrong dimension");
  }
  const InputBounds& bounds = options.bounds;
  OpenLoopPlan out;
  out.inputs.resize(model.input_dim(), steps);
  out.predicted.resize(model.output_dim(), steps);
  RealVector z = z0;
  Eigen::Index saturated = 0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    RealVector u = -design.gain * (z - z_ref);
    if (options.feedforward) u += *options.feedforward;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double clamped = std::clamp(u(i), bounds.lower, bounds.upper);
      if (clamped != u(i)) ++saturated;
      u(i) = clamped;
    }
    z = model.a * z + model.b * u;
    out.inputs.col(k) = u;
    out.predicted.col(k) = model.c * z;
  }
  const auto total = static_cast<double>(steps * model.input_dim());
  out.saturation_fraction = total > 0 ? static_cast<double>(saturated) / total : 0.0;
  return out;
}

double model_cost(const LinearModel& model, const RealVector& z0,
                  const RealMatrix& inputs, const RealVector& x_ref,
                  const RealMatrix& q, const RealMatrix& r) {
  RealVector z = z0;
  double cost = 0.0;
  for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
    z = model.a * z + model.b * inputs.col(k);
    const RealVector e = model.c * z - x_ref;
    cost += e.dot(q * e) + inputs.col(k).dot(r * inputs.col(k));
  }
  return cost;
}

plant::SimulationResult deploy(const plant::PlantConfig& cfg, const plant::PlantState& state,
                               const RealMatrix& inputs) {
  if (inputs.size() > 0 &&
      (inputs.minCoeff() < 0.0 || inputs.maxCoeff() > 1.0 || !inputs.allFinite())) {
    throw InvalidSpec("deployed inputs must lie in [0, 1]");
  }
  return plant::simulate(state, inputs, cfg);
}

RealVector nearest_input(const Trajectory& training, const RealVector& x_ref) {
  const Eigen::Index n = std::min(training.samples(), training.inputs.cols());
  if (n == 0) throw InsufficientData("no training inputs to draw a feedforward from");
  Eigen::Index best = 0;
  (training.states.leftCols(n).colwise() - x_ref).colwise().squaredNorm().minCoeff(&best);
  return training.inputs.col(best);
}

}  // namespace koopman::control
