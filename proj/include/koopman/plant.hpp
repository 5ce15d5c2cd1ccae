#pragma once

#include <cstdint>

#include "koopman/numerics.hpp"

namespace koopman {

/// Time-indexed state snapshots with the inputs applied between them.
///
/// Column k of `states` is x_k; column k of `inputs` is the input held over
/// the interval k -> k+1. `inputs` has either as many columns as `states`
/// (the last one is recorded but never applied) or one fewer.
struct Trajectory {
  double sample_dt = 0.02;
  RealMatrix states;  // state_dim x samples
  RealMatrix inputs;  // input_dim x (samples or samples - 1)

  Eigen::Index samples() const { return states.cols(); }
  Eigen::Index transitions() const {
    return std::max<Eigen::Index>(0, std::min(inputs.cols(), states.cols() - 1));
  }
  Eigen::Index state_dim() const { return states.rows(); }
  Eigen::Index input_dim() const { return inputs.rows(); }

  /// Samples [first, first + count), inputs sliced to match.
  Trajectory slice(Eigen::Index first, Eigen::Index count) const;
};

namespace plant {

inline constexpr int kInputDim = 3;

struct PlantConfig {
  int node_count = 15;
  double segment_rest_length = 0.05;  // m
  double axial_stiffness = 50.0;      // N/m
  double cubic_stiffness = 5000.0;    // N/m^3
  double bending_stiffness = 10.0;    // N/m
  double damping = 0.01;              // N s/m
  double node_mass = 0.0008;          // kg
  double tip_extra_mass = 0.040;      // kg
  double muscle_gain = 0.02;          // N
  double helical_pitch = 0.3;         // rad/node
  double axial_component = 0.5;
  double gravity = 9.81;              // m/s^2, along -z
  double integrator_dt = 0.002;       // s
  double sample_dt = 0.02;            // s
  /// Standard deviation of additive Gaussian noise on observations (m).
  double observation_noise = 0.0;
  std::uint64_t noise_seed = 0;

  int state_dim() const { return 3 * node_count; }
  int substeps() const;
  double mass(int node) const;  // node in 1..node_count
};

/// Throws InvalidSpec if the configuration breaks its invariants.
void validate(const PlantConfig& cfg);

/// Node 0 is clamped at the origin and not stored.
struct PlantState {
  Eigen::Matrix3Xd positions;   // column j-1 holds node j
  Eigen::Matrix3Xd velocities;
};

/// Straight chain hanging along -z at rest length, zero velocity.
PlantState rest_line(const PlantConfig& cfg);

/// Net force on each node (3 x node_count).
Eigen::Matrix3Xd force_model(const PlantState& state, const Eigen::Vector3d& u,
                             const PlantConfig& cfg);

/// Unit direction of muscle `muscle` (1..3) acting on node `node`.
Eigen::Vector3d muscle_direction(int muscle, int node, const PlantConfig& cfg);

/// Advances one sample period with `u` held constant (semi-implicit Euler).
PlantState step(const PlantState& state, const Eigen::Vector3d& u,
                const PlantConfig& cfg);

/// Tracker positions [p_1; ...; p_N] (noise free).
RealVector observe(const PlantState& state);

/// Kinetic + spring + gravitational energy (muscles excluded).
double energy(const PlantState& state, const PlantConfig& cfg);

struct SimulationResult {
  Trajectory trajectory;
  PlantState final_state;
};

/// Runs `inputs` (3 x steps) from `x0`. The trajectory holds steps + 1
/// observations and the given inputs.
SimulationResult simulate(const PlantState& x0, const RealMatrix& inputs,
                          const PlantConfig& cfg);

/// Gravity-settled state: zero input from the rest line for `seconds`.
PlantState settle(const PlantConfig& cfg, double seconds = 60.0);

}  // namespace plant
}  // namespace koopman
