#include "koopman/plant.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "koopman/errors.hpp"
#include "koopman/rng.hpp"

namespace koopman {

Trajectory Trajectory::slice(Eigen::Index first, Eigen::Index count) const {
  if (first < 0 || count < 0 || first + count > samples()) {
    throw InsufficientData("trajectory slice out of range");
  }
  Trajectory out;
  out.sample_dt = sample_dt;
  out.states = states.middleCols(first, count);
  const Eigen::Index input_count =
      std::max<Eigen::Index>(0, std::min(count, inputs.cols() - first));
  out.inputs = inputs.middleCols(first, input_count);
  return out;
}

namespace plant {

int PlantConfig::substeps() const {
  return static_cast<int>(std::lround(sample_dt / integrator_dt));
}

double PlantConfig::mass(int node) const {
  return node == node_count ? node_mass + tip_extra_mass : node_mass;
}

void validate(const PlantConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidSpec(std::string("plant config: ") + what);
  };
  require(cfg.node_count >= 2, "node_count must be at least 2");
  require(cfg.segment_rest_length > 0, "segment_rest_length must be positive");
  require(cfg.axial_stiffness > 0 && cfg.cubic_stiffness > 0 &&
              cfg.bending_stiffness > 0,
          "stiffnesses must be positive");
  require(cfg.damping > 0, "damping must be positive");
  require(cfg.node_mass > 0 && cfg.tip_extra_mass > 0, "masses must be positive");
  require(cfg.integrator_dt > 0 && cfg.sample_dt > 0, "time steps must be positive");
  const double ratio = cfg.sample_dt / cfg.integrator_dt;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 * ratio && ratio >= 1.0,
          "sample_dt must be an integer multiple of integrator_dt");
  require(cfg.observation_noise >= 0, "observation_noise must be non-negative");
}

PlantState rest_line(const PlantConfig& cfg) {
  PlantState s;
  s.positions = Eigen::Matrix3Xd::Zero(3, cfg.node_count);
  s.velocities = Eigen::Matrix3Xd::Zero(3, cfg.node_count);
  for (int j = 0; j < cfg.node_count; ++j) {
    s.positions(2, j) = -cfg.segment_rest_length * (j + 1);
  }
  return s;
}

Eigen::Vector3d muscle_direction(int muscle, int node, const PlantConfig& cfg) {
  const double phase = 2.0 * std::numbers::pi * muscle / 3.0 + cfg.helical_pitch * node;
  return Eigen::Vector3d(std::cos(phase), std::sin(phase), cfg.axial_component)
      .normalized();
}

namespace {

// Position of node j (0..N), node 0 being the clamped base.
Eigen::Vector3d node_position(const PlantState& s, int j) {
  return j == 0 ? Eigen::Vector3d::Zero() : Eigen::Vector3d(s.positions.col(j - 1));
}

void add_spring(Eigen::Matrix3Xd& forces, const PlantState& s, int a, int b,
                double rest, double k_lin, double k_cubic) {
  const Eigen::Vector3d d = node_position(s, b) - node_position(s, a);
  const double len = d.norm();
  const double e = len - rest;
  if (e == 0.0) return;
  const Eigen::Vector3d f = (k_lin * e + k_cubic * e * e * e) * d / len;
  if (a > 0) forces.col(a - 1) += f;
  forces.col(b - 1) -= f;
}

double spring_energy(const PlantState& s, int a, int b, double rest, double k_lin,
                     double k_cubic) {
  const double e = (node_position(s, b) - node_position(s, a)).norm() - rest;
  return 0.5 * k_lin * e * e + 0.25 * k_cubic * e * e * e * e;
}

}  // namespace

Eigen::Matrix3Xd force_model(const PlantState& state, const Eigen::Vector3d& u,
                             const PlantConfig& cfg) {
  const int n = cfg.node_count;
  const double l0 = cfg.segment_rest_length;
  Eigen::Matrix3Xd forces = Eigen::Matrix3Xd::Zero(3, n);

  for (int j = 0; j < n; ++j) {
    add_spring(forces, state, j, j + 1, l0, cfg.axial_stiffness, cfg.cubic_stiffness);
  }
  for (int j = 0; j + 2 <= n; ++j) {
    add_spring(forces, state, j, j + 2, 2.0 * l0, cfg.bending_stiffness, 0.0);
  }
  for (int j = 1; j <= n; ++j) {
    auto f = forces.col(j - 1);
    f -= cfg.damping * state.velocities.col(j - 1);
    f.z() -= cfg.mass(j) * cfg.gravity;
    for (int i = 1; i <= kInputDim; ++i) {
      if (u(i - 1) != 0.0) {
        f += u(i - 1) * cfg.muscle_gain * muscle_direction(i, j, cfg);
      }
    }
  }
  return forces;
}

PlantState step(const PlantState& state, const Eigen::Vector3d& u,
                const PlantConfig& cfg) {
  PlantState s = state;
  const int n = cfg.node_count;
  const double dt = cfg.integrator_dt;
  for (int sub = 0; sub < cfg.substeps(); ++sub) {
    const Eigen::Matrix3Xd f = force_model(s, u, cfg);
    for (int j = 1; j <= n; ++j) {
      s.velocities.col(j - 1) += (dt / cfg.mass(j)) * f.col(j - 1);
    }
    s.positions += dt * s.velocities;
  }
  return s;
}

RealVector observe(const PlantState& state) {
  return Eigen::Map<const RealVector>(state.positions.data(), state.positions.size());
}

double energy(const PlantState& state, const PlantConfig& cfg) {
  const int n = cfg.node_count;
  const double l0 = cfg.segment_rest_length;
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    const double m = cfg.mass(j);
    total += 0.5 * m * state.velocities.col(j - 1).squaredNorm();
    total += m * cfg.gravity * state.positions(2, j - 1);
  }
  for (int j = 0; j < n; ++j) {
    total += spring_energy(state, j, j + 1, l0, cfg.axial_stiffness, cfg.cubic_stiffness);
  }
  for (int j = 0; j + 2 <= n; ++j) {
    total += spring_energy(state, j, j + 2, 2.0 * l0, cfg.bending_stiffness, 0.0);
  }
  return total;
}

SimulationResult simulate(const PlantState& x0, const RealMatrix& inputs,
                          const PlantConfig& cfg) {
  validate(cfg);
  if (inputs.size() > 0 && inputs.rows() != kInputDim) {
    throw InvalidSpec("plant inputs must have 3 channels");
  }
  if (!inputs.allFinite()) {
    throw InvalidSpec("plant inputs must be finite");
  }
  const Eigen::Index steps = inputs.cols();
  SimulationResult out;
  out.trajectory.sample_dt = cfg.sample_dt;
  out.trajectory.states.resize(cfg.state_dim(), steps + 1);
  out.trajectory.inputs = inputs.size() > 0 ? inputs : RealMatrix(kInputDim, 0);
  out.trajectory.states.col(0) = observe(x0);

  PlantState s = x0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    s = step(s, inputs.col(k), cfg);
    if (!s.positions.allFinite() || !s.velocities.allFinite()) {
      throw SimulationDiverged("non-finite plant state at step " + std::to_string(k));
    }
    out.trajectory.states.col(k + 1) = observe(s);
  }
  out.final_state = s;

  if (cfg.observation_noise > 0.0) {
    Xoshiro256 rng(cfg.noise_seed);
    for (Eigen::Index k = 0; k < out.trajectory.states.cols(); ++k) {
      for (Eigen::Index i = 0; i < out.trajectory.states.rows(); ++i) {
        out.trajectory.states(i, k) += cfg.observation_noise * rng.normal();
      }
    }
  }
  return out;
}

PlantState settle(const PlantConfig& cfg, double seconds) {
  validate(cfg);
  PlantState s = rest_line(cfg);
  const auto samples = static_cast<long>(std::lround(seconds / cfg.sample_dt));
  const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  for (long k = 0; k < samples; ++k) {
    s = step(s, zero, cfg);
  }
  return s;
}

}  // namespace plant
}  // namespace koopman
