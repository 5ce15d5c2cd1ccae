#include <gtest/gtest.h>

#include <cmath>

#include "koopman/errors.hpp"
#include "koopman/plant.hpp"

using namespace koopman;
using namespace koopman::plant;

namespace {

const PlantState& equilibrium() {
  static const PlantState s = settle(PlantConfig{});
  return s;
}

RealMatrix hold(const Eigen::Vector3d& u, Eigen::Index steps) { return u.replicate(1, steps); }

constexpr double kGoldenDeflection = 0.11429354981452433;  // m

}  // namespace

TEST(Plant, RestLineGeometry) {
  const PlantConfig cfg;
  const RealVector x = observe(rest_line(cfg));
  ASSERT_EQ(x.size(), 45);
  for (int j = 0; j < 15; ++j) {
    EXPECT_EQ(x(3 * j), 0.0);
    EXPECT_EQ(x(3 * j + 1), 0.0);
    EXPECT_NEAR(x(3 * j + 2), -0.05 * (j + 1), 1e-15);
  }
}

TEST(Plant, RestLineFeelsOnlyGravity) {
  const PlantConfig cfg;
  const auto f = force_model(rest_line(cfg), Eigen::Vector3d::Zero(), cfg);
  for (int j = 1; j <= cfg.node_count; ++j) {
    EXPECT_NEAR(f(0, j - 1), 0.0, 1e-12);
    EXPECT_NEAR(f(1, j - 1), 0.0, 1e-12);
    EXPECT_NEAR(f(2, j - 1), -cfg.mass(j) * cfg.gravity, 1e-12);
  }
}

TEST(Plant, StretchedSegmentTension) {
  PlantConfig cfg;
  cfg.node_count = 2;
  cfg.gravity = 0.0;
  PlantState s = rest_line(cfg);
  s.positions.col(0) << 0, 0, -0.06;  // e = 0.01 on segment 0-1
  s.positions.col(1) << 0, 0, -0.11;  // segment 1-2 at rest length
  const auto f = force_model(s, Eigen::Vector3d::Zero(), cfg);
  EXPECT_NEAR(f(2, 0), 0.5 + 0.005, 1e-12);
  EXPECT_NEAR(f(0, 0), 0.0, 1e-15);
}

TEST(Plant, EqualMusclesCancelSideways) {
  const PlantConfig cfg;
  PlantState s = rest_line(cfg);
  s.positions(0, 3) += 0.01;  // arbitrary bent state
  s.positions(1, 9) -= 0.02;
  const auto base = force_model(s, Eigen::Vector3d::Zero(), cfg);
  const auto pushed = force_model(s, Eigen::Vector3d::Constant(0.7), cfg);
  const Eigen::Matrix3Xd muscle = pushed - base;
  for (int j = 0; j < cfg.node_count; ++j) {
    EXPECT_NEAR(muscle(0, j), 0.0, 1e-15);
    EXPECT_NEAR(muscle(1, j), 0.0, 1e-15);
    EXPECT_GT(std::abs(muscle(2, j)), 0.0);
  }
}

TEST(Plant, MuscleDirectionsAreUnitAndPhased) {
  const PlantConfig cfg;
  for (int j = 1; j <= cfg.node_count; ++j) {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (int m = 1; m <= 3; ++m) {
      const auto d = muscle_direction(m, j, cfg);
      EXPECT_NEAR(d.norm(), 1.0, 1e-15);
      sum += d;
    }
    EXPECT_NEAR(sum.head<2>().norm(), 0.0, 1e-14);
  }
}

TEST(Plant, EquilibriumStaysPut) {
  const PlantConfig cfg;
  const auto next = step(equilibrium(), Eigen::Vector3d::Zero(), cfg);
  EXPECT_LT((observe(next) - observe(equilibrium())).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Plant, SymmetricInputsStayOnAxis) {
  const PlantConfig cfg;
  const auto run = simulate(equilibrium(), hold(Eigen::Vector3d::Constant(0.6), 500), cfg);
  const RealMatrix& x = run.trajectory.states;
  double off_axis = 0.0;
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    for (int j = 0; j < cfg.node_count; ++j) {
      off_axis = std::max({off_axis, std::abs(x(3 * j, k)), std::abs(x(3 * j + 1, k))});
    }
  }
  EXPECT_LT(off_axis, 1e-9);
  // The chain does move along the axis.
  EXPECT_GT((x.col(x.cols() - 1) - x.col(0)).norm(), 1e-4);
}

TEST(Plant, SingleMuscleGoldenDeflection) {
  // Frozen from one run of this implementation with the default config:
  // 2 s of u = (1, 0, 0) from the settled state.
  const PlantConfig cfg;
  const auto run = simulate(equilibrium(), hold(Eigen::Vector3d(1, 0, 0), 100), cfg);
  const RealVector tip = run.trajectory.states.col(100).tail<3>();
  const double deflection = tip.head<2>().norm();
  EXPECT_GT(deflection, 1e-3);
  EXPECT_NEAR(deflection, kGoldenDeflection, 1e-9);
}

TEST(Plant, EmptyInputGivesSingleSample) {
  const PlantConfig cfg;
  const auto run = simulate(equilibrium(), RealMatrix(3, 0), cfg);
  ASSERT_EQ(run.trajectory.samples(), 1);
  EXPECT_EQ(run.trajectory.states.col(0), observe(equilibrium()));
}

TEST(Plant, ZeroInputEnergyNeverIncreases) {
  const PlantConfig cfg;
  PlantState s = rest_line(cfg);
  double previous = energy(s, cfg);
  int increases = 0;
  for (int k = 0; k < 1500; ++k) {  // 30 s
    s = step(s, Eigen::Vector3d::Zero(), cfg);
    const double e = energy(s, cfg);
    if (e > previous + 1e-9) ++increases;
    previous = e;
  }
  EXPECT_EQ(increases, 0);
}

TEST(Plant, BitExactDeterminism) {
  const PlantConfig cfg;
  RealMatrix u(3, 200);
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    u.col(k) << 0.3 + 0.5 * std::sin(0.05 * k), 0.5, 0.85 - 0.2 * std::cos(0.03 * k);
  }
  const auto a = simulate(equilibrium(), u, cfg);
  const auto b = simulate(equilibrium(), u, cfg);
  EXPECT_TRUE(a.trajectory.states == b.trajectory.states);
}

TEST(Plant, ObservationNoiseIsSeeded) {
  PlantConfig cfg;
  cfg.observation_noise = 1e-4;
  cfg.noise_seed = 5;
  const RealMatrix u = hold(Eigen::Vector3d::Constant(0.5), 20);
  const auto a = simulate(equilibrium(), u, cfg);
  const auto b = simulate(equilibrium(), u, cfg);
  EXPECT_TRUE(a.trajectory.states == b.trajectory.states);
  cfg.noise_seed = 6;
  const auto c = simulate(equilibrium(), u, cfg);
  EXPECT_FALSE(a.trajectory.states == c.trajectory.states);
}

TEST(Plant, ObserveDistinguishesStates) {
  const PlantConfig cfg;
  PlantState a = rest_line(cfg);
  PlantState b = a;
  b.positions(1, 7) += 1e-12;
  EXPECT_NE(observe(a), observe(b));
}

TEST(Plant, InvalidConfigurationsAreRejected) {
  PlantConfig cfg;
  cfg.integrator_dt = 0.003;  // 0.02 is not a multiple
  EXPECT_THROW(validate(cfg), InvalidSpec);
  cfg = PlantConfig{};
  cfg.node_mass = -1.0;
  EXPECT_THROW(validate(cfg), InvalidSpec);
  cfg = PlantConfig{};
  EXPECT_THROW(simulate(rest_line(cfg), RealMatrix::Zero(2, 4), cfg), InvalidSpec);
}

TEST(Plant, DivergenceIsReported) {
  PlantConfig cfg;
  cfg.integrator_dt = 0.02;  // far above the stability limit of the stiff chain
  EXPECT_THROW(simulate(rest_line(cfg), hold(Eigen::Vector3d(1, 0, 0), 2000), cfg),
               SimulationDiverged);
}

TEST(Trajectory, SliceKeepsInputsAligned) {
  Trajectory t;
  t.states = RealMatrix::Random(45, 10);
  t.inputs = RealMatrix::Random(3, 10);
  const auto s = t.slice(4, 3);
  EXPECT_EQ(s.states, t.states.middleCols(4, 3));
  EXPECT_EQ(s.inputs, t.inputs.middleCols(4, 3));
  EXPECT_THROW(t.slice(8, 3), InsufficientData);
}
