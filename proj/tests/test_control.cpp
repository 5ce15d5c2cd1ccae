#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "koopman/control.hpp"
#include "koopman/errors.hpp"
#include "support.hpp"

using namespace koopman;
using namespace koopman::control;
using testkit::gaussian_matrix;
using testkit::stable_matrix;

namespace {

LinearModel scalar_model(double a, double b) {
  return {RealMatrix::Constant(1, 1, a), RealMatrix::Constant(1, 1, b), RealMatrix::Identity(1, 1)};
}

// Positive root of b^2 p^2 + (r - a^2 r - q b^2) p - q r = 0.
double scalar_gain(double a, double b, double q, double r) {
  const double c1 = r - a * a * r - q * b * b;
  const double p = (-c1 + std::sqrt(c1 * c1 + 4 * b * b * q * r)) / (2 * b * b);
  return b * p * a / (r + b * b * p);
}

const PlanOptions kUnbounded{{-1e12, 1e12}, std::nullopt};

}  // namespace

TEST(Design, ScalarGainMatchesClosedForm) {
  for (auto [a, b, q, r] : {std::array{1.0, 1.0, 1.0, 10.0}, std::array{0.9, 0.5, 1.0, 10.0},
                            std::array{1.2, 1.0, 2.0, 0.5}}) {
    const auto d = design(scalar_model(a, b), RealMatrix::Constant(1, 1, q),
                          RealMatrix::Constant(1, 1, r));
    EXPECT_NEAR(d.gain(0, 0), scalar_gain(a, b, q, r), 1e-9);
    EXPECT_LT(d.closed_loop_radius, 1.0);
  }
}

TEST(Design, HalfDecayScalarCase) {
  const auto d = design(scalar_model(0.5, 1.0), RealMatrix::Identity(1, 1), RealMatrix::Identity(1, 1));
  EXPECT_NEAR(d.riccati(0, 0), 1.13278, 1e-5);
  EXPECT_NEAR(d.gain(0, 0), 0.26557, 1e-5);
}

TEST(Design, ZeroPenaltyOnStablePlantGivesZeroGain) {
  Xoshiro256 rng(51);
  const LinearModel m{stable_matrix(4, 0.8, rng), gaussian_matrix(4, 2, rng),
                      RealMatrix::Identity(4, 4)};
  const auto d = design(m, RealMatrix::Zero(4, 4), diagonal(2, 10.0));
  EXPECT_LT(d.gain.norm(), 1e-12);
}

TEST(Design, PenaltyActsOnOutputs) {
  Xoshiro256 rng(52);
  LinearModel m{stable_matrix(6, 0.98, rng), gaussian_matrix(6, 2, rng), gaussian_matrix(3, 6, rng)};
  const auto d = design(m, diagonal(3, 1.0), diagonal(2, 10.0));
  const RealMatrix q_z = m.c.transpose() * m.c;
  EXPECT_LT(numerics::dare_residual(m.a, m.b, q_z, d.r, d.riccati), 1e-9);
  EXPECT_THROW(design(m, diagonal(6, 1.0), diagonal(2, 1.0)), InvalidSpec);
  EXPECT_THROW(design(m, diagonal(3, 1.0), diagonal(3, 1.0)), InvalidSpec);
}

TEST(Plan, AtReferenceWithZeroInsideBoundsStaysPut) {
  Xoshiro256 rng(53);
  const LinearModel m{stable_matrix(4, 0.9, rng), gaussian_matrix(4, 2, rng),
                      RealMatrix::Identity(4, 4)};
  const auto d = design(m, diagonal(4, 1.0), diagonal(2, 10.0));
  const RealVector z0 = RealVector::Zero(4);
  const auto plan = plan_open_loop(d, m, z0, z0, 50, {{-1.0, 1.0}, std::nullopt});
  EXPECT_EQ(plan.inputs, RealMatrix::Zero(2, 50));
  EXPECT_EQ(plan.predicted, RealMatrix::Zero(4, 50));
  EXPECT_EQ(plan.saturation_fraction, 0.0);
}

TEST(Plan, UnclampedPlanMinimizesCost) {
  Xoshiro256 rng(54);
  const LinearModel m{stable_matrix(5, 1.05, rng), gaussian_matrix(5, 2, rng),
                      RealMatrix::Identity(5, 5)};
  const RealMatrix q = diagonal(5, 1.0), r = diagonal(2, 10.0);
  const auto d = design(m, q, r);
  const RealVector z0 = gaussian_matrix(5, 1, rng);
  const RealVector zero = RealVector::Zero(5);
  const auto plan = plan_open_loop(d, m, z0, zero, 400, kUnbounded);
  const double best = model_cost(m, z0, plan.inputs, zero, q, r);
  for (int trial = 0; trial < 30; ++trial) {
    const RealMatrix probe = plan.inputs + 1e-3 * gaussian_matrix(2, 400, rng);
    EXPECT_GE(model_cost(m, z0, probe, zero, q, r), best - 1e-12);
  }
}

TEST(Plan, InputsRespectBounds) {
  Xoshiro256 rng(55);
  const LinearModel m{stable_matrix(6, 0.99, rng), gaussian_matrix(6, 3, rng),
                      RealMatrix::Identity(6, 6)};
  const auto d = design(m, diagonal(6, 100.0), diagonal(3, 0.1));
  const RealVector z0 = 10.0 * RealVector(gaussian_matrix(6, 1, rng));
  PlanOptions opts;
  opts.feedforward = RealVector::Constant(3, 0.5);
  const auto plan = plan_open_loop(d, m, z0, RealVector::Zero(6), 300, opts);
  EXPECT_GE(plan.inputs.minCoeff(), 0.3);
  EXPECT_LE(plan.inputs.maxCoeff(), 0.85);
  EXPECT_GT(plan.saturation_fraction, 0.0);
  EXPECT_LE(plan.saturation_fraction, 1.0);
  // Deterministic.
  const auto again = plan_open_loop(d, m, z0, RealVector::Zero(6), 300, opts);
  EXPECT_TRUE(plan.inputs == again.inputs);
}

TEST(Plan, PredictedMatchesRollout) {
  Xoshiro256 rng(56);
  const LinearModel m{stable_matrix(4, 0.9, rng), gaussian_matrix(4, 2, rng), gaussian_matrix(2, 4, rng)};
  const auto d = design(m, diagonal(2, 1.0), diagonal(2, 1.0));
  const RealVector z0 = gaussian_matrix(4, 1, rng);
  const auto plan = plan_open_loop(d, m, z0, RealVector::Zero(4), 40, kUnbounded);
  const RealMatrix x = rollout(m, z0, plan.inputs);
  EXPECT_LT((x.rightCols(40) - plan.predicted).norm(), 1e-12);
}

TEST(Reference, LiftOfConstantPose) {
  const RealVector x = RealVector::LinSpaced(3, 0.1, 0.3);
  const ObservableDictionary d0{ObservableKind::delay, 0, 3};
  EXPECT_EQ(lift_reference(x, d0), x);
  const ObservableDictionary d2{ObservableKind::delay, 2, 3};
  const RealVector z = lift_reference(x, d2);
  EXPECT_EQ(projection_matrix(d2) * z, x);
  EXPECT_EQ(z, x.replicate(3, 1));
  RealVector bad = x;
  bad(1) = std::nan("");
  EXPECT_THROW(lift_reference(bad, d2), InvalidReference);
}

TEST(Deploy, ZeroLengthAndValidation) {
  const plant::PlantConfig cfg;
  const auto rest = plant::rest_line(cfg);
  const auto run = deploy(cfg, rest, RealMatrix(3, 0));
  EXPECT_EQ(run.trajectory.samples(), 1);
  EXPECT_THROW(deploy(cfg, rest, RealMatrix::Constant(3, 2, 1.2)), InvalidSpec);
  EXPECT_THROW(deploy(cfg, rest, RealMatrix::Constant(3, 2, -0.1)), InvalidSpec);
}

TEST(Feedforward, NearestTrainingInput) {
  Trajectory t;
  t.states.resize(2, 3);
  t.states << 0, 1, 2, 0, 1, 2;
  t.inputs.resize(3, 3);
  t.inputs << 0.3, 0.4, 0.5, 0.3, 0.4, 0.5, 0.3, 0.4, 0.5;
  EXPECT_EQ(nearest_input(t, RealVector::Constant(2, 1.1)), RealVector::Constant(3, 0.4));
  EXPECT_EQ(nearest_input(t, RealVector::Constant(2, 9.0)), RealVector::Constant(3, 0.5));
  t.inputs.resize(3, 0);
  EXPECT_THROW(nearest_input(t, RealVector::Zero(2)), InsufficientData);
}
