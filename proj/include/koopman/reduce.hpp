#pragma once

#include <string>
#include <vector>

#include "koopman/hdmd.hpp"

namespace koopman {

/// Lifted model projected onto the span of selected Koopman modes, written in
/// a real basis: each conjugate pair a +/- bi becomes the block [[a, b], [-b, a]].
///
/// The projection is biorthogonal: A~ = W_sel^H A V_sel, B~ = W_sel^H B,
/// C~ = C V_sel (before realification). With all modes kept W^H = V^-1.
struct ReducedModel {
  LinearModel system;
  /// Eigen indices of the kept modes; conjugate pairs adjacent, +imag first.
  std::vector<Eigen::Index> kept_indices;
  ComplexVector eigenvalues;  // lambda of each kept mode
  ComplexMatrix basis;        // V_sel, m x n
  /// Real coordinates z~ = projector * z, and z ~= lift_basis * z~.
  RealMatrix projector;
  RealMatrix lift_basis;
  /// Largest |Im| seen in the complex reduced matrices before discarding.
  double max_imaginary = 0.0;
  double basis_condition = 1.0;
  /// Fraction of total mode power covered by the kept modes.
  double power_fraction = 0.0;
  std::string parent_fingerprint;

  Eigen::Index dimension() const { return system.a.rows(); }
};

namespace reduce {

inline constexpr double kMaxBasisCondition = 1e12;
inline constexpr double kImaginaryTolerance = 1e-10;

/// Index of the conjugate partner of eigen index i (i itself for real modes).
Eigen::Index conjugate_partner(const KoopmanSpectrum& spec, Eigen::Index i);

/// The n highest-power modes, closed under conjugation (a kept complex mode
/// pulls in its partner, so the result may hold n + 1 entries per split pair).
std::vector<Eigen::Index> select_modes(const KoopmanSpectrum& spec, Eigen::Index n);

/// Smallest selection whose cumulative power reaches `fraction` of the total.
std::vector<Eigen::Index> select_by_power(const KoopmanSpectrum& spec, double fraction);

double power_fraction(const KoopmanSpectrum& spec,
                      const std::vector<Eigen::Index>& indices);

ReducedModel project(const LiftedModel& model, const KoopmanSpectrum& spec,
                     const std::vector<Eigen::Index>& indices);

/// z~_{k+1} = A~ z~_k + B~ u_k, x^_k = C~ z~_k for k = 0..inputs.cols().
RealMatrix reduced_rollout(const ReducedModel& rm, const RealVector& z0,
                           const RealMatrix& inputs);

}  // namespace reduce
}  // namespace koopman
