#include "koopman/reduce.hpp"

#include <algorithm>
#include <set>

#include "koopman/errors.hpp"

namespace koopman::reduce {

namespace {

using Complex = std::complex<double>;

bool is_complex_mode(const KoopmanSpectrum& spec, Eigen::Index i) {
  return spec.eigenvalues(i).imag() != 0.0;
}

// Arranges a conjugate-closed index set so that every pair is adjacent with
// the positive-imaginary member first, preserving the order of first mention.
std::vector<Eigen::Index> pair_order(const KoopmanSpectrum& spec,
                                     const std::vector<Eigen::Index>& indices) {
  std::set<Eigen::Index> wanted(indices.begin(), indices.end());
  if (wanted.size() != indices.size()) {
    throw InvalidSpec("mode indices contain duplicates");
  }
  std::set<Eigen::Index> placed;
  std::vector<Eigen::Index> out;
  out.reserve(indices.size());
  for (Eigen::Index i : indices) {
    if (i < 0 || i >= spec.size()) {
      throw InvalidSpec("mode index " + std::to_string(i) + " out of range");
    }
    if (placed.count(i)) continue;
    if (!is_complex_mode(spec, i)) {
      out.push_back(i);
      placed.insert(i);
      continue;
    }
    const Eigen::Index partner = conjugate_partner(spec, i);
    if (!wanted.count(partner)) {
      throw InvalidSpec("mode indices are not closed under conjugation (index " +
                        std::to_string(i) + ")");
    }
    const Eigen::Index first = spec.eigenvalues(i).imag() > 0.0 ? i : partner;
    const Eigen::Index second = first == i ? partner : i;
    out.push_back(first);
    out.push_back(second);
    placed.insert(first);
    placed.insert(second);
  }
  return out;
}

}  // namespace

Eigen::Index conjugate_partner(const KoopmanSpectrum& spec, Eigen::Index i) {
  const Complex lambda = spec.eigenvalues(i);
  if (lambda.imag() == 0.0) return i;
  const Eigen::Index j = lambda.imag() > 0.0 ? i + 1 : i - 1;
  if (j < 0 || j >= spec.size() || spec.eigenvalues(j) != std::conj(lambda)) {
    throw DegenerateSpectrum("eigenvalue " + std::to_string(i) +
                             " has no adjacent conjugate partner");
  }
  return j;
}

std::vector<Eigen::Index> select_modes(const KoopmanSpectrum& spec, Eigen::Index n) {
  if (n < 1 || n > spec.size()) {
    throw InvalidSpec("mode count " + std::to_string(n) + " outside [1, " +
                      std::to_string(spec.size()) + "]");
  }
  std::vector<Eigen::Index> out;
  std::set<Eigen::Index> kept;
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index i = spec.ranking[r];
    if (kept.insert(i).second) out.push_back(i);
  }
  const std::vector<Eigen::Index> top = out;
  for (Eigen::Index i : top) {
    const Eigen::Index partner = conjugate_partner(spec, i);
    if (kept.insert(partner).second) out.push_back(partner);
  }
  return out;
}

double power_fraction(const KoopmanSpectrum& spec,
                      const std::vector<Eigen::Index>& indices) {
  const double total = spec.mode_powers.sum();
  if (!(total > 0.0)) return indices.empty() ? 0.0 : 1.0;
  double kept = 0.0;
  for (Eigen::Index i : indices) kept += spec.mode_powers(i);
  return kept / total;
}

std::vector<Eigen::Index> select_by_power(const KoopmanSpectrum& spec, double fraction) {
  const double total = spec.mode_powers.sum();
  double acc = 0.0;
  Eigen::Index n = 0;
  while (n < spec.size() && acc < fraction * total) {
    acc += spec.mode_powers(spec.ranking[n]);
    ++n;
  }
  return select_modes(spec, std::max<Eigen::Index>(1, n));
}

ReducedModel project(const LiftedModel& model, const KoopmanSpectrum& spec,
                     const std::vector<Eigen::Index>& indices) {
  if (indices.empty()) throw InvalidSpec("no modes selected");
  if (spec.modes.rows() != model.system.a.rows()) {
    throw InvalidSpec("spectrum does not belong to this model");
  }
  ReducedModel out;
  out.kept_indices = pair_order(spec, indices);
  const auto n = static_cast<Eigen::Index>(out.kept_indices.size());
  const Eigen::Index m = model.system.a.rows();

  out.basis.resize(m, n);
  out.eigenvalues.resize(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    out.basis.col(c) = spec.modes.col(out.kept_indices[c]);
    out.eigenvalues(c) = spec.eigenvalues(out.kept_indices[c]);
  }
  out.basis_condition = numerics::condition_number(out.basis);
  if (!(out.basis_condition <= kMaxBasisCondition)) {
    throw IllConditionedBasis("selected mode basis has condition number " +
                              std::to_string(out.basis_condition));
  }

  // Realifier T: z~ = T zeta. For a pair (zeta, conj zeta) = (xi - i eta,
  // xi + i eta) the real coordinates are (xi, eta).
  ComplexMatrix t = ComplexMatrix::Zero(n, n);
  ComplexMatrix t_inv = ComplexMatrix::Zero(n, n);
  const Complex i_unit(0.0, 1.0);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (out.eigenvalues(c).imag() == 0.0) {
      t(c, c) = 1.0;
      t_inv(c, c) = 1.0;
      continue;
    }
    t(c, c) = 0.5;
    t(c, c + 1) = 0.5;
    t(c + 1, c) = 0.5 * i_unit;
    t(c + 1, c + 1) = -0.5 * i_unit;
    t_inv(c, c) = 1.0;
    t_inv(c, c + 1) = -i_unit;
    t_inv(c + 1, c) = 1.0;
    t_inv(c + 1, c + 1) = i_unit;
    ++c;
  }

  // Left inverse of V_sel through the adjoint modes: W_sel^H V_sel = I, so
  // the reduced coordinates are the eigenfunction values phi_i(z) = <z, w_i>.
  ComplexMatrix left(m, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    left.col(c) = spec.adjoint_modes.col(out.kept_indices[c]);
  }
  const ComplexMatrix v_left = left.adjoint();
  const ComplexMatrix a_c = v_left * model.system.a.cast<Complex>() * out.basis;
  const ComplexMatrix b_c = v_left * model.system.b.cast<Complex>();
  const ComplexMatrix c_c = model.system.c.cast<Complex>() * out.basis;

  const ComplexMatrix a_r = t * a_c * t_inv;
  const ComplexMatrix b_r = t * b_c;
  const ComplexMatrix c_r = c_c * t_inv;
  const ComplexMatrix proj = t * v_left;
  const ComplexMatrix back = out.basis * t_inv;

  auto max_imag = [](const ComplexMatrix& x) {
    return x.size() == 0 ? 0.0 : x.imag().cwiseAbs().maxCoeff();
  };
  out.max_imaginary = std::max({max_imag(a_r), max_imag(b_r), max_imag(c_r)});
  const double scale = std::max({1.0, a_r.real().cwiseAbs().maxCoeff(),
                                 b_r.size() ? b_r.real().cwiseAbs().maxCoeff() : 0.0,
                                 c_r.real().cwiseAbs().maxCoeff()});
  if (out.max_imaginary > kImaginaryTolerance * scale) {
    throw NumericalFailure("realified reduced model has imaginary part " +
                           std::to_string(out.max_imaginary));
  }

  out.system.a = a_r.real();
  out.system.b = b_r.real();
  out.system.c = c_r.real();
  out.projector = proj.real();
  out.lift_basis = back.real();
  out.power_fraction = power_fraction(spec, out.kept_indices);
  return out;
}

RealMatrix reduced_rollout(const ReducedModel& rm, const RealVector& z0,
                           const RealMatrix& inputs) {
  return rollout(rm.system, z0, inputs);
}

}  // namespace koopman::reduce
