#include "koopman/hdmd.hpp"

#include <algorithm>
#include <numeric>

#include "koopman/errors.hpp"

namespace koopman {

RealMatrix rollout(const LinearModel& model, const RealVector& z0,
                   const RealMatrix& inputs) {
  if (z0.size() != model.state_dim()) {
    throw InvalidSpec("initial lifted state has the wrong dimension");
  }
  if (inputs.cols() > 0 && inputs.rows() != model.input_dim()) {
    throw InvalidSpec("rollout inputs have the wrong dimension");
  }
  RealMatrix out(model.output_dim(), inputs.cols() + 1);
  RealVector z = z0;
  out.col(0) = model.c * z;
  for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
    z = model.a * z + model.b * inputs.col(k);
    out.col(k + 1) = model.c * z;
  }
  return out;
}

namespace hdmd {

LiftedModel fit(const LiftedSnapshotSet& data, double rcond) {
  if (data.size() < 1) {
    throw InsufficientData("fit needs at least one snapshot pair");
  }
  const Eigen::Index m = data.current.rows();
  const Eigen::Index p = data.inputs.rows();
  if (data.next.rows() != m || data.next.cols() != data.size() ||
      data.inputs.cols() != data.size()) {
    throw InvalidSpec("snapshot matrices are not aligned");
  }

  RealMatrix stacked(m + p, data.size());
  stacked.topRows(m) = data.current;
  if (p > 0) stacked.bottomRows(p) = data.inputs;

  const RealMatrix ab = numerics::times_pseudoinverse(data.next, stacked, rcond);

  LiftedModel model;
  model.system.a = ab.leftCols(m);
  model.system.b = ab.rightCols(p);
  model.system.c = projection_matrix(data.dictionary);
  model.dictionary = data.dictionary;
  model.sample_dt = data.sample_dt;
  model.training_snapshots = data.size();
  return model;
}

double fit_residual(const LinearModel& model, const LiftedSnapshotSet& data) {
  RealMatrix r = data.next - model.a * data.current;
  if (model.input_dim() > 0) r -= model.b * data.inputs;
  return r.norm();
}

RealVector mode_powers(const ComplexMatrix& adjoint_modes, const RealMatrix& lifted) {
  if (adjoint_modes.rows() != lifted.rows()) {
    throw InvalidSpec("lifted snapshots do not match the mode dimension");
  }
  if (lifted.cols() == 0) {
    throw InsufficientData("mode powers need at least one snapshot");
  }
  const Eigen::Index n = adjoint_modes.cols();
  RealVector sum = RealVector::Zero(n);
  const ComplexMatrix w_h = adjoint_modes.adjoint();
  constexpr Eigen::Index kChunk = 2048;
  for (Eigen::Index first = 0; first < lifted.cols(); first += kChunk) {
    const Eigen::Index count = std::min(kChunk, lifted.cols() - first);
    const ComplexMatrix phi =
        w_h * lifted.middleCols(first, count).cast<std::complex<double>>();
    sum += phi.cwiseAbs().rowwise().sum();
  }
  return sum / static_cast<double>(lifted.cols());
}

std::vector<Eigen::Index> rank_modes(const RealVector& powers,
                                     const ComplexVector& eigenvalues) {
  std::vector<Eigen::Index> order(powers.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    if (powers(i) != powers(j)) return powers(i) > powers(j);
    const double li = std::abs(eigenvalues(i));
    const double lj = std::abs(eigenvalues(j));
    if (li != lj) return li > lj;
    return i < j;
  });
  return order;
}

KoopmanSpectrum spectrum(const LiftedModel& model, const LiftedSnapshotSet& training,
                         const numerics::EigenOptions& options) {
  if (model.system.a.rows() != model.system.a.cols()) {
    throw InvalidSpec("A must be square");
  }
  auto eig = numerics::eig_biorthonormal(model.system.a, options);
  KoopmanSpectrum out;
  out.eigenvalues = std::move(eig.values);
  out.modes = std::move(eig.right);
  out.adjoint_modes = std::move(eig.left);
  out.condition = eig.condition;
  out.mode_powers = mode_powers(out.adjoint_modes, training.current);
  // Conjugate partners have equal power in exact arithmetic; make it exact so
  // ranking never splits a pair.
  for (Eigen::Index i = 0; i + 1 < out.size(); ++i) {
    if (out.eigenvalues(i).imag() > 0.0 &&
        out.eigenvalues(i + 1) == std::conj(out.eigenvalues(i))) {
      const double mean = 0.5 * (out.mode_powers(i) + out.mode_powers(i + 1));
      out.mode_powers(i) = out.mode_powers(i + 1) = mean;
      ++i;
    }
  }
  out.ranking = rank_modes(out.mode_powers, out.eigenvalues);
  return out;
}

}  // namespace hdmd
}  // namespace koopman
