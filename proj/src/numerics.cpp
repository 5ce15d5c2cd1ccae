#include "koopman/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <sstream>

#include "koopman/errors.hpp"

namespace koopman::numerics {

namespace {

Eigen::BDCSVD<RealMatrix> thin_svd(const RealMatrix& m) {
  if (m.size() == 0) {
    throw InvalidMatrix("pseudoinverse of an empty matrix");
  }
  if (!all_finite(m)) {
    throw InvalidMatrix("matrix has non-finite entries");
  }
  Eigen::BDCSVD<RealMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalFailure("SVD did not converge");
  }
  return svd;
}

RealVector inverted_singular_values(const RealVector& s, double rcond) {
  const double cutoff = rcond * (s.size() > 0 ? s.maxCoeff() : 0.0);
  RealVector inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    inv(i) = (s(i) > cutoff && s(i) > 0.0) ? 1.0 / s(i) : 0.0;
  }
  return inv;
}

}  // namespace

bool all_finite(const RealMatrix& m) { return m.allFinite(); }

RealMatrix pseudoinverse(const RealMatrix& m, double rcond) {
  if (rcond < 0.0) {
    throw InvalidMatrix("rcond must be non-negative");
  }
  const auto svd = thin_svd(m);
  const RealVector inv = inverted_singular_values(svd.singularValues(), rcond);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

ComplexMatrix pseudoinverse(const ComplexMatrix& m, double rcond) {
  if (rcond < 0.0) {
    throw InvalidMatrix("rcond must be non-negative");
  }
  if (m.size() == 0) {
    throw InvalidMatrix("pseudoinverse of an empty matrix");
  }
  if (!m.allFinite()) {
    throw InvalidMatrix("matrix has non-finite entries");
  }
  Eigen::BDCSVD<ComplexMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalFailure("SVD did not converge");
  }
  const RealVector inv = inverted_singular_values(svd.singularValues(), rcond);
  return svd.matrixV() * inv.cast<std::complex<double>>().asDiagonal() *
         svd.matrixU().adjoint();
}

double condition_number(const ComplexMatrix& m) {
  if (m.size() == 0) return 1.0;
  Eigen::BDCSVD<ComplexMatrix> svd(m);
  const RealVector& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

RealMatrix times_pseudoinverse(const RealMatrix& y, const RealMatrix& m,
                               double rcond) {
  if (y.cols() != m.cols()) {
    throw InvalidMatrix("column count mismatch in Y * pinv(M)");
  }
  if (rcond < 0.0) {
    throw InvalidMatrix("rcond must be non-negative");
  }
  if (!all_finite(y)) {
    throw InvalidMatrix("matrix has non-finite entries");
  }
  const auto svd = thin_svd(m);
  const RealVector inv = inverted_singular_values(svd.singularValues(), rcond);
  // Y V S^+ U'
  RealMatrix yv = y * svd.matrixV();
  yv *= inv.asDiagonal();
  return yv * svd.matrixU().transpose();
}

EigenDecomposition eig_biorthonormal(const RealMatrix& a,
                                     const EigenOptions& options) {
  if (a.rows() != a.cols() || a.size() == 0) {
    throw InvalidMatrix("eigendecomposition needs a nonempty square matrix");
  }
  if (!all_finite(a)) {
    throw InvalidMatrix("matrix has non-finite entries");
  }
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<RealMatrix> solver(a, true);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("eigenvalue iteration did not converge");
  }

  EigenDecomposition out;
  out.values = solver.eigenvalues();
  out.right = solver.eigenvectors();

  for (Eigen::Index i = 0; i < n; ++i) {
    auto v = out.right.col(i);
    const double norm = v.norm();
    if (!(norm > 0.0)) {
      throw DegenerateSpectrum("zero eigenvector for eigenvalue index " +
                               std::to_string(i));
    }
    v /= norm;
    Eigen::Index argmax = 0;
    v.cwiseAbs().maxCoeff(&argmax);
    const std::complex<double> pivot = v(argmax);
    v *= std::abs(pivot) / pivot;
    v(argmax) = std::abs(v(argmax));

    // Eigen emits each complex pair as (+imag, -imag); force exact conjugacy.
    if (out.values(i).imag() > 0.0 && i + 1 < n) {
      out.values(i + 1) = std::conj(out.values(i));
      out.right.col(i + 1) = v.conjugate();
      ++i;
    } else if (out.values(i).imag() == 0.0) {
      v = v.real().cast<std::complex<double>>();
    }
  }

  Eigen::PartialPivLU<ComplexMatrix> lu(out.right);
  const double rcond = lu.rcond();
  out.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(out.condition <= options.condition_cap)) {
    std::ostringstream msg;
    msg << "eigenvector matrix condition estimate " << out.condition
        << " exceeds cap " << options.condition_cap
        << " (matrix is defective or nearly so)";
    throw DegenerateSpectrum(msg.str());
  }
  // W = V^-H gives w_j^H v_i = delta_ij and A^H W = W conj(Lambda).
  out.left = lu.inverse().adjoint();
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (out.values(i).imag() > 0.0) {
      out.left.col(i + 1) = out.left.col(i).conjugate();
      ++i;
    } else if (out.values(i).imag() == 0.0) {
      out.left.col(i) = out.left.col(i).real().cast<std::complex<double>>();
    }
  }
  if (n > 0 && out.values(n - 1).imag() == 0.0) {
    out.left.col(n - 1) = out.left.col(n - 1).real().cast<std::complex<double>>();
  }
  return out;
}

double spectral_radius(const RealMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<RealMatrix> solver(a, false);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("eigenvalue iteration did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double dare_residual(const RealMatrix& a, const RealMatrix& b,
                     const RealMatrix& q, const RealMatrix& r,
                     const RealMatrix& p) {
  const RealMatrix bt_p = b.transpose() * p;
  const RealMatrix s = r + bt_p * b;
  const RealMatrix gain = s.ldlt().solve(bt_p * a);
  const RealMatrix res =
      a.transpose() * p * a - p - (bt_p * a).transpose() * gain + q;
  return res.norm() / std::max(1.0, p.norm());
}

DareSolution solve_dare(const RealMatrix& a, const RealMatrix& b,
                        const RealMatrix& q, const RealMatrix& r,
                        const DareOptions& options) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != m || r.cols() != m) {
    throw InvalidMatrix("inconsistent DARE dimensions");
  }
  if (!all_finite(a) || !all_finite(b) || !all_finite(q) || !all_finite(r)) {
    throw InvalidMatrix("DARE input has non-finite entries");
  }
  const double sym_tol = 1e-10 * std::max(1.0, q.norm());
  if ((q - q.transpose()).norm() > sym_tol) {
    throw InvalidMatrix("Q is not symmetric");
  }
  if ((r - r.transpose()).norm() > 1e-10 * std::max(1.0, r.norm())) {
    throw InvalidMatrix("R is not symmetric");
  }
  Eigen::LLT<RealMatrix> r_llt(r);
  if (r_llt.info() != Eigen::Success) {
    throw InvalidMatrix("R is not positive definite");
  }

  // Structure-preserving doubling. H_k equals the value-iteration iterate
  // started from Q after 2^k - 1 steps, so it converges to the same fixed
  // point, quadratically.
  RealMatrix a_k = a;
  RealMatrix g_k = b * r_llt.solve(b.transpose());
  RealMatrix h_k = q;
  const RealMatrix identity = RealMatrix::Identity(n, n);

  DareSolution out;
  bool converged = false;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const RealMatrix w = identity + g_k * h_k;
    Eigen::PartialPivLU<RealMatrix> w_lu(w);
    const RealMatrix v1 = w_lu.solve(a_k);
    const RealMatrix v2 = w_lu.solve(g_k.transpose()).transpose();
    g_k += a_k * v2 * a_k.transpose();
    g_k = 0.5 * (g_k + g_k.transpose());
    RealMatrix h_next = h_k + v1.transpose() * h_k * a_k;
    h_next = 0.5 * (h_next + h_next.transpose());
    a_k = a_k * v1;

    if (!h_next.allFinite() || !a_k.allFinite() || !g_k.allFinite()) {
      throw NoStabilizingSolution("doubling iteration diverged after " +
                                  std::to_string(it) + " iterations");
    }
    const double change = (h_next - h_k).norm() / std::max(1.0, h_k.norm());
    h_k = std::move(h_next);
    out.iterations = it;
    if (change < options.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NoStabilizingSolution("no convergence within " +
                                std::to_string(options.max_iterations) +
                                " iterations");
  }

  out.p = h_k;
  const RealMatrix bt_p = b.transpose() * out.p;
  const RealMatrix s = r + bt_p * b;
  out.k = s.llt().solve(bt_p * a);
  if (!out.k.allFinite()) {
    throw NoStabilizingSolution("gain is not finite");
  }
  const double rho = spectral_radius(a - b * out.k);
  if (!(rho < 1.0)) {
    std::ostringstream msg;
    msg << "closed loop spectral radius " << rho << " is not below 1";
    throw NoStabilizingSolution(msg.str());
  }
  return out;
}

}  // namespace koopman::numerics
