#pragma once

#include <Eigen/Dense>

namespace koopman {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

namespace numerics {

/// Relative singular-value cutoff used when none is given.
inline constexpr double kDefaultRcond = 1e-10;

bool all_finite(const RealMatrix& m);

/// Moore-Penrose pseudoinverse. Singular values at or below rcond * sigma_max
/// are treated as zero.
RealMatrix pseudoinverse(const RealMatrix& m, double rcond = kDefaultRcond);

/// Complex counterpart, used for tall eigenvector bases.
ComplexMatrix pseudoinverse(const ComplexMatrix& m, double rcond = kDefaultRcond);

/// 2-norm condition number sigma_max / sigma_min (infinite when rank deficient).
double condition_number(const ComplexMatrix& m);

/// Computes Y * pinv(M) without materializing pinv(M). Used for wide data
/// matrices where pinv(M) would be (samples x features).
RealMatrix times_pseudoinverse(const RealMatrix& y, const RealMatrix& m,
                               double rcond = kDefaultRcond);

struct EigenOptions {
  /// Estimated condition number of the eigenvector matrix above which the
  /// matrix is reported as (numerically) defective.
  double condition_cap = 1e12;
};

/// Right eigenvectors V and adjoint eigenvectors W of a real square matrix,
/// scaled so that <v_i, w_j> = w_j^H v_i = delta_ij.
///
/// Each v_i has unit 2-norm with its largest-magnitude component real and
/// positive. Complex eigenvalues come in adjacent conjugate pairs, positive
/// imaginary part first, with exactly conjugate eigenvectors.
struct EigenDecomposition {
  ComplexVector values;
  ComplexMatrix right;  // columns v_i
  ComplexMatrix left;   // columns w_i, eigenvectors of A^H
  double condition = 1.0;
};

EigenDecomposition eig_biorthonormal(const RealMatrix& a,
                                     const EigenOptions& options = {});

double spectral_radius(const RealMatrix& a);

struct DareOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
};

struct DareSolution {
  RealMatrix p;
  RealMatrix k;
  int iterations = 0;
};

/// Stabilizing solution of P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q and the
/// associated gain K = (R + B'PB)^-1 B'PA.
DareSolution solve_dare(const RealMatrix& a, const RealMatrix& b,
                        const RealMatrix& q, const RealMatrix& r,
                        const DareOptions& options = {});

/// ||A'PA - P - A'PB (R + B'PB)^-1 B'PA + Q||_F / max(1, ||P||_F).
double dare_residual(const RealMatrix& a, const RealMatrix& b,
                     const RealMatrix& q, const RealMatrix& r,
                     const RealMatrix& p);

}  // namespace numerics
}  // namespace koopman
