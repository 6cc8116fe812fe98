#pragma once

#include <Eigen/Dense>

#include "tvopt/errors.hpp"

namespace tvopt {

// Eigenvalue summary of a square real matrix.
struct SpectralReport {
  Eigen::VectorXcd eigenvalues;  // all eigenvalues, with multiplicity
  double spectral_abscissa = 0.0;  // max real part
  bool is_hurwitz = false;         // spectral_abscissa < 0
};

// Full unsymmetric eigendecomposition (QR/Schur iteration with Eigen's
// iteration cap). Throws DimensionError for non-square input and NumericError
// if the iteration fails to converge.
SpectralReport eigenvalues(const Eigen::Ref<const Eigen::MatrixXd>& m);

// PBH detectability test for the pair (Q, S): true iff the stacked matrix
// [S - lambda*I; Q] has full column rank for every eigenvalue lambda of S
// with nonnegative real part. Rank is decided by singular values above
// tol * sigma_max.
bool is_detectable(const Eigen::Ref<const Eigen::MatrixXd>& Q,
                   const Eigen::Ref<const Eigen::MatrixXd>& S,
                   double tol = 1e-9);

// Observer gain L (p x n) such that S - L*Q has spectral abscissa <= -margin.
// Solves the shifted filter Riccati equation
//   (S + margin*I) P + P (S + margin*I)^T - P Q^T Q P + W = 0,  W = I,
// through the stable invariant subspace of the associated Hamiltonian, and
// returns L = P Q^T. Throws SynthesisError when the (shifted) pair is not
// detectable and NumericError when the Hamiltonian has eigenvalues too close
// to the imaginary axis.
Eigen::MatrixXd synthesize_observer_gain(
    const Eigen::Ref<const Eigen::MatrixXd>& S,
    const Eigen::Ref<const Eigen::MatrixXd>& Q, double margin);

// Moore-Penrose pseudo-inverse via SVD; singular values below
// tol * sigma_max are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::Ref<const Eigen::MatrixXd>& m,
                               double tol = 1e-9);

struct SigmaSolution {
  Eigen::MatrixXd sigma;  // n_c x p
  double residual = 0.0;  // sqrt(|Sigma S - A_c Sigma|_F^2 + |R G_c Sigma + Q|_F^2)
};

// Least-squares solve of the linear invariance/zeroing characterization
//   Sigma S = A_c Sigma,   R G_c Sigma + Q = 0
// over Sigma, via the stacked Kronecker system. A residual at roundoff level
// certifies that the characterization holds exactly.
SigmaSolution solve_sigma(const Eigen::Ref<const Eigen::MatrixXd>& A_c,
                          const Eigen::Ref<const Eigen::MatrixXd>& G_c,
                          const Eigen::Ref<const Eigen::MatrixXd>& R,
                          const Eigen::Ref<const Eigen::MatrixXd>& Q,
                          const Eigen::Ref<const Eigen::MatrixXd>& S);

// Dense Kronecker product.
Eigen::MatrixXd kron(const Eigen::Ref<const Eigen::MatrixXd>& a,
                     const Eigen::Ref<const Eigen::MatrixXd>& b);

}  // namespace tvopt
