#include "tvopt/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <complex>
#include <string>
#include <vector>

namespace tvopt {

namespace {

void require_square(const Eigen::Ref<const Eigen::MatrixXd>& m,
                    const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": matrix must be square, got " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m,
                    const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entries in input");
  }
}

}  // namespace

SpectralReport eigenvalues(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  require_square(m, "eigenvalues");
  require_finite(m, "eigenvalues");

  SpectralReport report;
  if (m.rows() == 0) {
    report.eigenvalues.resize(0);
    report.spectral_abscissa = -std::numeric_limits<double>::infinity();
    report.is_hurwitz = true;
    return report;
  }

  Eigen::EigenSolver<Eigen::MatrixXd> solver;
  solver.compute(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericError("eigenvalues: QR iteration did not converge");
  }
  report.eigenvalues = solver.eigenvalues();
  report.spectral_abscissa = report.eigenvalues.real().maxCoeff();
  report.is_hurwitz = report.spectral_abscissa < 0.0;
  return report;
}

bool is_detectable(const Eigen::Ref<const Eigen::MatrixXd>& Q,
                   const Eigen::Ref<const Eigen::MatrixXd>& S, double tol) {
  require_square(S, "is_detectable");
  if (Q.cols() != S.rows()) {
    throw DimensionError("is_detectable: Q has " + std::to_string(Q.cols()) +
                         " columns but S is " + std::to_string(S.rows()) +
                         "x" + std::to_string(S.cols()));
  }
  if (tol <= 0.0) {
    throw ValidationError("is_detectable: tol must be positive");
  }

  const Eigen::Index p = S.rows();
  const Eigen::Index n = Q.rows();
  const SpectralReport spec = eigenvalues(S);

  // Eigenvalues intended to sit on the imaginary axis may compute with a
  // slightly negative real part; include them in the test.
  const double axis_slack = 1e-9 * std::max(1.0, S.cwiseAbs().maxCoeff());

  Eigen::MatrixXcd stacked(p + n, p);
  stacked.bottomRows(n) = Q.cast<std::complex<double>>();
  for (Eigen::Index k = 0; k < p; ++k) {
    const std::complex<double> lambda = spec.eigenvalues[k];
    if (lambda.real() < -axis_slack) continue;
    stacked.topRows(p) = S.cast<std::complex<double>>();
    stacked.topRows(p).diagonal().array() -= lambda;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked);
    const Eigen::VectorXd sv = svd.singularValues();
    const double cutoff = tol * sv[0];
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv[i] > cutoff) ++rank;
    if (rank < p) return false;
  }
  return true;
}

Eigen::MatrixXd synthesize_observer_gain(
    const Eigen::Ref<const Eigen::MatrixXd>& S,
    const Eigen::Ref<const Eigen::MatrixXd>& Q, double margin) {
  require_square(S, "synthesize_observer_gain");
  if (Q.cols() != S.rows()) {
    throw DimensionError("synthesize_observer_gain: Q must have " +
                         std::to_string(S.rows()) + " columns");
  }
  if (margin <= 0.0) {
    throw ValidationError("synthesize_observer_gain: margin must be positive");
  }

  const Eigen::Index p = S.rows();
  const Eigen::MatrixXd A = S + margin * Eigen::MatrixXd::Identity(p, p);

  // The shifted Riccati equation has a stabilizing solution iff every
  // eigenvalue of A in the closed right half plane is observable; for
  // neutral-spectrum exosystems this coincides with detectability of (Q, S).
  if (!is_detectable(Q, A)) {
    throw SynthesisError(
        "synthesize_observer_gain: pair (Q, S) is not detectable at the "
        "requested margin");
  }

  Eigen::MatrixXd hamiltonian(2 * p, 2 * p);
  hamiltonian.topLeftCorner(p, p) = A.transpose();
  hamiltonian.topRightCorner(p, p) = -Q.transpose() * Q;
  hamiltonian.bottomLeftCorner(p, p) = -Eigen::MatrixXd::Identity(p, p);
  hamiltonian.bottomRightCorner(p, p) = -A;

  Eigen::EigenSolver<Eigen::MatrixXd> solver(hamiltonian);
  if (solver.info() != Eigen::Success) {
    throw NumericError("synthesize_observer_gain: Hamiltonian eigensolve failed");
  }
  const Eigen::VectorXcd evals = solver.eigenvalues();
  const Eigen::MatrixXcd evecs = solver.eigenvectors();

  const double axis_tol =
      1e-8 * std::max(1.0, hamiltonian.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> stable;
  for (Eigen::Index k = 0; k < evals.size(); ++k) {
    if (std::abs(evals[k].real()) <= axis_tol) {
      throw NumericError(
          "synthesize_observer_gain: Hamiltonian eigenvalue too close to the "
          "imaginary axis");
    }
    if (evals[k].real() < 0.0) stable.push_back(k);
  }
  if (static_cast<Eigen::Index>(stable.size()) != p) {
    throw NumericError(
        "synthesize_observer_gain: stable Hamiltonian subspace has wrong "
        "dimension");
  }

  Eigen::MatrixXcd basis(2 * p, p);
  for (Eigen::Index i = 0; i < p; ++i) basis.col(i) = evecs.col(stable[i]);

  // P = U2 * U1^{-1}, obtained from U1^T P^T = U2^T.
  const Eigen::MatrixXcd u1 = basis.topRows(p);
  const Eigen::MatrixXcd u2 = basis.bottomRows(p);
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(u1.transpose());
  if (!lu.isInvertible()) {
    throw NumericError(
        "synthesize_observer_gain: stable subspace basis is degenerate");
  }
  Eigen::MatrixXd riccati = lu.solve(u2.transpose()).transpose().real();
  riccati = 0.5 * (riccati + riccati.transpose().eval());

  const Eigen::MatrixXd gain = riccati * Q.transpose();

  const SpectralReport closed = eigenvalues(S - gain * Q);
  const double slack = 1e-8 * std::max(1.0, S.cwiseAbs().maxCoeff());
  if (closed.spectral_abscissa > -margin + slack) {
    throw NumericError(
        "synthesize_observer_gain: synthesized gain misses the decay margin "
        "(abscissa " +
        std::to_string(closed.spectral_abscissa) + ")");
  }
  return gain;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::Ref<const Eigen::MatrixXd>& m,
                               double tol) {
  require_finite(m, "pseudo_inverse");
  if (m.rows() == 0 || m.cols() == 0) {
    return Eigen::MatrixXd::Zero(m.cols(), m.rows());
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double cutoff = tol * sv[0];
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd kron(const Eigen::Ref<const Eigen::MatrixXd>& a,
                     const Eigen::Ref<const Eigen::MatrixXd>& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

SigmaSolution solve_sigma(const Eigen::Ref<const Eigen::MatrixXd>& A_c,
                          const Eigen::Ref<const Eigen::MatrixXd>& G_c,
                          const Eigen::Ref<const Eigen::MatrixXd>& R,
                          const Eigen::Ref<const Eigen::MatrixXd>& Q,
                          const Eigen::Ref<const Eigen::MatrixXd>& S) {
  require_square(A_c, "solve_sigma");
  require_square(S, "solve_sigma");
  require_square(R, "solve_sigma");
  const Eigen::Index nc = A_c.rows();
  const Eigen::Index p = S.rows();
  const Eigen::Index n = R.rows();
  if (G_c.rows() != n || G_c.cols() != nc || Q.rows() != n || Q.cols() != p) {
    throw DimensionError("solve_sigma: inconsistent dimensions");
  }

  // vec(Sigma S) = (S^T (x) I) v,  vec(A_c Sigma) = (I (x) A_c) v,
  // vec(R G_c Sigma) = (I (x) R G_c) v.
  const Eigen::MatrixXd eye_nc = Eigen::MatrixXd::Identity(nc, nc);
  const Eigen::MatrixXd eye_p = Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd rg = R * G_c;

  Eigen::MatrixXd lhs(nc * p + n * p, nc * p);
  lhs.topRows(nc * p) = kron(S.transpose(), eye_nc) - kron(eye_p, A_c);
  lhs.bottomRows(n * p) = kron(eye_p, rg);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nc * p + n * p);
  rhs.tail(n * p) = -Eigen::Map<const Eigen::VectorXd>(Q.data(), n * p);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(lhs,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd v = svd.solve(rhs);

  SigmaSolution out;
  out.sigma = Eigen::Map<const Eigen::MatrixXd>(v.data(), nc, p);
  out.residual = (lhs * v - rhs).norm();
  return out;
}

}  // namespace tvopt
