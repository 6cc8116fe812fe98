#pragma once

#include <Eigen/Dense>

#include <vector>

#include "tvopt/errors.hpp"
#include "tvopt/simulate.hpp"

namespace tvopt {

// Linear gradient-feedback loop around the quadratic problem, together with
// the manifold transformation Sigma and the internal-model defect Delta.
// Construction enforces the zeroing identity R G_c Sigma + Q = 0 and derives
// Delta = A_c Sigma - Sigma S.
struct LinearClosedLoop {
  Eigen::MatrixXd A_c;    // n_c x n_c
  Eigen::MatrixXd B_c;    // n_c x n
  Eigen::MatrixXd G_c;    // n x n_c
  Eigen::MatrixXd R;      // n x n
  Eigen::MatrixXd Q;      // n x p
  Eigen::MatrixXd S;      // p x p
  Eigen::MatrixXd Sigma;  // n_c x p
  Eigen::MatrixXd Delta;  // n_c x p
};

LinearClosedLoop make_closed_loop(const Eigen::MatrixXd& A_c,
                                  const Eigen::MatrixXd& B_c,
                                  const Eigen::MatrixXd& G_c,
                                  const Eigen::MatrixXd& R,
                                  const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& S,
                                  const Eigen::MatrixXd& Sigma);

// Error coordinates ztilde = z - Sigma theta evolve as
//   ztilde' = A_err ztilde + forcing * theta,   y = output * ztilde.
struct ErrorSystem {
  Eigen::MatrixXd A_err;    // A_c + B_c R G_c
  Eigen::MatrixXd forcing;  // Delta
  Eigen::MatrixXd output;   // R G_c
};

ErrorSystem error_system(const LinearClosedLoop& cl);

// Closed form of the asymptotic gradient for a constant exosystem (S = 0):
//   y_inf = -R G_c (A_c + B_c R G_c)^{-1} Delta theta0.
// Requires S = 0 and a Hurwitz error matrix.
Eigen::VectorXd asymptotic_gradient_constant(const LinearClosedLoop& cl,
                                             const Eigen::VectorXd& theta0);

struct AsymptoticGradient {
  bool divergent = false;
  Eigen::VectorXd y_inf;          // valid when !divergent
  double growth_exponent = 0.0;   // log-log slope of |g(s)| when divergent
};

// Final-value probe: evaluates
//   g(s) = s R G_c (sI - A_c - B_c R G_c)^{-1} Delta (sI - S)^{-1} theta0
// along a decreasing sequence s -> 0 (default 1e-1 ... 1e-8, geometric). A
// Cauchy-converging sequence yields the finite limit; otherwise the growth
// exponent is estimated from the log-log slope and the result is divergent.
// Probes at which a resolvent is singular are skipped.
AsymptoticGradient asymptotic_gradient_limit(
    const LinearClosedLoop& cl, const Eigen::VectorXd& theta0,
    std::vector<double> s_values = {});

// Direct time-domain run of the error system with theta' = S theta, started
// from z(0) = 0 (so ztilde(0) = -Sigma theta0). Logged channels are the
// physical z, x = G_c z and y = R x + Q theta.
Trajectory simulate_mismatch(const LinearClosedLoop& cl,
                             const Eigen::VectorXd& theta0,
                             const IntegratorConfig& cfg);

}  // namespace tvopt
