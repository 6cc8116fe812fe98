#pragma once

#include <Eigen/Dense>

#include <functional>

#include "tvopt/errors.hpp"

namespace tvopt {

// Time-parameterized loss exposed through its gradient oracle. The analytic
// Jacobian oracles are optional; consumers fall back to central differences
// when they are absent. Gradient oracles must be pure; the model is immutable
// and shareable across threads.
struct LossModel {
  int x_dim = 0;
  int theta_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      hessian_xx;  // optional
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      jacobian_xtheta;  // optional
  Eigen::VectorXd base_point;  // gradient(base_point, 0) = 0
};

// Quadratic loss with gradient R x + Q theta; R must be symmetric.
LossModel quadratic_loss(const Eigen::Ref<const Eigen::MatrixXd>& R,
                         const Eigen::Ref<const Eigen::MatrixXd>& Q);

// Scalar double-well loss with a linear tilt: the gradient is
// 4x^3 - 4x + 8/(3 sqrt 3) + theta, with base point -2/sqrt(3).
LossModel quartic_example_loss();

struct JacobianPair {
  Eigen::MatrixXd hessian_xx;       // n x n
  Eigen::MatrixXd jacobian_xtheta;  // n x p
};

// Central-difference Jacobians of the gradient oracle at (x, theta).
JacobianPair finite_diff_jacobians(const LossModel& loss,
                                   const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& theta, double h);

// Analytic Hessian when available, else central differences with h = 1e-6.
Eigen::MatrixXd hessian_at(const LossModel& loss, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& theta);

// Analytic theta-Jacobian when available, else central differences.
Eigen::MatrixXd theta_jacobian_at(const LossModel& loss,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& theta);

// Loss over a re-parameterized exogenous state w with theta = readout * w.
LossModel reparameterize(const LossModel& loss,
                         const Eigen::Ref<const Eigen::MatrixXd>& readout);

}  // namespace tvopt
