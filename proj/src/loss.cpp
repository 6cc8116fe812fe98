#include "tvopt/loss.hpp"

#include <cmath>
#include <string>

namespace tvopt {

LossModel quadratic_loss(const Eigen::Ref<const Eigen::MatrixXd>& R,
                         const Eigen::Ref<const Eigen::MatrixXd>& Q) {
  if (R.rows() != R.cols()) {
    throw DimensionError("quadratic_loss: R must be square");
  }
  if (Q.rows() != R.rows()) {
    throw DimensionError("quadratic_loss: Q must have as many rows as R");
  }
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ValidationError("quadratic_loss: R must be symmetric");
  }

  LossModel loss;
  loss.x_dim = static_cast<int>(R.rows());
  loss.theta_dim = static_cast<int>(Q.cols());
  loss.base_point = Eigen::VectorXd::Zero(loss.x_dim);
  Eigen::MatrixXd r = R, q = Q;
  loss.gradient = [r, q](const Eigen::VectorXd& x, const Eigen::VectorXd& th) {
    return Eigen::VectorXd(r * x + q * th);
  };
  loss.hessian_xx = [r](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return r;
  };
  loss.jacobian_xtheta = [q](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return q;
  };
  return loss;
}

LossModel quartic_example_loss() {
  const double tilt = 8.0 / (3.0 * std::sqrt(3.0));
  LossModel loss;
  loss.x_dim = 1;
  loss.theta_dim = 1;
  loss.base_point = Eigen::VectorXd::Constant(1, -2.0 / std::sqrt(3.0));
  loss.gradient = [tilt](const Eigen::VectorXd& x, const Eigen::VectorXd& th) {
    Eigen::VectorXd g(1);
    const double v = x[0];
    g[0] = 4.0 * v * v * v - 4.0 * v + tilt + th[0];
    return g;
  };
  loss.hessian_xx = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    Eigen::MatrixXd h(1, 1);
    h(0, 0) = 12.0 * x[0] * x[0] - 4.0;
    return h;
  };
  loss.jacobian_xtheta = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Ones(1, 1);
  };
  return loss;
}

JacobianPair finite_diff_jacobians(const LossModel& loss,
                                   const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& theta, double h) {
  if (h <= 0.0) {
    throw ValidationError("finite_diff_jacobians: h must be positive");
  }
  const int n = loss.x_dim;
  const int p = loss.theta_dim;

  JacobianPair out;
  out.hessian_xx.resize(n, n);
  out.jacobian_xtheta.resize(n, p);

  Eigen::VectorXd xp = x;
  for (int j = 0; j < n; ++j) {
    xp[j] = x[j] + h;
    const Eigen::VectorXd gp = loss.gradient(xp, theta);
    xp[j] = x[j] - h;
    const Eigen::VectorXd gm = loss.gradient(xp, theta);
    xp[j] = x[j];
    if (!gp.allFinite() || !gm.allFinite()) {
      throw NumericError("finite_diff_jacobians: non-finite gradient sample");
    }
    out.hessian_xx.col(j) = (gp - gm) / (2.0 * h);
  }
  Eigen::VectorXd tp = theta;
  for (int j = 0; j < p; ++j) {
    tp[j] = theta[j] + h;
    const Eigen::VectorXd gp = loss.gradient(x, tp);
    tp[j] = theta[j] - h;
    const Eigen::VectorXd gm = loss.gradient(x, tp);
    tp[j] = theta[j];
    if (!gp.allFinite() || !gm.allFinite()) {
      throw NumericError("finite_diff_jacobians: non-finite gradient sample");
    }
    out.jacobian_xtheta.col(j) = (gp - gm) / (2.0 * h);
  }
  return out;
}

Eigen::MatrixXd hessian_at(const LossModel& loss, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& theta) {
  if (loss.hessian_xx) return loss.hessian_xx(x, theta);
  return finite_diff_jacobians(loss, x, theta, 1e-6).hessian_xx;
}

Eigen::MatrixXd theta_jacobian_at(const LossModel& loss,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& theta) {
  if (loss.jacobian_xtheta) return loss.jacobian_xtheta(x, theta);
  return finite_diff_jacobians(loss, x, theta, 1e-6).jacobian_xtheta;
}

LossModel reparameterize(const LossModel& loss,
                         const Eigen::Ref<const Eigen::MatrixXd>& readout) {
  if (readout.rows() != loss.theta_dim) {
    throw DimensionError("reparameterize: readout must map onto " +
                         std::to_string(loss.theta_dim) + " parameters");
  }
  LossModel out;
  out.x_dim = loss.x_dim;
  out.theta_dim = static_cast<int>(readout.cols());
  out.base_point = loss.base_point;
  const Eigen::MatrixXd e = readout;
  out.gradient = [loss, e](const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
    return loss.gradient(x, e * w);
  };
  if (loss.hessian_xx) {
    out.hessian_xx = [loss, e](const Eigen::VectorXd& x,
                               const Eigen::VectorXd& w) {
      return loss.hessian_xx(x, e * w);
    };
  }
  if (loss.jacobian_xtheta) {
    out.jacobian_xtheta = [loss, e](const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& w) {
      return Eigen::MatrixXd(loss.jacobian_xtheta(x, e * w) * e);
    };
  }
  return out;
}

}  // namespace tvopt
