#include "tvopt/regulator.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <memory>
#include <sstream>
#include <string>

namespace tvopt {

ParameterFeedbackMap quadratic_hc(const Eigen::Ref<const Eigen::MatrixXd>& R,
                                  const Eigen::Ref<const Eigen::MatrixXd>& Q,
                                  double tol) {
  if (R.rows() != R.cols()) {
    throw DimensionError("quadratic_hc: R must be square");
  }
  if (Q.rows() != R.rows()) {
    throw DimensionError("quadratic_hc: Q must have as many rows as R");
  }
  if (tol <= 0.0) {
    throw ValidationError("quadratic_hc: tol must be positive");
  }

  const Eigen::MatrixXd r_pinv = pseudo_inverse(R);
  const Eigen::MatrixXd residual =
      Q - R * r_pinv * Q;  // (I - R R^+) Q, zero iff Im Q in Im R
  const double mismatch = residual.norm();
  if (mismatch > tol) {
    // Name the parameter direction along which no critical point exists.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual, Eigen::ComputeThinV);
    const Eigen::VectorXd dir = svd.matrixV().col(0);
    std::ostringstream msg;
    msg << "quadratic_hc: no critical point for arbitrary parameters; "
        << "the gradient cannot be zeroed along the theta direction [";
    for (Eigen::Index i = 0; i < dir.size(); ++i) {
      msg << (i ? ", " : "") << dir[i];
    }
    msg << "] (|(I - R R^+) Q| = " << mismatch << ")";
    throw InfeasibilityError(msg.str());
  }

  ParameterFeedbackMap map;
  map.kind = FeedbackKind::linear;
  map.gain = -r_pinv * Q;
  map.apply = [h = map.gain](const Eigen::VectorXd& theta) {
    return Eigen::VectorXd(h * theta);
  };
  return map;
}

Eigen::VectorXd newton_hc(const LossModel& loss, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& x_guess, double tol,
                          int max_iter) {
  if (tol <= 0.0) {
    throw ValidationError("newton_hc: tol must be positive");
  }
  if (max_iter <= 0) {
    throw ValidationError("newton_hc: max_iter must be positive");
  }

  Eigen::VectorXd x = x_guess;
  Eigen::VectorXd g = loss.gradient(x, theta);
  if (!g.allFinite()) {
    throw NumericError("newton_hc: non-finite gradient at the initial guess");
  }

  for (int it = 0; it < max_iter; ++it) {
    const double gnorm = g.norm();
    if (gnorm <= tol) return x;

    const Eigen::MatrixXd hess = hessian_at(loss, x, theta);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        hess, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (sv[sv.size() - 1] <= 1e-12 * sv[0]) {
      throw SingularityError(
          "newton_hc: singular Hessian at iterate (condition number above "
          "1e12)");
    }
    const Eigen::VectorXd step = svd.solve(-g);

    double alpha = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings <= 60; ++halvings) {
      const Eigen::VectorXd x_trial = x + alpha * step;
      const Eigen::VectorXd g_trial = loss.gradient(x_trial, theta);
      if (g_trial.allFinite() && g_trial.norm() < gnorm) {
        x = x_trial;
        g = g_trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      throw NonConvergenceError(
          "newton_hc: line search failed to decrease the gradient norm "
          "(|grad| = " +
          std::to_string(gnorm) + ")");
    }
  }
  if (g.norm() <= tol) return x;
  throw NonConvergenceError("newton_hc: not converged after " +
                            std::to_string(max_iter) + " iterations");
}

ParameterFeedbackMap newton_feedback_map(const LossModel& loss, double tol,
                                         int max_iter) {
  auto cache = std::make_shared<Eigen::VectorXd>(loss.base_point);
  ParameterFeedbackMap map;
  map.kind = FeedbackKind::newton;
  map.apply = [loss, tol, max_iter, cache](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd x = newton_hc(loss, theta, *cache, tol, max_iter);
    *cache = x;
    return x;
  };
  return map;
}

GradientFeedbackAlgorithm algorithm_one(const Exosystem& exo,
                                        const LossModel& loss,
                                        const ParameterFeedbackMap& hc,
                                        double margin) {
  const int p = exo.dim;
  if (loss.theta_dim != p) {
    throw DimensionError(
        "algorithm_one: loss parameter dimension does not match the "
        "exosystem");
  }

  const Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(p);
  const Eigen::MatrixXd S = exo.jacobian_at_origin;
  const Eigen::MatrixXd Q = theta_jacobian_at(loss, loss.base_point, theta0);

  if (!is_detectable(Q, S)) {
    throw SynthesisError(
        "algorithm_one: the Jacobian pair (Q, S) is not detectable");
  }

  // The zeroing map must actually zero the gradient near the origin.
  {
    Rng rng(0x5eedu);
    const auto samples = sample_ball(p, 8, 1e-2, rng);
    for (const auto& th : samples) {
      const double res = loss.gradient(hc.apply(th), th).norm();
      if (!(res <= 1e-6)) {
        throw SynthesisError(
            "algorithm_one: the supplied map does not zero the gradient near "
            "the origin (residual " +
            std::to_string(res) + ")");
      }
    }
  }

  GradientFeedbackAlgorithm alg;
  alg.n_c = p;
  alg.L = synthesize_observer_gain(S, Q, margin);
  alg.z_star = Eigen::VectorXd::Zero(p);
  alg.G_c = hc.apply;
  alg.F_c = [field = exo.vector_field, grad = loss.gradient, apply = hc.apply,
             L = alg.L](const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
    return Eigen::VectorXd(field(z) + L * (y - grad(apply(z), z)));
  };
  return alg;
}

CenterManifoldResidual center_manifold_residual(
    const GradientFeedbackAlgorithm& alg, const Exosystem& exo,
    const LossModel& loss, const std::vector<Eigen::VectorXd>& thetas) {
  CenterManifoldResidual out;
  const Eigen::VectorXd y0 = Eigen::VectorXd::Zero(loss.x_dim);
  for (const auto& th : thetas) {
    if (!th.allFinite()) {
      throw NumericError("center_manifold_residual: non-finite sample");
    }
    out.r_dyn =
        std::max(out.r_dyn, (exo.vector_field(th) - alg.F_c(th, y0)).norm());
    out.r_grad =
        std::max(out.r_grad, loss.gradient(alg.G_c(th), th).norm());
  }
  return out;
}

SpectralReport closed_loop_jacobian(const GradientFeedbackAlgorithm& alg,
                                    const LossModel& loss) {
  const int nc = alg.n_c;
  const int n = loss.x_dim;
  const double h = 1e-6;
  const Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n);

  Eigen::MatrixXd a_c(nc, nc);
  Eigen::VectorXd z = alg.z_star;
  for (int j = 0; j < nc; ++j) {
    z[j] = alg.z_star[j] + h;
    const Eigen::VectorXd fp = alg.F_c(z, y0);
    z[j] = alg.z_star[j] - h;
    const Eigen::VectorXd fm = alg.F_c(z, y0);
    z[j] = alg.z_star[j];
    if (!fp.allFinite() || !fm.allFinite()) {
      throw NumericError("closed_loop_jacobian: non-finite F_c sample");
    }
    a_c.col(j) = (fp - fm) / (2.0 * h);
  }

  Eigen::MatrixXd b_c(nc, n);
  Eigen::VectorXd y = y0;
  for (int j = 0; j < n; ++j) {
    y[j] = h;
    const Eigen::VectorXd fp = alg.F_c(alg.z_star, y);
    y[j] = -h;
    const Eigen::VectorXd fm = alg.F_c(alg.z_star, y);
    y[j] = 0.0;
    b_c.col(j) = (fp - fm) / (2.0 * h);
  }

  Eigen::MatrixXd m(n, nc);
  for (int j = 0; j < nc; ++j) {
    z[j] = alg.z_star[j] + h;
    const Eigen::VectorXd gp = alg.G_c(z);
    z[j] = alg.z_star[j] - h;
    const Eigen::VectorXd gm = alg.G_c(z);
    z[j] = alg.z_star[j];
    m.col(j) = (gp - gm) / (2.0 * h);
  }

  const Eigen::MatrixXd r = hessian_at(loss, loss.base_point,
                                       Eigen::VectorXd::Zero(loss.theta_dim));
  return eigenvalues(a_c + b_c * r * m);
}

std::vector<Eigen::VectorXd> sample_ball(int dim, int count, double radius,
                                         Rng& rng) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(rng.ball(dim, radius));
  return out;
}

}  // namespace tvopt
