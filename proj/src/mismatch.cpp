#include "tvopt/mismatch.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "tvopt/exosystem.hpp"
#include "tvopt/loss.hpp"
#include "tvopt/spectral.hpp"

namespace tvopt {

LinearClosedLoop make_closed_loop(const Eigen::MatrixXd& A_c,
                                  const Eigen::MatrixXd& B_c,
                                  const Eigen::MatrixXd& G_c,
                                  const Eigen::MatrixXd& R,
                                  const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& S,
                                  const Eigen::MatrixXd& Sigma) {
  const Eigen::Index nc = A_c.rows();
  const Eigen::Index n = R.rows();
  const Eigen::Index p = S.rows();
  if (A_c.cols() != nc || B_c.rows() != nc || B_c.cols() != n ||
      G_c.rows() != n || G_c.cols() != nc || R.cols() != n || Q.rows() != n ||
      Q.cols() != p || S.cols() != p || Sigma.rows() != nc ||
      Sigma.cols() != p) {
    throw DimensionError("make_closed_loop: inconsistent dimensions");
  }
  const double zeroing = (R * G_c * Sigma + Q).norm();
  if (zeroing > 1e-8 * std::max(1.0, Q.norm())) {
    throw ValidationError(
        "make_closed_loop: Sigma does not satisfy the zeroing identity "
        "R G_c Sigma + Q = 0 (residual " +
        std::to_string(zeroing) + ")");
  }
  LinearClosedLoop cl{A_c, B_c, G_c, R, Q, S, Sigma,
                      A_c * Sigma - Sigma * S};
  return cl;
}

ErrorSystem error_system(const LinearClosedLoop& cl) {
  ErrorSystem sys;
  sys.A_err = cl.A_c + cl.B_c * cl.R * cl.G_c;
  sys.forcing = cl.Delta;
  sys.output = cl.R * cl.G_c;
  return sys;
}

Eigen::VectorXd asymptotic_gradient_constant(const LinearClosedLoop& cl,
                                             const Eigen::VectorXd& theta0) {
  if (cl.S.norm() != 0.0) {
    throw ValidationError(
        "asymptotic_gradient_constant: requires a constant exosystem (S = 0)");
  }
  const ErrorSystem sys = error_system(cl);
  if (!eigenvalues(sys.A_err).is_hurwitz) {
    throw ValidationError(
        "asymptotic_gradient_constant: the error matrix is not Hurwitz");
  }
  return -sys.output * sys.A_err.fullPivLu().solve(cl.Delta * theta0);
}

AsymptoticGradient asymptotic_gradient_limit(const LinearClosedLoop& cl,
                                             const Eigen::VectorXd& theta0,
                                             std::vector<double> s_values) {
  if (s_values.empty()) {
    for (int k = 1; k <= 8; ++k) s_values.push_back(std::pow(10.0, -k));
  }
  const ErrorSystem sys = error_system(cl);
  const Eigen::Index nc = sys.A_err.rows();
  const Eigen::Index p = cl.S.rows();

  std::vector<double> used_s;
  std::vector<Eigen::VectorXd> values;
  for (double s : s_values) {
    const Eigen::MatrixXd res_err =
        s * Eigen::MatrixXd::Identity(nc, nc) - sys.A_err;
    const Eigen::MatrixXd res_exo = s * Eigen::MatrixXd::Identity(p, p) - cl.S;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_err(res_err);
    Eigen::FullPivLU<Eigen::MatrixXd> lu_exo(res_exo);
    if (!lu_err.isInvertible() || !lu_exo.isInvertible()) {
      continue;  // probe hit a pole exactly
    }
    const Eigen::VectorXd g =
        s * (sys.output * lu_err.solve(cl.Delta * lu_exo.solve(theta0)));
    if (!g.allFinite()) continue;
    used_s.push_back(s);
    values.push_back(g);
  }
  if (values.size() < 2) {
    throw NumericError(
        "asymptotic_gradient_limit: all resolvent probes were singular");
  }

  AsymptoticGradient out;
  const Eigen::VectorXd& last = values.back();
  const Eigen::VectorXd& prev = values[values.size() - 2];
  const double scale = std::max(last.norm(), 1e-30);
  if ((last - prev).norm() <= 1e-6 * std::max(scale, 1.0)) {
    out.divergent = false;
    out.y_inf = last;
    return out;
  }

  // Growth exponent from the log-log slope of |g(s)|; a slope <= -1 marks a
  // pole at the origin that survives the s-multiplication.
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double norm = values[i].norm();
    if (norm <= 0.0) continue;
    const double ls = std::log(used_s[i]);
    const double ln = std::log(norm);
    st += ls;
    sl += ln;
    stt += ls * ls;
    stl += ls * ln;
    ++count;
  }
  out.divergent = true;
  out.y_inf = last;
  if (count >= 2) {
    const double denom = count * stt - st * st;
    if (denom != 0.0) out.growth_exponent = (count * stl - st * sl) / denom;
  }
  return out;
}

Trajectory simulate_mismatch(const LinearClosedLoop& cl,
                             const Eigen::VectorXd& theta0,
                             const IntegratorConfig& cfg) {
  if (theta0.size() != cl.S.rows()) {
    throw DimensionError("simulate_mismatch: theta0 dimension");
  }
  const Exosystem exo = linear_exosystem(cl.S);
  LossModel loss = quadratic_loss(0.5 * (cl.R + cl.R.transpose()), cl.Q);
  if ((cl.R - cl.R.transpose()).cwiseAbs().maxCoeff() > 1e-14) {
    // Non-symmetric R: bypass the symmetry guard of quadratic_loss.
    const Eigen::MatrixXd r = cl.R, q = cl.Q;
    loss.gradient = [r, q](const Eigen::VectorXd& x, const Eigen::VectorXd& th) {
      return Eigen::VectorXd(r * x + q * th);
    };
    loss.hessian_xx = [r](const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return r;
    };
  }

  GradientFeedbackAlgorithm alg;
  alg.n_c = static_cast<int>(cl.A_c.rows());
  alg.L = cl.B_c;
  alg.z_star = Eigen::VectorXd::Zero(alg.n_c);
  alg.G_c = [g = cl.G_c](const Eigen::VectorXd& z) {
    return Eigen::VectorXd(g * z);
  };
  alg.F_c = [a = cl.A_c, b = cl.B_c](const Eigen::VectorXd& z,
                                     const Eigen::VectorXd& y) {
    return Eigen::VectorXd(a * z + b * y);
  };

  return integrate_coupled(alg, exo, loss,
                           Eigen::VectorXd::Zero(alg.n_c), theta0, cfg);
}

}  // namespace tvopt
