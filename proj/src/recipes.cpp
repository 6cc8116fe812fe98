#include "tvopt/recipes.hpp"

#include "tvopt/spectral.hpp"

namespace tvopt {

QuadraticRecipe random_quadratic_problem(int n, Rng& rng) {
  QuadraticRecipe out;
  out.R = rng.symmetric_with_spectrum(rng.vector_uniform(n, 0.0, 1.0));
  out.Q = Eigen::MatrixXd::Identity(n, n);
  out.S = rng.skew(n);
  return out;
}

LinearClosedLoop random_constant_mismatch_loop(int n, int p, Rng& rng) {
  const Eigen::MatrixXd r =
      rng.symmetric_with_spectrum(rng.vector_uniform(n, 0.5, 1.5));
  const Eigen::MatrixXd g_c = 0.5 * rng.matrix_normal(n, p);
  const Eigen::MatrixXd b_c = 0.5 * rng.matrix_normal(p, n);

  // Target error matrix shifted to a guaranteed decay of at least 1/2.
  Eigen::MatrixXd a_err = rng.matrix_normal(p, p);
  const double abscissa = eigenvalues(a_err).spectral_abscissa;
  a_err -= (abscissa + rng.uniform(0.5, 1.5)) *
           Eigen::MatrixXd::Identity(p, p);

  const Eigen::MatrixXd a_c = a_err - b_c * r * g_c;

  Eigen::MatrixXd sigma;
  do {
    sigma = Eigen::MatrixXd::Identity(p, p) + 0.3 * rng.matrix_normal(p, p);
  } while (std::abs(sigma.determinant()) < 0.1);

  const Eigen::MatrixXd q = -r * g_c * sigma;
  const Eigen::MatrixXd s0 = Eigen::MatrixXd::Zero(p, p);
  return make_closed_loop(a_c, b_c, g_c, r, q, s0, sigma);
}

LinearClosedLoop jordan_example_loop(double eps1, double eps2) {
  Eigen::MatrixXd s(2, 2), a_c(2, 2);
  s << 0.0, 1.0, 0.0, 0.0;
  a_c << -eps1, 1.0, 0.0, -eps2;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  return make_closed_loop(a_c, eye, eye, eye, eye, s, -eye);
}

}  // namespace tvopt
