#pragma once

#include <Eigen/Dense>

#include "tvopt/mismatch.hpp"
#include "tvopt/rng.hpp"

namespace tvopt {

// Seeded problem generators shared by the scenario runner and the
// verification suites.

struct QuadraticRecipe {
  Eigen::MatrixXd R;  // symmetric, eigenvalues uniform in (0, 1)
  Eigen::MatrixXd Q;  // identity
  Eigen::MatrixXd S;  // skew generator T - T^T, T entries uniform in (0, 1)
};

// Random quadratic tracking problem of size n = p.
QuadraticRecipe random_quadratic_problem(int n, Rng& rng);

// Random constant-exosystem (S = 0) closed loop with a Hurwitz error matrix
// and an exact zeroing transformation, so the internal-model defect Delta is
// the only imperfection.
LinearClosedLoop random_constant_mismatch_loop(int n, int p, Rng& rng);

// The 2x2 polynomial-growth example: R = Q = I, S the nilpotent Jordan
// block, A_c = [[-eps1, 1], [0, -eps2]], B_c = G_c = I, Sigma = -I.
LinearClosedLoop jordan_example_loop(double eps1, double eps2);

}  // namespace tvopt
