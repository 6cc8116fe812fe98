#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "tvopt/errors.hpp"

namespace tvopt {

enum class ExosystemKind { linear, harmonic_bank, custom };

// Autonomous generator of the loss parameter: theta' = s(theta), with the
// origin an equilibrium. Immutable after construction; shareable across
// threads.
struct Exosystem {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> vector_field;
  Eigen::MatrixXd jacobian_at_origin;  // S
  ExosystemKind kind = ExosystemKind::custom;
};

// s(theta) = S theta.
Exosystem linear_exosystem(const Eigen::Ref<const Eigen::MatrixXd>& S);

// Block-diagonal generator with one 2x2 rotation block [[0,1],[-w^2,0]] per
// frequency, plus a trailing 1x1 zero block when include_constant is set.
// Frequencies must be strictly positive and distinct.
Exosystem harmonic_bank(const std::vector<double>& frequencies,
                        bool include_constant);

// Nonlinear vector field with s(0) = 0; the Jacobian at the origin is taken
// by central differences (h = 1e-6).
Exosystem custom_exosystem(
    int dim, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> field);

// True iff every eigenvalue of the Jacobian at the origin has |Re| <= tol.
// This is the spectral necessary condition for a recurrent exosystem; it does
// not check semisimplicity, so Jordan blocks pass.
bool check_neutral_spectrum(const Exosystem& exo, double tol);

}  // namespace tvopt
