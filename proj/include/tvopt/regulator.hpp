#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "tvopt/errors.hpp"
#include "tvopt/exosystem.hpp"
#include "tvopt/loss.hpp"
#include "tvopt/rng.hpp"
#include "tvopt/spectral.hpp"

namespace tvopt {

enum class FeedbackKind { linear, newton };

// Static map x = H_c(theta) that zeros the gradient near the origin.
// H_c(0) equals the loss base point. The newton variant keeps a warm-start
// cache; confine each such map to a single simulation thread.
struct ParameterFeedbackMap {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply;
  FeedbackKind kind = FeedbackKind::linear;
  Eigen::MatrixXd gain;  // H_c for the linear kind, empty otherwise
};

// Linear zeroing map H_c = -R^+ Q for the quadratic gradient R x + Q theta.
// Requires Im Q contained in Im R, verified through |(I - R R^+) Q| <= tol;
// violation raises InfeasibilityError naming the offending theta direction.
// R is not required to be symmetric (saddle Jacobians are admitted).
ParameterFeedbackMap quadratic_hc(const Eigen::Ref<const Eigen::MatrixXd>& R,
                                  const Eigen::Ref<const Eigen::MatrixXd>& Q,
                                  double tol = 1e-9);

// Damped Newton solve of grad(x, theta) = 0 from x_guess: full steps with
// backtracking halving accepted on gradient-norm decrease (at most 60
// halvings). Throws SingularityError when the Hessian at an iterate is
// numerically singular and NonConvergenceError when iterations or the line
// search are exhausted.
Eigen::VectorXd newton_hc(const LossModel& loss, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& x_guess, double tol,
                          int max_iter);

// Newton-based zeroing map with a warm-start cache seeded at the base point.
ParameterFeedbackMap newton_feedback_map(const LossModel& loss,
                                         double tol = 1e-12,
                                         int max_iter = 50);

// Observer-based gradient-feedback controller: state dynamics F_c, output map
// G_c, the observer gain L, and the equilibrium z_star. Immutable.
struct GradientFeedbackAlgorithm {
  int n_c = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      F_c;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> G_c;
  Eigen::MatrixXd L;
  Eigen::VectorXd z_star;
};

// Observer-based synthesis:
//   n_c = p,  G_c = H_c,  F_c(z, y) = s(z) + L (y - grad(H_c(z), z)),
// with L from synthesize_observer_gain on the Jacobian pair of the problem.
// Throws SynthesisError if (Q, S) is undetectable or the zeroing map fails to
// zero the gradient at sampled parameters.
GradientFeedbackAlgorithm algorithm_one(const Exosystem& exo,
                                        const LossModel& loss,
                                        const ParameterFeedbackMap& hc,
                                        double margin);

struct CenterManifoldResidual {
  double r_dyn = 0.0;   // max |s(theta) - F_c(theta, 0)|
  double r_grad = 0.0;  // max |grad(G_c(theta), theta)|
};

// Invariance and zeroing residuals of the tracking characterization with the
// controller state identified with the parameter (sigma = identity). Both
// residuals at roundoff level certify the characterization on the samples.
CenterManifoldResidual center_manifold_residual(
    const GradientFeedbackAlgorithm& alg, const Exosystem& exo,
    const LossModel& loss, const std::vector<Eigen::VectorXd>& thetas);

// Spectrum of A_c + B_c R M, the closed-loop state matrix at the equilibrium;
// Jacobians taken by central differences (h = 1e-6) on the controller maps.
SpectralReport closed_loop_jacobian(const GradientFeedbackAlgorithm& alg,
                                    const LossModel& loss);

// Uniform samples in the ball of the given radius.
std::vector<Eigen::VectorXd> sample_ball(int dim, int count, double radius,
                                         Rng& rng);

}  // namespace tvopt
