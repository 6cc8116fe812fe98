#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>

#include "tvopt/errors.hpp"
#include "tvopt/exosystem.hpp"
#include "tvopt/loss.hpp"
#include "tvopt/regulator.hpp"

namespace tvopt {

enum class IntegratorMethod { rk4_fixed, rk45_adaptive };

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::rk45_adaptive;
  double step = 1e-3;   // fixed-step size (rk4_fixed)
  double rtol = 1e-9;   // adaptive tolerances
  double atol = 1e-12;
  double h_min = 1e-12;
  double h_max = 0.1;
  double t_end = 10.0;
  int samples = 1000;  // uniform output grid size
};

// Time-stamped samples of the coupled run on the uniform output grid. The
// logged gradient row satisfies y[k] = grad(x[k], theta[k]) exactly, because
// it is re-evaluated at the interpolated states. A trajectory that left the
// representable range is truncated and flagged instead of raising.
struct Trajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd theta;  // samples x p
  Eigen::MatrixXd z;      // samples x n_c (no columns for parameter feedback)
  Eigen::MatrixXd x;      // samples x n
  Eigen::MatrixXd y;      // samples x n
  bool diverged = false;
  double blow_up_time = std::numeric_limits<double>::quiet_NaN();
};

// Low-level driver shared by all integrations.
struct OdeSolution {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;  // one row per grid time
  bool diverged = false;
  double blow_up_time = std::numeric_limits<double>::quiet_NaN();
};

using OdeField =
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

// Integrates y' = f(t, y) on [0, t_end], logging on the uniform grid through
// cubic Hermite interpolation of the accepted steps. Non-finite or
// astronomically large states truncate the output and set the divergence
// report; adaptive step-size underflow raises StiffnessError.
OdeSolution integrate_ode(const OdeField& field, const Eigen::VectorXd& y0,
                          const IntegratorConfig& cfg);

// Coupled controller/exosystem run. When a projection is supplied the
// exploration point is projection(G_c(z)) both inside the vector field and in
// the log.
Trajectory integrate_coupled(
    const GradientFeedbackAlgorithm& alg, const Exosystem& exo,
    const LossModel& loss, const Eigen::VectorXd& z0,
    const Eigen::VectorXd& theta0, const IntegratorConfig& cfg,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& projection =
        {});

// Exosystem-only run with the static map x = H_c(theta); the z channel is
// left empty.
Trajectory integrate_parameter_feedback(const ParameterFeedbackMap& hc,
                                        const Exosystem& exo,
                                        const LossModel& loss,
                                        const Eigen::VectorXd& theta0,
                                        const IntegratorConfig& cfg);

struct TrackingMetrics {
  double y_tail_sup = 0.0;
  double observer_gap_tail_sup = 0.0;  // NaN when z and theta differ in size
  double decay_rate_estimate = 0.0;    // from a log-linear fit of |y(t)|
};

// Sup norms over the trailing tail_fraction of the horizon plus an empirical
// decay rate of |y(t)| fitted over its decaying segment.
TrackingMetrics tracking_metrics(const Trajectory& traj, double tail_fraction);

// CSV with header t,theta_1..,z_1..,x_1..,y_1..,y_norm at 17 significant
// digits, one row per sample.
void write_csv(const Trajectory& traj, std::ostream& out);
void write_csv(const Trajectory& traj, const std::string& path);

}  // namespace tvopt
