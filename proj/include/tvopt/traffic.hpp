#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tvopt/errors.hpp"
#include "tvopt/exosystem.hpp"
#include "tvopt/loss.hpp"

namespace tvopt {

// Single-commodity routing network with linear latencies l_i(x_i) = a_i x_i.
struct Network {
  std::vector<std::string> node_names;
  std::vector<std::pair<int, int>> edges;  // (tail, head)
  int origin = -1;
  int destination = -1;
  Eigen::VectorXd latency_slopes;

  int node_count() const { return static_cast<int>(node_names.size()); }
  int edge_count() const { return static_cast<int>(edges.size()); }
};

// Line format: `node <name>`, `edge <tail> <head> <slope>`, `origin <name>`,
// `destination <name>`; `#` starts a comment. Raises ParseError with the
// offending line number, ValidationError for structural problems.
Network parse_network(const std::string& text);

// Reduced incidence system for the conservation constraint B x = delta(theta):
// B(v, e) is +1 when edge e leaves node v and -1 when it enters, the
// destination row is dropped (it is the negative sum of the others), and
// delta maps the scalar inflow to the per-node injections (+theta at the
// origin row).
struct IncidenceSystem {
  Eigen::MatrixXd incidence;              // (|V|-1) x |E|
  std::vector<int> row_nodes;             // node index per retained row
  std::function<Eigen::VectorXd(double)> delta;
};

IncidenceSystem incidence_and_divergence(const Network& net);

// Saddle loss over the stacked variable (x, lambda): the regulated signal is
//   ( a .* x + B^T lambda,  delta(theta) - B x ),
// whose x-block Hessian diag(a) is positive definite; the parameter is the
// scalar inflow (theta_dim = 1).
LossModel lagrangian_loss(const Network& net);

// Sinusoidal inflow theta0 - theta1 cos(w1 t + phi1) - theta2 cos(w2 t + phi2).
struct InflowModel {
  double theta0 = 0.0, theta1 = 0.0, theta2 = 0.0;
  double omega1 = 0.0, omega2 = 0.0;
  double phi1 = 0.0, phi2 = 0.0;
};

// Harmonic-bank generator of the inflow: a 5-state exosystem (one rotation
// block per frequency plus a constant block), a fixed linear readout giving
// the scalar inflow, and the t = 0 state reproducing the inflow model.
struct InflowExosystem {
  Exosystem exosystem;
  Eigen::VectorXd readout;        // inflow = readout . state
  Eigen::VectorXd initial_state;  // embeds the model at t = 0
};

InflowExosystem inflow_exosystem(const InflowModel& inflow);

// Componentwise clamp of the first flow_count entries at zero; multipliers
// are untouched.
Eigen::VectorXd project_nonneg(const Eigen::VectorXd& xtilde, int flow_count);

struct WardropSolution {
  Eigen::VectorXd flows;
  Eigen::VectorXd multipliers;  // one per retained incidence row
  double kkt_residual = 0.0;
};

// Static equilibrium at a frozen inflow via an active-set solve of the
// nonnegativity-constrained conservation problem; serves as the ground-truth
// oracle for the dynamic runs.
WardropSolution solve_static_wardrop(const Network& net, double inflow);

// Shared first-order optimality residual: stationarity on free edges, dual
// feasibility on bound edges, conservation, and nonnegativity.
double wardrop_kkt_residual(const Network& net, const Eigen::VectorXd& flows,
                            const Eigen::VectorXd& multipliers, double inflow);

}  // namespace tvopt
