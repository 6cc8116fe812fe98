#include "tvopt/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>
#include <string>

namespace tvopt {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream stream(line);
  std::string tok;
  while (stream >> tok) {
    if (tok[0] == '#') break;
    tokens.push_back(tok);
  }
  return tokens;
}

}  // namespace

Network parse_network(const std::string& text) {
  Network net;
  std::map<std::string, int> index;

  auto lookup = [&](const std::string& name, int line_no) {
    auto it = index.find(name);
    if (it == index.end()) {
      throw ParseError("network line " + std::to_string(line_no) +
                       ": unknown node '" + name + "'");
    }
    return it->second;
  };

  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  std::vector<double> slopes;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string& kind = tokens[0];
    if (kind == "node") {
      if (tokens.size() != 2) {
        throw ParseError("network line " + std::to_string(line_no) +
                         ": expected 'node <name>'");
      }
      if (index.count(tokens[1])) {
        throw ParseError("network line " + std::to_string(line_no) +
                         ": duplicate node '" + tokens[1] + "'");
      }
      index[tokens[1]] = net.node_count();
      net.node_names.push_back(tokens[1]);
    } else if (kind == "edge") {
      if (tokens.size() != 4) {
        throw ParseError("network line " + std::to_string(line_no) +
                         ": expected 'edge <tail> <head> <slope>'");
      }
      const int tail = lookup(tokens[1], line_no);
      const int head = lookup(tokens[2], line_no);
      double slope = 0.0;
      try {
        std::size_t pos = 0;
        slope = std::stod(tokens[3], &pos);
        if (pos != tokens[3].size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ParseError("network line " + std::to_string(line_no) +
                         ": bad slope '" + tokens[3] + "'");
      }
      if (tail == head) {
        throw ValidationError("network line " + std::to_string(line_no) +
                              ": self-loop on node '" + tokens[1] + "'");
      }
      if (slope <= 0.0) {
        throw ValidationError("network line " + std::to_string(line_no) +
                              ": latency slope must be positive");
      }
      net.edges.emplace_back(tail, head);
      slopes.push_back(slope);
    } else if (kind == "origin" || kind == "destination") {
      if (tokens.size() != 2) {
        throw ParseError("network line " + std::to_string(line_no) +
                         ": expected '" + kind + " <name>'");
      }
      (kind == "origin" ? net.origin : net.destination) =
          lookup(tokens[1], line_no);
    } else {
      throw ParseError("network line " + std::to_string(line_no) +
                       ": unknown directive '" + kind + "'");
    }
  }

  if (net.origin < 0 || net.destination < 0) {
    throw ValidationError("network: origin and destination must be declared");
  }
  if (net.origin == net.destination) {
    throw ValidationError("network: origin equals destination");
  }
  if (net.edge_count() == 0) {
    throw ValidationError("network: no edges");
  }
  net.latency_slopes =
      Eigen::Map<const Eigen::VectorXd>(slopes.data(), slopes.size());

  // Reachability of the destination from the origin.
  std::vector<char> seen(net.node_count(), 0);
  std::queue<int> frontier;
  frontier.push(net.origin);
  seen[net.origin] = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (const auto& [tail, head] : net.edges) {
      if (tail == v && !seen[head]) {
        seen[head] = 1;
        frontier.push(head);
      }
    }
  }
  if (!seen[net.destination]) {
    throw ValidationError(
        "network: destination is not reachable from the origin");
  }
  return net;
}

IncidenceSystem incidence_and_divergence(const Network& net) {
  const int nv = net.node_count();
  const int ne = net.edge_count();
  IncidenceSystem sys;
  sys.incidence = Eigen::MatrixXd::Zero(nv - 1, ne);
  sys.row_nodes.reserve(nv - 1);

  std::vector<int> row_of(nv, -1);
  for (int v = 0, r = 0; v < nv; ++v) {
    if (v == net.destination) continue;  // redundant conservation row
    row_of[v] = r;
    sys.row_nodes.push_back(v);
    ++r;
  }
  for (int e = 0; e < ne; ++e) {
    const auto [tail, head] = net.edges[e];
    if (row_of[tail] >= 0) sys.incidence(row_of[tail], e) += 1.0;
    if (row_of[head] >= 0) sys.incidence(row_of[head], e) -= 1.0;
  }
  const int origin_row = row_of[net.origin];
  const int rows = nv - 1;
  sys.delta = [origin_row, rows](double inflow) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(rows);
    d[origin_row] = inflow;
    return d;
  };
  return sys;
}

LossModel lagrangian_loss(const Network& net) {
  const IncidenceSystem sys = incidence_and_divergence(net);
  const int ne = net.edge_count();
  const int nm = static_cast<int>(sys.incidence.rows());
  const Eigen::MatrixXd b = sys.incidence;
  const Eigen::VectorXd a = net.latency_slopes;

  LossModel loss;
  loss.x_dim = ne + nm;
  loss.theta_dim = 1;
  loss.base_point = Eigen::VectorXd::Zero(loss.x_dim);
  loss.gradient = [a, b, ne, nm, delta = sys.delta](
                      const Eigen::VectorXd& xt, const Eigen::VectorXd& th) {
    const Eigen::VectorXd x = xt.head(ne);
    const Eigen::VectorXd lam = xt.tail(nm);
    Eigen::VectorXd g(ne + nm);
    g.head(ne) = a.cwiseProduct(x) + b.transpose() * lam;
    g.tail(nm) = delta(th[0]) - b * x;
    return g;
  };

  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(loss.x_dim, loss.x_dim);
  hess.topLeftCorner(ne, ne) = a.asDiagonal();
  hess.topRightCorner(ne, nm) = b.transpose();
  hess.bottomLeftCorner(nm, ne) = -b;
  loss.hessian_xx = [hess](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return hess;
  };

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(loss.x_dim, 1);
  jac.col(0).tail(nm) = sys.delta(1.0);
  loss.jacobian_xtheta = [jac](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return jac;
  };
  return loss;
}

InflowExosystem inflow_exosystem(const InflowModel& inflow) {
  if (inflow.omega1 <= 0.0 || inflow.omega2 <= inflow.omega1) {
    throw ValidationError(
        "inflow_exosystem: frequencies must satisfy 0 < omega1 < omega2");
  }
  if (inflow.theta1 < 0.0 || inflow.theta2 < 0.0 ||
      inflow.theta0 <= inflow.theta1 || inflow.theta0 <= inflow.theta2) {
    throw ValidationError(
        "inflow_exosystem: amplitudes must satisfy theta0 > theta1 >= 0 and "
        "theta0 > theta2 >= 0");
  }

  InflowExosystem out;
  out.exosystem = harmonic_bank({inflow.omega1, inflow.omega2}, true);
  out.readout.resize(5);
  out.readout << 1.0, 0.0, 1.0, 0.0, 1.0;
  out.initial_state.resize(5);
  out.initial_state << -inflow.theta1 * std::cos(inflow.phi1),
      inflow.theta1 * inflow.omega1 * std::sin(inflow.phi1),
      -inflow.theta2 * std::cos(inflow.phi2),
      inflow.theta2 * inflow.omega2 * std::sin(inflow.phi2), inflow.theta0;
  return out;
}

Eigen::VectorXd project_nonneg(const Eigen::VectorXd& xtilde, int flow_count) {
  if (flow_count < 0 || flow_count > xtilde.size()) {
    throw DimensionError("project_nonneg: flow_count out of range");
  }
  Eigen::VectorXd out = xtilde;
  out.head(flow_count) = out.head(flow_count).cwiseMax(0.0);
  return out;
}

double wardrop_kkt_residual(const Network& net, const Eigen::VectorXd& flows,
                            const Eigen::VectorXd& multipliers, double inflow) {
  const IncidenceSystem sys = incidence_and_divergence(net);
  const int ne = net.edge_count();
  if (flows.size() != ne ||
      multipliers.size() != sys.incidence.rows()) {
    throw DimensionError("wardrop_kkt_residual: dimensions");
  }

  const Eigen::VectorXd stationarity =
      net.latency_slopes.cwiseProduct(flows) +
      sys.incidence.transpose() * multipliers;
  const double bound_tol = 1e-9 * std::max(1.0, flows.cwiseAbs().maxCoeff());

  double residual = 0.0;
  for (int e = 0; e < ne; ++e) {
    if (flows[e] > bound_tol) {
      residual = std::max(residual, std::abs(stationarity[e]));
    } else {
      // at the bound the stationarity value is the bound multiplier,
      // which must be nonnegative
      residual = std::max(residual, std::max(0.0, -stationarity[e]));
    }
  }
  const Eigen::VectorXd conservation =
      sys.incidence * flows - sys.delta(inflow);
  residual = std::max(residual, conservation.cwiseAbs().maxCoeff());
  residual = std::max(residual, std::max(0.0, -flows.minCoeff()));
  return residual;
}

WardropSolution solve_static_wardrop(const Network& net, double inflow) {
  if (inflow < 0.0) {
    throw ValidationError("solve_static_wardrop: inflow must be nonnegative");
  }
  const IncidenceSystem sys = incidence_and_divergence(net);
  const int ne = net.edge_count();
  const int nm = static_cast<int>(sys.incidence.rows());
  const Eigen::VectorXd delta = sys.delta(inflow);

  std::vector<char> active(ne, 0);
  const int max_iter = 100 + 2 * ne;
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<int> free_edges;
    for (int e = 0; e < ne; ++e)
      if (!active[e]) free_edges.push_back(e);
    const int nf = static_cast<int>(free_edges.size());

    // Equality-constrained subproblem on the free edges.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + nm, nf + nm);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + nm);
    for (int i = 0; i < nf; ++i) {
      kkt(i, i) = net.latency_slopes[free_edges[i]];
      kkt.block(nf, i, nm, 1) = sys.incidence.col(free_edges[i]);
      kkt.block(i, nf, 1, nm) =
          sys.incidence.col(free_edges[i]).transpose();
    }
    rhs.tail(nm) = delta;

    Eigen::VectorXd sol;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (lu.isInvertible()) {
      sol = lu.solve(rhs);
    } else {
      sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      if ((kkt * sol - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm())) {
        throw NonConvergenceError(
            "solve_static_wardrop: degenerate working set");
      }
    }

    Eigen::VectorXd flows = Eigen::VectorXd::Zero(ne);
    for (int i = 0; i < nf; ++i) flows[free_edges[i]] = sol[i];
    const Eigen::VectorXd lam = sol.tail(nm);

    // Most negative free flow moves to the bound.
    int worst = -1;
    double worst_val = -1e-10;
    for (int i = 0; i < nf; ++i) {
      if (sol[i] < worst_val) {
        worst_val = sol[i];
        worst = free_edges[i];
      }
    }
    if (worst >= 0) {
      active[worst] = 1;
      continue;
    }

    // Most negative bound multiplier is released.
    const Eigen::VectorXd stationarity =
        net.latency_slopes.cwiseProduct(flows) +
        sys.incidence.transpose() * lam;
    int release = -1;
    double release_val = -1e-10;
    for (int e = 0; e < ne; ++e) {
      if (active[e] && stationarity[e] < release_val) {
        release_val = stationarity[e];
        release = e;
      }
    }
    if (release >= 0) {
      active[release] = 0;
      continue;
    }

    WardropSolution out;
    out.flows = flows.cwiseMax(0.0);
    out.multipliers = lam;
    out.kkt_residual = wardrop_kkt_residual(net, out.flows, lam, inflow);
    return out;
  }
  throw NonConvergenceError(
      "solve_static_wardrop: active-set iteration cap exceeded");
}

}  // namespace tvopt
