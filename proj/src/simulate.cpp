#include "tvopt/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <vector>

namespace tvopt {

namespace {

constexpr double kDivergenceNorm = 1e150;

bool state_ok(const Eigen::VectorXd& y) {
  return y.allFinite() && y.lpNorm<Eigen::Infinity>() < kDivergenceNorm;
}

// Cubic Hermite interpolation on [t0, t0 + h] with endpoint derivatives.
Eigen::VectorXd hermite(const Eigen::VectorXd& y0, const Eigen::VectorXd& f0,
                        const Eigen::VectorXd& y1, const Eigen::VectorXd& f1,
                        double h, double theta) {
  const double t2 = theta * theta;
  const double t3 = t2 * theta;
  return (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + theta) * h * f0 +
         (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * f1;
}

struct GridWriter {
  explicit GridWriter(const IntegratorConfig& cfg) {
    const int m = std::max(cfg.samples, 2);
    times.resize(m);
    for (int i = 0; i < m; ++i) {
      times[i] = cfg.t_end * static_cast<double>(i) / (m - 1);
    }
  }

  // Fills grid points inside (t0, t0+h]; exact endpoint states are used when
  // a grid time coincides with the step end.
  void advance(double t0, double h, const Eigen::VectorXd& y0,
               const Eigen::VectorXd& f0, const Eigen::VectorXd& y1,
               const Eigen::VectorXd& f1) {
    const double t1 = t0 + h;
    const double snap = 1e-12 * std::max(1.0, std::abs(t1));
    while (cursor < static_cast<int>(times.size()) &&
           times[cursor] <= t1 + snap) {
      const double tg = times[cursor];
      if (std::abs(tg - t1) <= snap) {
        rows.push_back(y1);
      } else {
        rows.push_back(hermite(y0, f0, y1, f1, h, (tg - t0) / h));
      }
      ++cursor;
    }
  }

  std::vector<double> times;
  std::vector<Eigen::VectorXd> rows;
  int cursor = 0;
};

OdeSolution finish(GridWriter& grid, bool diverged, double blow_up_time) {
  OdeSolution sol;
  const int m = static_cast<int>(grid.rows.size());
  sol.times.resize(m);
  if (m > 0) {
    sol.states.resize(m, grid.rows[0].size());
    for (int i = 0; i < m; ++i) {
      sol.times[i] = grid.times[i];
      sol.states.row(i) = grid.rows[i].transpose();
    }
  } else {
    sol.states.resize(0, 0);
  }
  sol.diverged = diverged;
  sol.blow_up_time = blow_up_time;
  return sol;
}

OdeSolution run_rk4(const OdeField& field, const Eigen::VectorXd& y0,
                    const IntegratorConfig& cfg) {
  if (cfg.step <= 0.0) {
    throw ValidationError("integrate_ode: fixed step must be positive");
  }
  GridWriter grid(cfg);
  grid.rows.push_back(y0);
  grid.cursor = 1;

  Eigen::VectorXd y = y0;
  Eigen::VectorXd f = field(0.0, y);
  double t = 0.0;
  while (t < cfg.t_end - 1e-12 * cfg.t_end) {
    const double h = std::min(cfg.step, cfg.t_end - t);
    const Eigen::VectorXd k1 = f;
    const Eigen::VectorXd k2 = field(t + 0.5 * h, y + 0.5 * h * k1);
    const Eigen::VectorXd k3 = field(t + 0.5 * h, y + 0.5 * h * k2);
    const Eigen::VectorXd k4 = field(t + h, y + h * k3);
    const Eigen::VectorXd y1 = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!state_ok(y1)) {
      return finish(grid, true, t + h);
    }
    const Eigen::VectorXd f1 = field(t + h, y1);
    if (!f1.allFinite()) {
      return finish(grid, true, t + h);
    }
    grid.advance(t, h, y, f, y1, f1);
    t += h;
    y = y1;
    f = f1;
  }
  return finish(grid, false, std::numeric_limits<double>::quiet_NaN());
}

OdeSolution run_dopri5(const OdeField& field, const Eigen::VectorXd& y0,
                       const IntegratorConfig& cfg) {
  if (cfg.rtol <= 0.0 || cfg.atol <= 0.0) {
    throw ValidationError("integrate_ode: rtol and atol must be positive");
  }
  if (cfg.h_min > cfg.h_max) {
    throw ValidationError("integrate_ode: h_min must not exceed h_max");
  }

  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                      a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  GridWriter grid(cfg);
  grid.rows.push_back(y0);
  grid.cursor = 1;

  Eigen::VectorXd y = y0;
  Eigen::VectorXd k1 = field(0.0, y);
  if (!k1.allFinite()) {
    return finish(grid, true, 0.0);
  }
  double t = 0.0;
  double h = std::min(cfg.h_max, cfg.t_end / 100.0);
  h = std::max(h, cfg.h_min);

  while (t < cfg.t_end - 1e-12 * cfg.t_end) {
    h = std::min(h, cfg.t_end - t);
    const Eigen::VectorXd k2 = field(t + h / 5.0, y + h * (a21 * k1));
    const Eigen::VectorXd k3 =
        field(t + 3.0 * h / 10.0, y + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 =
        field(t + 4.0 * h / 5.0, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 = field(
        t + 8.0 * h / 9.0, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 =
        field(t + h,
              y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Eigen::VectorXd y1 =
        y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Eigen::VectorXd k7 = field(t + h, y1);

    bool stage_ok = k2.allFinite() && k3.allFinite() && k4.allFinite() &&
                    k5.allFinite() && k6.allFinite() && k7.allFinite() &&
                    y1.allFinite();
    double err = std::numeric_limits<double>::infinity();
    if (stage_ok) {
      const Eigen::VectorXd diff =
          h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double scale =
            cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
        const double r = diff[i] / scale;
        acc += r * r;
      }
      err = std::sqrt(acc / std::max<Eigen::Index>(y.size(), 1));
    }

    if (err <= 1.0) {
      if (!state_ok(y1)) {
        return finish(grid, true, t + h);
      }
      grid.advance(t, h, y, k1, y1, k7);
      t += h;
      y = y1;
      k1 = k7;  // first-same-as-last
      const double factor =
          std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
      h = std::min(h * factor, cfg.h_max);
    } else {
      const double factor = stage_ok
                                ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.5)
                                : 0.1;
      h *= factor;
      if (h < cfg.h_min) {
        throw StiffnessError(
            "integrate_ode: adaptive step size underflow at t = " +
            std::to_string(t));
      }
    }
  }
  return finish(grid, false, std::numeric_limits<double>::quiet_NaN());
}

}  // namespace

OdeSolution integrate_ode(const OdeField& field, const Eigen::VectorXd& y0,
                          const IntegratorConfig& cfg) {
  if (cfg.t_end <= 0.0) {
    throw ValidationError("integrate_ode: t_end must be positive");
  }
  if (cfg.samples < 2) {
    throw ValidationError("integrate_ode: need at least two output samples");
  }
  if (!y0.allFinite()) {
    throw ValidationError("integrate_ode: non-finite initial state");
  }
  return cfg.method == IntegratorMethod::rk4_fixed ? run_rk4(field, y0, cfg)
                                                   : run_dopri5(field, y0, cfg);
}

Trajectory integrate_coupled(
    const GradientFeedbackAlgorithm& alg, const Exosystem& exo,
    const LossModel& loss, const Eigen::VectorXd& z0,
    const Eigen::VectorXd& theta0, const IntegratorConfig& cfg,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& projection) {
  const int nc = alg.n_c;
  const int p = exo.dim;
  if (z0.size() != nc || theta0.size() != p) {
    throw DimensionError("integrate_coupled: initial state dimensions");
  }

  auto exploration = [&alg, &projection](const Eigen::VectorXd& z) {
    Eigen::VectorXd x = alg.G_c(z);
    if (projection) x = projection(x);
    return x;
  };

  OdeField field = [&](double, const Eigen::VectorXd& u) {
    const Eigen::VectorXd z = u.head(nc);
    const Eigen::VectorXd th = u.tail(p);
    const Eigen::VectorXd y = loss.gradient(exploration(z), th);
    Eigen::VectorXd du(nc + p);
    du.head(nc) = alg.F_c(z, y);
    du.tail(p) = exo.vector_field(th);
    return du;
  };

  Eigen::VectorXd u0(nc + p);
  u0 << z0, theta0;
  const OdeSolution sol = integrate_ode(field, u0, cfg);

  Trajectory traj;
  const int m = static_cast<int>(sol.times.size());
  traj.times = sol.times;
  traj.z.resize(m, nc);
  traj.theta.resize(m, p);
  traj.x.resize(m, loss.x_dim);
  traj.y.resize(m, loss.x_dim);
  for (int k = 0; k < m; ++k) {
    const Eigen::VectorXd z = sol.states.row(k).head(nc);
    const Eigen::VectorXd th = sol.states.row(k).tail(p);
    const Eigen::VectorXd x = exploration(z);
    traj.z.row(k) = z;
    traj.theta.row(k) = th;
    traj.x.row(k) = x;
    traj.y.row(k) = loss.gradient(x, th);
  }
  traj.diverged = sol.diverged;
  traj.blow_up_time = sol.blow_up_time;
  return traj;
}

Trajectory integrate_parameter_feedback(const ParameterFeedbackMap& hc,
                                        const Exosystem& exo,
                                        const LossModel& loss,
                                        const Eigen::VectorXd& theta0,
                                        const IntegratorConfig& cfg) {
  if (theta0.size() != exo.dim) {
    throw DimensionError("integrate_parameter_feedback: theta0 dimension");
  }
  OdeField field = [&exo](double, const Eigen::VectorXd& th) {
    return exo.vector_field(th);
  };
  const OdeSolution sol = integrate_ode(field, theta0, cfg);

  Trajectory traj;
  const int m = static_cast<int>(sol.times.size());
  traj.times = sol.times;
  traj.theta = sol.states;
  traj.z.resize(m, 0);
  traj.x.resize(m, loss.x_dim);
  traj.y.resize(m, loss.x_dim);
  for (int k = 0; k < m; ++k) {
    const Eigen::VectorXd th = traj.theta.row(k);
    const Eigen::VectorXd x = hc.apply(th);
    traj.x.row(k) = x;
    traj.y.row(k) = loss.gradient(x, th);
  }
  traj.diverged = sol.diverged;
  traj.blow_up_time = sol.blow_up_time;
  return traj;
}

TrackingMetrics tracking_metrics(const Trajectory& traj,
                                 double tail_fraction) {
  if (traj.times.size() == 0) {
    throw ValidationError("tracking_metrics: empty trajectory");
  }
  if (tail_fraction <= 0.0 || tail_fraction > 1.0) {
    throw ValidationError("tracking_metrics: tail_fraction must be in (0, 1]");
  }

  const int m = static_cast<int>(traj.times.size());
  Eigen::VectorXd ynorm(m);
  for (int k = 0; k < m; ++k) ynorm[k] = traj.y.row(k).norm();

  const double t0 = traj.times[0];
  const double t1 = traj.times[m - 1];
  const double t_tail = t1 - tail_fraction * (t1 - t0);

  TrackingMetrics out;
  const bool has_gap = traj.z.cols() == traj.theta.cols() && traj.z.cols() > 0;
  out.observer_gap_tail_sup =
      has_gap ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < m; ++k) {
    if (traj.times[k] < t_tail) continue;
    out.y_tail_sup = std::max(out.y_tail_sup, ynorm[k]);
    if (has_gap) {
      out.observer_gap_tail_sup =
          std::max(out.observer_gap_tail_sup,
                   (traj.z.row(k) - traj.theta.row(k)).norm());
    }
  }

  // Log-linear fit of |y| over its decaying segment: prefer the peaks of the
  // oscillation envelope, cut once the signal reaches the numerical floor.
  const double peak = ynorm.maxCoeff();
  const double floor = 1e-12 * peak;
  int cut = m;
  for (int k = 0; k < m; ++k) {
    if (ynorm[k] <= floor) {
      cut = k;
      break;
    }
  }
  std::vector<int> pts;
  for (int k = 0; k < cut; ++k) {
    const bool left_ok = (k == 0) || ynorm[k] >= ynorm[k - 1];
    const bool right_ok = (k == cut - 1) || ynorm[k] >= ynorm[k + 1];
    if (left_ok && right_ok && ynorm[k] > floor) pts.push_back(k);
  }
  if (pts.size() < 3) {
    pts.clear();
    for (int k = 0; k < cut; ++k)
      if (ynorm[k] > floor) pts.push_back(k);
  }
  if (pts.size() >= 2) {
    double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
    for (int k : pts) {
      const double t = traj.times[k];
      const double l = std::log(ynorm[k]);
      st += t;
      sl += l;
      stt += t * t;
      stl += t * l;
    }
    const double n = static_cast<double>(pts.size());
    const double denom = n * stt - st * st;
    if (denom > 0.0) {
      out.decay_rate_estimate = -(n * stl - st * sl) / denom;
    }
  }
  return out;
}

void write_csv(const Trajectory& traj, std::ostream& out) {
  auto emit_header = [&out](const char* base, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) {
      out << ',' << base << '_' << (i + 1);
    }
  };
  out << 't';
  emit_header("theta", traj.theta.cols());
  emit_header("z", traj.z.cols());
  emit_header("x", traj.x.cols());
  emit_header("y", traj.y.cols());
  out << ",y_norm\n";

  char buf[40];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (Eigen::Index k = 0; k < traj.times.size(); ++k) {
    emit(traj.times[k]);
    for (Eigen::Index j = 0; j < traj.theta.cols(); ++j) {
      out << ',';
      emit(traj.theta(k, j));
    }
    for (Eigen::Index j = 0; j < traj.z.cols(); ++j) {
      out << ',';
      emit(traj.z(k, j));
    }
    for (Eigen::Index j = 0; j < traj.x.cols(); ++j) {
      out << ',';
      emit(traj.x(k, j));
    }
    for (Eigen::Index j = 0; j < traj.y.cols(); ++j) {
      out << ',';
      emit(traj.y(k, j));
    }
    out << ',';
    emit(traj.y.row(k).norm());
    out << '\n';
  }
}

void write_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream file(path);
  if (!file) {
    throw ValidationError("write_csv: cannot open " + path);
  }
  write_csv(traj, file);
}

}  // namespace tvopt
