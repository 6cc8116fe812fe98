#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tvopt/errors.hpp"

namespace tvopt {

// Seeded generator for all randomized inputs (matrices, initial conditions).
// Draws are produced by explicit mappings on top of mt19937_64 so that a seed
// reproduces the same stream bit-for-bit regardless of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the polar (Marsaglia) method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  Eigen::VectorXd vector_uniform(int n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  Eigen::MatrixXd matrix_uniform(int rows, int cols, double lo, double hi) {
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
    return m;
  }

  Eigen::MatrixXd matrix_normal(int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  // Uniform point in the closed ball of the given radius.
  Eigen::VectorXd ball(int dim, double radius) {
    Eigen::VectorXd dir(dim);
    double norm = 0.0;
    do {
      for (int i = 0; i < dim; ++i) dir[i] = normal();
      norm = dir.norm();
    } while (norm == 0.0);
    const double r = radius * std::pow(uniform(), 1.0 / dim);
    return (r / norm) * dir;
  }

  // Orthogonal factor of a random Gaussian matrix, sign-fixed so the
  // factorization is unique.
  Eigen::MatrixXd orthogonal(int n) {
    const Eigen::MatrixXd g = matrix_normal(n, n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i)
      if (r(i, i) < 0.0) q.col(i) = -q.col(i);
    return q;
  }

  // Symmetric matrix with the prescribed eigenvalues in a random orthogonal
  // eigenbasis.
  Eigen::MatrixXd symmetric_with_spectrum(const Eigen::VectorXd& eigs) {
    const int n = static_cast<int>(eigs.size());
    const Eigen::MatrixXd u = orthogonal(n);
    return u * eigs.asDiagonal() * u.transpose();
  }

  // Skew-symmetric generator T - T^T with T entries uniform in (0, 1).
  Eigen::MatrixXd skew(int n) {
    const Eigen::MatrixXd t = matrix_uniform(n, n, 0.0, 1.0);
    return t - t.transpose();
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tvopt
