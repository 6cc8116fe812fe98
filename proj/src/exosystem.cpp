#include "tvopt/exosystem.hpp"

#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "tvopt/spectral.hpp"

namespace tvopt {

Exosystem linear_exosystem(const Eigen::Ref<const Eigen::MatrixXd>& S) {
  if (S.rows() != S.cols()) {
    throw DimensionError("linear_exosystem: S must be square");
  }
  Exosystem exo;
  exo.dim = static_cast<int>(S.rows());
  exo.jacobian_at_origin = S;
  exo.vector_field = [S = Eigen::MatrixXd(S)](const Eigen::VectorXd& theta) {
    return Eigen::VectorXd(S * theta);
  };
  exo.kind = ExosystemKind::linear;
  return exo;
}

Exosystem harmonic_bank(const std::vector<double>& frequencies,
                        bool include_constant) {
  std::set<double> seen;
  for (double w : frequencies) {
    if (w <= 0.0) {
      throw ValidationError("harmonic_bank: frequencies must be positive, got " +
                            std::to_string(w));
    }
    if (!seen.insert(w).second) {
      throw ValidationError("harmonic_bank: duplicate frequency " +
                            std::to_string(w));
    }
  }
  const int p =
      2 * static_cast<int>(frequencies.size()) + (include_constant ? 1 : 0);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    const int i = 2 * static_cast<int>(k);
    S(i, i + 1) = 1.0;
    S(i + 1, i) = -frequencies[k] * frequencies[k];
  }
  Exosystem exo = linear_exosystem(S);
  exo.kind = ExosystemKind::harmonic_bank;
  return exo;
}

Exosystem custom_exosystem(
    int dim, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> field) {
  if (dim <= 0) {
    throw ValidationError("custom_exosystem: dimension must be positive");
  }
  const Eigen::VectorXd at_zero = field(Eigen::VectorXd::Zero(dim));
  if (at_zero.size() != dim) {
    throw DimensionError("custom_exosystem: vector field has wrong dimension");
  }
  if (at_zero.norm() > 1e-12) {
    throw ValidationError(
        "custom_exosystem: the origin must be an equilibrium (|s(0)| = " +
        std::to_string(at_zero.norm()) + ")");
  }

  const double h = 1e-6;
  Eigen::MatrixXd jac(dim, dim);
  Eigen::VectorXd probe = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < dim; ++j) {
    probe[j] = h;
    const Eigen::VectorXd fp = field(probe);
    probe[j] = -h;
    const Eigen::VectorXd fm = field(probe);
    probe[j] = 0.0;
    jac.col(j) = (fp - fm) / (2.0 * h);
  }

  Exosystem exo;
  exo.dim = dim;
  exo.vector_field = std::move(field);
  exo.jacobian_at_origin = jac;
  exo.kind = ExosystemKind::custom;
  return exo;
}

bool check_neutral_spectrum(const Exosystem& exo, double tol) {
  if (tol <= 0.0) {
    throw ValidationError("check_neutral_spectrum: tol must be positive");
  }
  const SpectralReport spec = eigenvalues(exo.jacobian_at_origin);
  return spec.eigenvalues.real().cwiseAbs().maxCoeff() <= tol;
}

}  // namespace tvopt
