#include "scintikit/material.hpp"

#include <cmath>
#include <sstream>

#include "scintikit/errors.hpp"

namespace scintikit {

double MaterialParams::external_charge() const {
  return integrate_field(background_charge);
}

bool MaterialParams::mobility_diagonal() const {
  for (Eigen::Index i = 0; i < mobility.rows(); ++i)
    for (Eigen::Index j = 0; j < mobility.cols(); ++j)
      if (i != j && mobility(i, j) != 0.0) return false;
  return true;
}

MobilityCheck MaterialParams::check_mobility() const {
  MobilityCheck out;
  if (mobility.rows() != mobility.cols() || mobility.rows() == 0) return out;
  out.asymmetry = (mobility - mobility.transpose()).cwiseAbs().maxCoeff();
  out.symmetric = out.asymmetry <= 1e-14;
  const Eigen::MatrixXd sym = 0.5 * (mobility + mobility.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  out.smallest_eigenvalue = eig.eigenvalues().minCoeff();
  out.positive_definite = out.smallest_eigenvalue > 0.0;
  return out;
}

void MaterialParams::validate() const {
  const std::size_t k = species();
  if (k == 0) throw ValidationError("material: at least one species is required");
  if (static_cast<std::size_t>(mobility.rows()) != k ||
      static_cast<std::size_t>(mobility.cols()) != k)
    throw ValidationError("material: mobility matrix must be k x k");
  if (normalization.size() != k)
    throw ValidationError("material: one normalization constant per species");
  for (double c : normalization)
    if (!(c > 0.0) || !std::isfinite(c))
      throw ValidationError("material: normalization constants must be positive");
  if (!(permittivity > 0.0))
    throw ValidationError("material: permittivity must be positive");
  const MobilityCheck m = check_mobility();
  if (!m.symmetric) {
    std::ostringstream os;
    os << "material: mobility matrix is not symmetric (max |M - M^T| = "
       << m.asymmetry << ")";
    throw ValidationError(os.str());
  }
  if (!m.positive_definite) {
    std::ostringstream os;
    os << "material: mobility matrix is not positive definite (smallest eigenvalue "
       << m.smallest_eigenvalue << ")";
    throw ValidationError(os.str());
  }
  if (background_charge.size() == 0)
    throw ValidationError("material: background charge field is not set");
}

}  // namespace scintikit
