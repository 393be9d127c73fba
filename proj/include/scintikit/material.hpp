#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "scintikit/grid.hpp"

namespace scintikit {

/// Outcome of the structural checks on the mobility matrix.
struct MobilityCheck {
  double asymmetry = 0.0;        ///< max |M - M^T|
  double smallest_eigenvalue = 0.0;
  bool symmetric = false;
  bool positive_definite = false;
  bool pass() const { return symmetric && positive_definite; }
};

/// Material constants in rescaled units (k_B theta / e = 1, D = M).
struct MaterialParams {
  std::vector<int> charges;           ///< z
  Eigen::MatrixXd mobility;           ///< M, k x k
  std::vector<double> normalization;  ///< C_i > 0
  double permittivity = 1.0;          ///< epsilon_0
  Field background_charge;            ///< q*

  std::size_t species() const { return charges.size(); }
  /// Q* = integral of q*.
  double external_charge() const;
  bool mobility_diagonal() const;
  MobilityCheck check_mobility() const;
  /// Throws ValidationError when shapes, M symmetry/definiteness, C or
  /// epsilon_0 are invalid.
  void validate() const;
};

}  // namespace scintikit
