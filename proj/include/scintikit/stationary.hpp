#pragma once

#include <string>
#include <vector>

#include "scintikit/grid.hpp"
#include "scintikit/kinetics.hpp"
#include "scintikit/material.hpp"

namespace scintikit {

struct StationaryOptions {
  std::vector<double> c_direction;  ///< empty means all ones
  double normalization = 1.0;       ///< s in c = s * direction (before any tilt)
  double tolerance = 1e-10;
  std::size_t max_iterations = 100;
  int max_halvings = 30;
};

/// How the charge constraint fixes c.
enum class ConstraintMode {
  none,   ///< every z_i = 0: c = s * direction
  scale,  ///< charged species share one sign: c = e^p s * direction
  tilt,   ///< mixed signs: c_i = s * direction_i * e^(p z_i)
};

/// n_inf_i = c_i exp(-z_i phi_inf) with -eps0 Lap phi_inf = q* + z.n_inf,
/// zero-mean phi_inf and Q* + integral z.n_inf = 0.
struct StationaryState {
  std::vector<double> c;
  Field potential;
  std::vector<Field> densities;
  double phi_max = 0.0;             ///< Phi_inf = ||z phi_inf||_inf
  double residual = 0.0;            ///< final relative Poisson residual
  double charge_residual = 0.0;     ///< |Q* + integral z.n_inf|
  double potential_residual = 0.0;  ///< ||mu(n_inf, phi_inf)||_inf
  double potential_spread = 0.0;    ///< max_i (max mu_i - min mu_i)
  double reaction_residual = 0.0;   ///< ||K(n_inf) n_inf||_inf
  std::size_t iterations = 0;
  ConstraintMode mode = ConstraintMode::none;
  std::vector<double> residual_history;

  CarrierState as_state() const;
};

/// Outer charge root-find plus damped Newton on the bordered semilinear
/// Poisson system. Throws InfeasibleError when no c along the configured
/// family satisfies the charge constraint, IterationError on non-convergence.
StationaryState solve_stationary(const MaterialParams& params, const ReactionTensors& tensors,
                                 const StationaryOptions& options = {});

struct AprioriBounds {
  double c_bound = 0.0;  ///< K_inf e^Phi (1 + |Q*|)
  double n_bound = 0.0;  ///< K_inf e^(2 Phi) (1 + |Q*|)
  double c_norm = 0.0;   ///< ||c||_inf
  double n_norm = 0.0;   ///< ||n_inf||_Linf
  bool pass = false;
  std::string norm = "max norm";
};

AprioriBounds apriori_bounds(const StationaryState& stationary, const ReactionBounds& bounds,
                             double external_charge);

std::string to_string(ConstraintMode mode);

}  // namespace scintikit
