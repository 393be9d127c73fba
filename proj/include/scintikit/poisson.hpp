#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "scintikit/grid.hpp"
#include "scintikit/material.hpp"

namespace scintikit {

/// -eps0 * Laplace(phi) = rho on the grid with zero-flux boundaries and the
/// gauge mean(phi) = 0.
struct PoissonProblem {
  double permittivity = 1.0;
  Field rho;
  /// Magnitude used to judge the compatibility condition. Zero means
  /// ||rho||_L1; callers assembling rho from cancelling parts pass the L1
  /// norm of the parts so round-off in a neutral state is not rejected.
  double charge_scale = 0.0;
  double compatibility_tolerance = 1e-10;
  /// Relative residual target ||b - A phi||_2 <= tolerance * ||b||_2. A
  /// nearly neutral rho makes ||b|| tiny next to ||A|| ||phi||; the solve
  /// then also stops at the round-off level of A phi.
  double tolerance = 1e-10;
  std::size_t max_iterations = 0;  ///< 0 selects 4 * cells + 100
};

struct PoissonSolution {
  Field potential;
  std::vector<double> residual_history;  ///< relative residual per iteration
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool roundoff_limited = false;  ///< stopped at the round-off floor
};

/// Projected conjugate gradients. Throws CompatibilityError if the
/// integral of rho violates the Neumann compatibility condition and
/// IterationError if the residual target is not reached.
PoissonSolution solve_poisson(const PoissonProblem& problem,
                              const Field* initial_guess = nullptr);

/// Q = Q* + integral of z . n (elementary charge 1).
double electric_charge(const CarrierState& state, const MaterialParams& params);

/// rho = q* + z . n and the L1 norm of its constituents.
struct ChargeDensity {
  Field rho;
  double scale = 0.0;
};
ChargeDensity charge_density(std::span<const Field> densities,
                             const MaterialParams& params);

/// Poisson problem for the potential generated by the given densities.
PoissonProblem potential_problem(std::span<const Field> densities,
                                 const MaterialParams& params, double tolerance);

/// out = A * in with A the volume-integrated two-point-flux operator
/// (A phi)_a = sum_faces eps0 * area / distance * (phi_a - phi_b).
void apply_stiffness(const Grid& grid, double permittivity, std::span<const double> in,
                     std::span<double> out);

/// sum over faces of area * distance * ((f_b - f_a) / distance)^2, the
/// discrete ||grad f||^2_L2.
double gradient_norm_squared(const Field& f);

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

/// CG on the zero-sum subspace for an operator symmetric and positive
/// definite there. rhs is projected; x is the initial guess and result.
/// Returns the relative residual history; the last entry is the final one.
/// Iteration also stops once ||r||_2 <= roundoff_scale * ||x||_2, the
/// floor below which the residual of A x cannot be resolved.
std::vector<double> projected_cg(const LinearOperator& op, std::span<const double> rhs,
                                 std::span<double> x, double tolerance,
                                 std::size_t max_iterations, double roundoff_scale = 0.0);

}  // namespace scintikit
