#pragma once

#include <vector>

#include "scintikit/grid.hpp"
#include "scintikit/kinetics.hpp"
#include "scintikit/material.hpp"

namespace scintikit {

/// E(n) = -integral of sum_i n_i (log C_i n_i - 1). Throws DomainError on a
/// nonpositive density.
double scintillation_entropy(const CarrierState& state, const MaterialParams& params);

/// mu_i = z_i phi + log(C_i n_i), per cell.
std::vector<Field> scintillation_potential(const CarrierState& state,
                                           const MaterialParams& params);

/// n_i = exp(mu_i - z_i phi) / C_i. Throws DomainError when an exponent
/// exceeds 700.
std::vector<Field> densities_from_potential(const std::vector<Field>& mu, const Field& phi,
                                            const MaterialParams& params);

/// G = integral of phi z.n + sum_i n_i (log C_i n_i - 1).
double gibbs_energy(const CarrierState& state, const MaterialParams& params);

/// 1/2 eps0 ||grad phi||^2 with the face-difference gradient.
double electrostatic_energy(const Field& potential, double permittivity);

/// Entropic part plus 1/2 eps0 ||grad phi||^2: the functional whose decrease
/// the time stepper monitors when no stationary state is known.
double free_energy(const CarrierState& state, const MaterialParams& params);

/// G(n|n_inf) = integral of sum_i n_i log(n_i / ninf_i) + ninf_i - n_i
///              + 1/2 eps0 ||grad(phi - phi_inf)||^2.
double relative_gibbs(const CarrierState& state, const CarrierState& stationary,
                      const MaterialParams& params);

struct Dissipation {
  double transport = 0.0;  ///< 1/2 integral of (M N grad mu) . grad mu
  double reaction = 0.0;   ///< 1/2 integral of K(n) n . mu
  double psi = 0.0;        ///< transport + reaction
  double rate = 0.0;       ///< D = 2 psi
  /// K(n) n . mu < 0 somewhere, so psi >= 0 is not guaranteed.
  bool reaction_pairing_negative = false;
};

/// Conjugate dissipation with face differences of mu and arithmetic face
/// averages of n in the mobility weighting.
Dissipation dissipation(const CarrierState& state, const MaterialParams& params,
                        const ReactionTensors& tensors);

struct ThermoReport {
  double time = 0.0;
  double entropy = 0.0;
  double gibbs = 0.0;
  double relative_gibbs = 0.0;  ///< NaN without a stationary state
  double electrostatic = 0.0;
  Dissipation dissipation;
  bool finite() const;
};

ThermoReport thermo_report(const CarrierState& state, const MaterialParams& params,
                           const ReactionTensors& tensors,
                           const CarrierState* stationary = nullptr);

}  // namespace scintikit
