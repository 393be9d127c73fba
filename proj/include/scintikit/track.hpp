#pragma once

#include <optional>
#include <vector>

#include "scintikit/grid.hpp"
#include "scintikit/material.hpp"

namespace scintikit {

/// Track length, either given directly or as L = a * E^b.
struct TrackLength {
  std::optional<double> value;
  double coefficient = 1.0;
  double exponent = 0.0;
  double evaluate(double energy) const;
};

struct DepositionProfile {
  enum class Kind { uniform, gaussian };
  Kind kind = Kind::uniform;
  Point center{0.0, 0.0};
  double width = 0.0;
  /// Positivity floor added to every cell; unset means 1e-8 * N.
  std::optional<double> floor;
};

/// Incoming radiation and how its excitation is shared among species.
struct ExcitationSpec {
  double energy = 1.0;             ///< E*
  double track_radius = 1.0;       ///< r
  TrackLength track_length;        ///< L(E*)
  double excitation_energy = 1.0;  ///< E_exc
  std::vector<double> fractions;   ///< f_i, summing to 1
  DepositionProfile profile;
  /// Q*. Unset: chosen to neutralize the initial carriers, Q* = -integral z.n0.
  std::optional<double> external_charge;

  /// Throws ValidationError on nonpositive scalars or bad fractions.
  void validate() const;
};

/// N = E* / (pi r^2 L(E*) E_exc).
double mesoscopic_density(const ExcitationSpec& spec);

/// Per-cell profile p with sum_c p_c * cell_volume = 1.
Field deposition_profile(const DepositionProfile& profile,
                         const std::shared_ptr<const Grid>& grid);

/// n0_i = (f_i N - floor * vol) p + floor, so every species carries mass
/// f_i N exactly and never drops below the floor. A species whose share
/// cannot cover the floor is set to the floor.
std::vector<Field> initial_densities(const ExcitationSpec& spec,
                                     const std::shared_ptr<const Grid>& grid);

/// Uniform q* carrying the configured (or neutralizing) Q*.
Field external_charge_field(const ExcitationSpec& spec, std::span<const Field> densities,
                            std::span<const int> charges);

/// Densities, phi0 from the Poisson problem with params.background_charge,
/// and a finiteness check of G(n0, phi0).
CarrierState initial_state(const ExcitationSpec& spec,
                           const std::shared_ptr<const Grid>& grid,
                           const MaterialParams& params);

}  // namespace scintikit
