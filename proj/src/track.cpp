#include "scintikit/track.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "scintikit/errors.hpp"
#include "scintikit/poisson.hpp"
#include "scintikit/thermo.hpp"

namespace scintikit {

double TrackLength::evaluate(double energy) const {
  if (value) return *value;
  return coefficient * std::pow(energy, exponent);
}

void ExcitationSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError(std::string("excitation: ") + name + " must be positive");
  };
  positive(energy, "energy");
  positive(track_radius, "track radius");
  positive(excitation_energy, "excitation energy");
  if (!track_length.value) positive(track_length.coefficient, "track length coefficient");
  positive(track_length.evaluate(energy), "track length");
  if (fractions.empty()) throw ValidationError("excitation: fractions are empty");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ValidationError("excitation: fractions must be nonnegative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "excitation: fractions sum to " << sum << ", not 1";
    throw ValidationError(os.str());
  }
  if (profile.kind == DepositionProfile::Kind::gaussian) positive(profile.width, "profile width");
  if (profile.floor && !(*profile.floor > 0.0))
    throw ValidationError("excitation: profile floor must be positive");
}

double mesoscopic_density(const ExcitationSpec& spec) {
  spec.validate();
  const double r = spec.track_radius;
  return spec.energy /
         (std::numbers::pi * r * r * spec.track_length.evaluate(spec.energy) *
          spec.excitation_energy);
}

Field deposition_profile(const DepositionProfile& profile,
                         const std::shared_ptr<const Grid>& grid) {
  if (profile.kind == DepositionProfile::Kind::uniform) return Field(grid, 1.0 / grid->volume());
  const double w2 = 2.0 * profile.width * profile.width;
  Field p = Field::sample(grid, [&](const Point& x) {
    double r2 = 0.0;
    for (int a = 0; a < grid->dimension(); ++a) {
      const double d = x[a] - profile.center[a];
      r2 += d * d;
    }
    return std::exp(-r2 / w2);
  });
  const double total = integrate_field(p);
  if (!(total > 0.0) || !std::isfinite(total))
    throw ValidationError("excitation: deposition profile cannot be normalized on the grid");
  for (double& v : p.values()) v /= total;
  return p;
}

std::vector<Field> initial_densities(const ExcitationSpec& spec,
                                     const std::shared_ptr<const Grid>& grid) {
  const double n = mesoscopic_density(spec);
  const double floor = spec.profile.floor.value_or(1e-8 * n);
  const Field p = deposition_profile(spec.profile, grid);
  const double vol = grid->volume();
  std::vector<Field> out;
  for (double f : spec.fractions) {
    const double mass = f * n;
    Field d(grid, floor);
    if (mass > floor * vol)
      for (std::size_t c = 0; c < d.size(); ++c) d[c] = (mass - floor * vol) * p[c] + floor;
    out.push_back(std::move(d));
  }
  return out;
}

Field external_charge_field(const ExcitationSpec& spec, std::span<const Field> densities,
                            std::span<const int> charges) {
  const auto& grid = densities.front().grid_ptr();
  double q = 0.0;
  if (spec.external_charge) {
    q = *spec.external_charge;
  } else {
    for (std::size_t i = 0; i < densities.size(); ++i)
      q -= charges[i] * integrate_field(densities[i]);
  }
  return Field(grid, q / grid->volume());
}

CarrierState initial_state(const ExcitationSpec& spec, const std::shared_ptr<const Grid>& grid,
                           const MaterialParams& params) {
  if (spec.fractions.size() != params.species())
    throw ValidationError("excitation: one fraction per species is required");
  CarrierState s;
  s.densities = initial_densities(spec, grid);
  s.potential = solve_poisson(potential_problem(s.densities, params, 1e-12)).potential;
  const double g = gibbs_energy(s, params);
  if (!std::isfinite(g)) throw ValidationError("excitation: G(n0, phi0) is not finite");
  return s;
}

}  // namespace scintikit
