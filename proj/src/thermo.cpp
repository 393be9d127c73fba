#include "scintikit/thermo.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "scintikit/errors.hpp"
#include "scintikit/poisson.hpp"

namespace scintikit {

namespace {

void require_positive(const CarrierState& state, const char* where) {
  for (std::size_t i = 0; i < state.species(); ++i)
    for (std::size_t c = 0; c < state.densities[i].size(); ++c) {
      const double v = state.densities[i][c];
      if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << where << ": density of species " << i + 1 << " is " << v << " in cell " << c;
        throw DomainError(os.str());
      }
    }
}

double entropic_integral(const CarrierState& state, const MaterialParams& params) {
  double s = 0.0;
  for (std::size_t i = 0; i < state.species(); ++i) {
    const double ci = params.normalization[i];
    for (double n : state.densities[i].values()) s += n * (std::log(ci * n) - 1.0);
  }
  return s * state.grid().cell_volume();
}

}  // namespace

double scintillation_entropy(const CarrierState& state, const MaterialParams& params) {
  require_positive(state, "entropy");
  return -entropic_integral(state, params);
}

std::vector<Field> scintillation_potential(const CarrierState& state,
                                           const MaterialParams& params) {
  require_positive(state, "scintillation potential");
  std::vector<Field> mu;
  mu.reserve(state.species());
  for (std::size_t i = 0; i < state.species(); ++i) {
    Field m(state.potential.grid_ptr());
    const double z = params.charges[i];
    const double ci = params.normalization[i];
    for (std::size_t c = 0; c < m.size(); ++c)
      m[c] = z * state.potential[c] + std::log(ci * state.densities[i][c]);
    mu.push_back(std::move(m));
  }
  return mu;
}

std::vector<Field> densities_from_potential(const std::vector<Field>& mu, const Field& phi,
                                            const MaterialParams& params) {
  std::vector<Field> n;
  n.reserve(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    Field f(phi.grid_ptr());
    const double z = params.charges[i];
    for (std::size_t c = 0; c < f.size(); ++c) {
      const double x = mu[i][c] - z * phi[c];
      if (x > 700.0) {
        std::ostringstream os;
        os << "densities from potential: exponent " << x << " overflows in cell " << c;
        throw DomainError(os.str());
      }
      f[c] = std::exp(x) / params.normalization[i];
    }
    n.push_back(std::move(f));
  }
  return n;
}

double gibbs_energy(const CarrierState& state, const MaterialParams& params) {
  require_positive(state, "gibbs energy");
  double coupling = 0.0;
  for (std::size_t i = 0; i < state.species(); ++i) {
    const double z = params.charges[i];
    if (z == 0.0) continue;
    for (std::size_t c = 0; c < state.potential.size(); ++c)
      coupling += z * state.potential[c] * state.densities[i][c];
  }
  return coupling * state.grid().cell_volume() + entropic_integral(state, params);
}

double electrostatic_energy(const Field& potential, double permittivity) {
  return 0.5 * permittivity * gradient_norm_squared(potential);
}

double free_energy(const CarrierState& state, const MaterialParams& params) {
  require_positive(state, "free energy");
  return entropic_integral(state, params) +
         electrostatic_energy(state.potential, params.permittivity);
}

double relative_gibbs(const CarrierState& state, const CarrierState& stationary,
                      const MaterialParams& params) {
  require_positive(state, "relative gibbs");
  require_positive(stationary, "relative gibbs (stationary)");
  double s = 0.0;
  for (std::size_t i = 0; i < state.species(); ++i)
    for (std::size_t c = 0; c < state.densities[i].size(); ++c) {
      const double n = state.densities[i][c];
      const double m = stationary.densities[i][c];
      s += n * std::log(n / m) + m - n;
    }
  s *= state.grid().cell_volume();
  Field diff = state.potential;
  for (std::size_t c = 0; c < diff.size(); ++c) diff[c] -= stationary.potential[c];
  return s + electrostatic_energy(diff, params.permittivity);
}

Dissipation dissipation(const CarrierState& state, const MaterialParams& params,
                        const ReactionTensors& tensors) {
  const std::vector<Field> mu = scintillation_potential(state, params);
  const std::size_t k = state.species();
  const Grid& grid = state.grid();
  const auto& m = params.mobility;
  Dissipation d;

  std::vector<double> dmu(k), nbar(k);
  double tr = 0.0;
  for (const Face& f : grid.faces()) {
    for (std::size_t i = 0; i < k; ++i) {
      dmu[i] = mu[i][f.upper] - mu[i][f.lower];
      nbar[i] = 0.5 * (state.densities[i][f.lower] + state.densities[i][f.upper]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double mij = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (mij != 0.0) s += mij * nbar[j] * dmu[j] * dmu[i];
      }
    tr += f.area / f.distance * s;
  }
  d.transport = 0.5 * tr;

  if (!tensors.is_zero()) {
    std::vector<double> n(k), rate(k);
    double re = 0.0;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
      for (std::size_t i = 0; i < k; ++i) n[i] = state.densities[i][c];
      reaction_rate(n, tensors, rate);
      double p = 0.0;
      for (std::size_t i = 0; i < k; ++i) p += rate[i] * mu[i][c];
      if (p < 0.0) d.reaction_pairing_negative = true;
      re += p;
    }
    d.reaction = 0.5 * re * grid.cell_volume();
  }
  d.psi = d.transport + d.reaction;
  d.rate = 2.0 * d.psi;
  return d;
}

bool ThermoReport::finite() const {
  return std::isfinite(entropy) && std::isfinite(gibbs) && std::isfinite(electrostatic) &&
         std::isfinite(dissipation.psi);
}

ThermoReport thermo_report(const CarrierState& state, const MaterialParams& params,
                           const ReactionTensors& tensors, const CarrierState* stationary) {
  ThermoReport r;
  r.time = state.time;
  r.entropy = scintillation_entropy(state, params);
  r.gibbs = gibbs_energy(state, params);
  r.electrostatic = electrostatic_energy(state.potential, params.permittivity);
  r.relative_gibbs = stationary != nullptr ? relative_gibbs(state, *stationary, params)
                                           : std::numeric_limits<double>::quiet_NaN();
  r.dissipation = dissipation(state, params, tensors);
  return r;
}

}  // namespace scintikit
