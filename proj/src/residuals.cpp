#include <cmath>

#include "scintikit/errors.hpp"
#include "scintikit/evolve.hpp"
#include "scintikit/thermo.hpp"

namespace scintikit {

namespace {

void require_snapshots(std::span<const CarrierState> s) {
  if (s.size() < 3) throw ValidationError("residual: at least 3 snapshots are required");
}

/// Per-face (S grad mu)_i with S = M N and arithmetic face averages of n.
struct FaceFluxes {
  std::vector<double> values;  // face-major, k per face
};

FaceFluxes face_fluxes(const CarrierState& s, const std::vector<Field>& mu,
                       const MaterialParams& params) {
  const std::size_t k = s.species();
  const auto faces = s.grid().faces();
  FaceFluxes out;
  out.values.assign(faces.size() * k, 0.0);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (std::size_t i = 0; i < k; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double mij =
            params.mobility(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (mij == 0.0) continue;
        const double nbar = 0.5 * (s.densities[j][face.lower] + s.densities[j][face.upper]);
        sum += mij * nbar * (mu[j][face.upper] - mu[j][face.lower]) / face.distance;
      }
      out.values[f * k + i] = sum;
    }
  }
  return out;
}

double trapezoid(std::span<const CarrierState> s, const std::vector<double>& y) {
  double total = 0.0;
  for (std::size_t m = 1; m < s.size(); ++m)
    total += 0.5 * (s[m].time - s[m - 1].time) * (y[m] + y[m - 1]);
  return total;
}

}  // namespace

double weak_residual(std::span<const CarrierState> snapshots, const WeakTestFunction& v,
                     const MaterialParams& params, const ReactionTensors& tensors) {
  require_snapshots(snapshots);
  const Grid& grid = snapshots.front().grid();
  const std::size_t k = snapshots.front().species();
  const std::size_t cells = grid.cell_count();
  const double vol = grid.cell_volume();
  const auto faces = grid.faces();

  auto pairing = [&](const CarrierState& s) {
    double total = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      const auto val = v.value(grid.center(c), s.time);
      for (std::size_t i = 0; i < k; ++i) total += val[i] * s.densities[i][c];
    }
    return total * vol;
  };

  std::vector<double> integrand;
  std::vector<double> n(k), rate(k);
  for (const CarrierState& s : snapshots) {
    std::vector<std::vector<double>> val(cells);
    for (std::size_t c = 0; c < cells; ++c) val[c] = v.value(grid.center(c), s.time);
    double cell_terms = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      const auto dv = v.time_derivative(grid.center(c), s.time);
      for (std::size_t i = 0; i < k; ++i) n[i] = s.densities[i][c];
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) sum -= n[i] * dv[i];
      if (!tensors.is_zero()) {
        reaction_rate(n, tensors, rate);
        for (std::size_t i = 0; i < k; ++i) sum += rate[i] * val[c][i];
      }
      cell_terms += sum;
    }
    const auto mu = scintillation_potential(s, params);
    const FaceFluxes flux = face_fluxes(s, mu, params);
    double face_terms = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const Face& face = faces[f];
      for (std::size_t i = 0; i < k; ++i) {
        const double gv = (val[face.upper][i] - val[face.lower][i]) / face.distance;
        face_terms += face.area * face.distance * flux.values[f * k + i] * gv;
      }
    }
    integrand.push_back(cell_terms * vol + face_terms);
  }
  const double boundary = pairing(snapshots.back()) - pairing(snapshots.front());
  return std::abs(boundary + trapezoid(snapshots, integrand));
}

double renormalized_residual(std::span<const CarrierState> snapshots,
                             const Renormalization& xi, const ScalarTestFunction& psi,
                             const MaterialParams& params, const ReactionTensors& tensors) {
  require_snapshots(snapshots);
  const Grid& grid = snapshots.front().grid();
  const std::size_t k = snapshots.front().species();
  const std::size_t cells = grid.cell_count();
  const double vol = grid.cell_volume();
  const auto faces = grid.faces();

  std::vector<double> n(k), rate(k);
  auto load = [&](const CarrierState& s, std::size_t c) {
    for (std::size_t i = 0; i < k; ++i) n[i] = s.densities[i][c];
  };
  auto boundary_term = [&](const CarrierState& s) {
    double total = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      load(s, c);
      total += xi.value(n) * psi.value(grid.center(c), s.time);
    }
    return total * vol;
  };

  std::vector<double> integrand;
  std::vector<double> nbar(k);
  for (const CarrierState& s : snapshots) {
    std::vector<double> ps(cells);
    for (std::size_t c = 0; c < cells; ++c) ps[c] = psi.value(grid.center(c), s.time);
    double cell_terms = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      load(s, c);
      double sum = -xi.value(n) * psi.time_derivative(grid.center(c), s.time);
      if (!tensors.is_zero()) {
        reaction_rate(n, tensors, rate);
        const auto g = xi.gradient(n);
        double dot = 0.0;
        for (std::size_t i = 0; i < k; ++i) dot += rate[i] * g[i];
        sum += dot * ps[c];
      }
      cell_terms += sum;
    }
    const auto mu = scintillation_potential(s, params);
    const FaceFluxes flux = face_fluxes(s, mu, params);
    double face_terms = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const Face& face = faces[f];
      for (std::size_t i = 0; i < k; ++i)
        nbar[i] = 0.5 * (s.densities[i][face.lower] + s.densities[i][face.upper]);
      const auto g = xi.gradient(nbar);
      const auto h = xi.hessian(nbar);
      const double pbar = 0.5 * (ps[face.lower] + ps[face.upper]);
      const double gpsi = (ps[face.upper] - ps[face.lower]) / face.distance;
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const double si = flux.values[f * k + i];
        double hn = 0.0;
        for (std::size_t j = 0; j < k; ++j)
          hn += h[i * k + j] * (s.densities[j][face.upper] - s.densities[j][face.lower]) /
                face.distance;
        sum += si * (hn * pbar + g[i] * gpsi);
      }
      face_terms += face.area * face.distance * sum;
    }
    integrand.push_back(cell_terms * vol + face_terms);
  }
  const double boundary = boundary_term(snapshots.back()) - boundary_term(snapshots.front());
  return std::abs(boundary + trapezoid(snapshots, integrand));
}

}  // namespace scintikit
