#include "scintikit/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "scintikit/errors.hpp"

namespace scintikit {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void remove_mean(std::span<double> v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

}  // namespace

void apply_stiffness(const Grid& grid, double permittivity, std::span<const double> in,
                     std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const Face& f : grid.faces()) {
    const double g = permittivity * f.area / f.distance;
    const double flux = g * (in[f.lower] - in[f.upper]);
    out[f.lower] += flux;
    out[f.upper] -= flux;
  }
}

double gradient_norm_squared(const Field& f) {
  double s = 0.0;
  for (const Face& face : f.grid().faces()) {
    const double d = f[face.upper] - f[face.lower];
    s += face.area / face.distance * d * d;
  }
  return s;
}

std::vector<double> projected_cg(const LinearOperator& op, std::span<const double> rhs,
                                 std::span<double> x, double tolerance,
                                 std::size_t max_iterations, double roundoff_scale) {
  const std::size_t n = rhs.size();
  std::vector<double> b(rhs.begin(), rhs.end());
  remove_mean(b);
  remove_mean(x);
  std::vector<double> history;
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    history.push_back(0.0);
    return history;
  }

  std::vector<double> r(n), p(n), ap(n);
  op(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  remove_mean(r);
  p = r;
  double rr = dot(r, r);
  history.push_back(std::sqrt(rr) / bnorm);
  auto done = [&] {
    return history.back() <= tolerance ||
           history.back() * bnorm <= roundoff_scale * std::sqrt(dot(x, x));
  };
  for (std::size_t it = 0; it < max_iterations && !done(); ++it) {
    op(p, ap);
    remove_mean(ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    // Recompute the true residual now and then to keep drift out of the
    // stopping test.
    if ((it + 1) % 50 == 0) {
      op(x, ap);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
      remove_mean(r);
    }
    const double rr_new = dot(r, r);
    history.push_back(std::sqrt(rr_new) / bnorm);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  remove_mean(x);
  return history;
}

PoissonSolution solve_poisson(const PoissonProblem& problem, const Field* initial_guess) {
  const Field& rho = problem.rho;
  const Grid& grid = rho.grid();
  const std::size_t n = grid.cell_count();

  const double total = integrate_field(rho);
  double l1 = 0.0;
  for (double v : rho.values()) l1 += std::abs(v);
  l1 *= grid.cell_volume();
  const double scale = std::max(l1, problem.charge_scale);
  if (std::abs(total) > problem.compatibility_tolerance * scale) {
    std::ostringstream os;
    os << "poisson: right-hand side integrates to " << total
       << ", violating the zero-flux compatibility condition";
    throw CompatibilityError(os.str(), total);
  }

  std::vector<double> b(n);
  for (std::size_t c = 0; c < n; ++c) b[c] = rho[c] * grid.cell_volume();
  std::vector<double> x(n, 0.0);
  if (initial_guess != nullptr && initial_guess->size() == n)
    x.assign(initial_guess->values().begin(), initial_guess->values().end());

  const double eps = problem.permittivity;
  auto op = [&grid, eps](std::span<const double> in, std::span<double> out) {
    apply_stiffness(grid, eps, in, out);
  };
  const std::size_t max_it =
      problem.max_iterations > 0 ? problem.max_iterations : 4 * n + 100;
  // Gershgorin bound on ||A||_2; the residual of A x carries round-off of
  // about eps * ||A|| ||x|| per entry.
  std::vector<double> row(n, 0.0);
  for (const Face& f : grid.faces()) {
    const double g = 2.0 * eps * f.area / f.distance;
    row[f.lower] += g;
    row[f.upper] += g;
  }
  const double norm_a = n > 0 ? *std::max_element(row.begin(), row.end()) : 0.0;
  const double roundoff_scale =
      16.0 * std::numeric_limits<double>::epsilon() * std::sqrt(static_cast<double>(n)) * norm_a;

  PoissonSolution out;
  out.residual_history = projected_cg(op, b, x, problem.tolerance, max_it, roundoff_scale);
  out.iterations = out.residual_history.size() - 1;
  out.relative_residual = out.residual_history.back();
  remove_mean(b);
  const double floor = roundoff_scale * std::sqrt(dot(x, x)) / std::sqrt(dot(b, b));
  out.roundoff_limited = out.relative_residual > problem.tolerance;
  if (out.roundoff_limited && out.relative_residual > floor) {
    std::ostringstream os;
    os << "poisson: conjugate gradients stopped at relative residual "
       << out.relative_residual << " after " << out.iterations << " iterations";
    throw IterationError(os.str(), out.residual_history);
  }
  out.potential = Field(rho.grid_ptr(), std::move(x));
  return out;
}

double electric_charge(const CarrierState& state, const MaterialParams& params) {
  double q = params.external_charge();
  for (std::size_t i = 0; i < state.species(); ++i)
    q += params.charges[i] * integrate_field(state.densities[i]);
  return q;
}

ChargeDensity charge_density(std::span<const Field> densities,
                             const MaterialParams& params) {
  const Field& qs = params.background_charge;
  ChargeDensity out{qs, 0.0};
  double scale = 0.0;
  for (double v : qs.values()) scale += std::abs(v);
  for (std::size_t i = 0; i < densities.size(); ++i) {
    const int z = params.charges[i];
    if (z == 0) continue;
    for (std::size_t c = 0; c < out.rho.size(); ++c) {
      out.rho[c] += z * densities[i][c];
      scale += std::abs(z) * densities[i][c];
    }
  }
  out.scale = scale * qs.grid().cell_volume();
  return out;
}

PoissonProblem potential_problem(std::span<const Field> densities,
                                 const MaterialParams& params, double tolerance) {
  ChargeDensity cd = charge_density(densities, params);
  PoissonProblem p;
  p.permittivity = params.permittivity;
  p.rho = std::move(cd.rho);
  p.charge_scale = cd.scale;
  p.tolerance = tolerance;
  return p;
}

}  // namespace scintikit
