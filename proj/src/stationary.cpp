#include "scintikit/stationary.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "scintikit/errors.hpp"
#include "scintikit/poisson.hpp"

namespace scintikit {

std::string to_string(ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::none: return "none";
    case ConstraintMode::scale: return "scale";
    case ConstraintMode::tilt: return "tilt";
  }
  return "unknown";
}

CarrierState StationaryState::as_state() const {
  CarrierState s;
  s.densities = densities;
  s.potential = potential;
  return s;
}

namespace {

double safe_exp(double x) {
  if (x > 700.0) throw DomainError("stationary: exponent overflow in the Boltzmann factor");
  return std::exp(x);
}

struct Problem {
  const MaterialParams& params;
  const Grid& grid;
  std::vector<double> base;   // s * direction_i
  std::vector<double> alpha;  // exponent weights of p
  double q_star = 0.0;

  std::size_t k() const { return params.species(); }

  double coefficient(std::size_t i, double p) const { return base[i] * safe_exp(p * alpha[i]); }

  /// Q* + integral of z.n for the given phi and p, and its p-derivative.
  std::pair<double, double> charge(const std::vector<double>& phi, double p) const {
    double h = q_star, dh = 0.0;
    const double vol = grid.cell_volume();
    for (std::size_t i = 0; i < k(); ++i) {
      const int z = params.charges[i];
      if (z == 0) continue;
      double integral = 0.0;
      for (double v : phi) integral += safe_exp(-z * v);
      integral *= vol;
      const double ci = coefficient(i, p);
      h += z * ci * integral;
      dh += z * alpha[i] * ci * integral;
    }
    return {h, dh};
  }

  /// Root of the charge constraint in p for fixed phi.
  double solve_p(const std::vector<double>& phi, ConstraintMode mode, double p0) const {
    if (mode == ConstraintMode::none) return 0.0;
    if (mode == ConstraintMode::scale) {
      // Q* + e^p S = 0 with S the unscaled charged integral.
      const double s = charge(phi, 0.0).first - q_star;
      const double ratio = -q_star / s;
      if (!(ratio > 0.0) || !std::isfinite(ratio)) {
        std::ostringstream os;
        os << "stationary: the charge constraint Q* + integral z.n = 0 has no solution with "
              "positive c (Q* = "
           << q_star << ", charged species of one sign)";
        throw InfeasibleError(os.str());
      }
      return std::log(ratio);
    }
    // Tilt: h increases strictly in p; bracket and bisect with Newton.
    double lo = p0 - 1.0, hi = p0 + 1.0;
    for (int it = 0; it < 200 && charge(phi, lo).first > 0.0; ++it) lo -= (hi - lo);
    for (int it = 0; it < 200 && charge(phi, hi).first < 0.0; ++it) hi += (hi - lo);
    if (charge(phi, lo).first > 0.0 || charge(phi, hi).first < 0.0)
      throw InfeasibleError("stationary: cannot bracket the charge constraint");
    double p = std::clamp(p0, lo, hi);
    for (int it = 0; it < 200; ++it) {
      const auto [h, dh] = charge(phi, p);
      if (std::abs(h) <= 1e-15 * (1.0 + std::abs(q_star))) break;
      if (h > 0.0) hi = p;
      else lo = p;
      double next = p - h / dh;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (next == p || hi - lo <= 1e-16 * (1.0 + std::abs(p))) break;
      p = next;
    }
    return p;
  }

  /// F = A phi - vol (q* + z.n(phi, p)).
  std::vector<double> residual(const std::vector<double>& phi, double p) const {
    std::vector<double> f(phi.size());
    apply_stiffness(grid, params.permittivity, phi, f);
    const double vol = grid.cell_volume();
    for (std::size_t c = 0; c < phi.size(); ++c) {
      double rho = params.background_charge[c];
      for (std::size_t i = 0; i < k(); ++i) {
        const int z = params.charges[i];
        if (z != 0) rho += z * coefficient(i, p) * safe_exp(-z * phi[c]);
      }
      f[c] -= vol * rho;
    }
    return f;
  }

  double scale(const std::vector<double>& phi, double p) const {
    double m = 0.0;
    for (std::size_t c = 0; c < phi.size(); ++c) {
      double s = std::abs(params.background_charge[c]);
      for (std::size_t i = 0; i < k(); ++i) {
        const int z = params.charges[i];
        if (z != 0) s += std::abs(z) * coefficient(i, p) * safe_exp(-z * phi[c]);
      }
      m = std::max(m, s);
    }
    return grid.cell_volume() * std::max(m, 1.0);
  }
};

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

StationaryState solve_stationary(const MaterialParams& params, const ReactionTensors& tensors,
                                 const StationaryOptions& options) {
  params.validate();
  const std::size_t k = params.species();
  const Grid& grid = params.background_charge.grid();
  const auto grid_ptr = params.background_charge.grid_ptr();
  const std::size_t n = grid.cell_count();

  std::vector<double> dir = options.c_direction;
  if (dir.empty()) dir.assign(k, 1.0);
  if (dir.size() != k) throw ValidationError("stationary: c_direction needs one entry per species");
  for (double d : dir)
    if (!(d > 0.0)) throw ValidationError("stationary: c_direction must be positive");
  if (!(options.normalization > 0.0))
    throw ValidationError("stationary: normalization must be positive");

  bool pos = false, neg = false;
  for (int z : params.charges) {
    pos = pos || z > 0;
    neg = neg || z < 0;
  }
  const ConstraintMode mode = pos && neg ? ConstraintMode::tilt
                              : pos || neg ? ConstraintMode::scale
                                           : ConstraintMode::none;

  Problem prob{params, grid, {}, {}, params.external_charge()};
  for (std::size_t i = 0; i < k; ++i) {
    prob.base.push_back(options.normalization * dir[i]);
    prob.alpha.push_back(mode == ConstraintMode::tilt ? params.charges[i] : 1.0);
  }

  StationaryState out;
  out.mode = mode;
  std::vector<double> phi(n, 0.0);
  double p = 0.0;

  if (mode == ConstraintMode::none) {
    if (std::abs(prob.q_star) > 1e-10 * std::max(1.0, integrate_field(params.background_charge)))
      throw InfeasibleError("stationary: neutral species cannot balance a nonzero Q*");
    PoissonProblem pp;
    pp.permittivity = params.permittivity;
    pp.rho = params.background_charge;
    pp.tolerance = std::min(options.tolerance, 1e-10);
    const Field solved = solve_poisson(pp).potential;
    phi.assign(solved.values().begin(), solved.values().end());
    out.residual_history.push_back(0.0);
  } else {
    const double vol = grid.cell_volume();
    bool converged = false;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      p = prob.solve_p(phi, mode, p);
      std::vector<double> f = prob.residual(phi, p);
      double mean = 0.0;
      for (double v : phi) mean += v;
      mean /= static_cast<double>(n);
      const double res = std::max(max_abs(f) / prob.scale(phi, p), std::abs(mean));
      out.residual_history.push_back(res);
      out.iterations = it;
      if (res <= options.tolerance) {
        converged = true;
        break;
      }

      // Bordered Jacobian [A + vol W, -vol b; 1^T, 0].
      std::vector<Eigen::Triplet<double>> t;
      const double eps = params.permittivity;
      for (const Face& face : grid.faces()) {
        const double g = eps * face.area / face.distance;
        const int a = static_cast<int>(face.lower), b = static_cast<int>(face.upper);
        t.emplace_back(a, a, g);
        t.emplace_back(b, b, g);
        t.emplace_back(a, b, -g);
        t.emplace_back(b, a, -g);
      }
      const int last = static_cast<int>(n);
      for (std::size_t c = 0; c < n; ++c) {
        double w = 0.0, bc = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          const int z = params.charges[i];
          if (z == 0) continue;
          const double ni = prob.coefficient(i, p) * safe_exp(-z * phi[c]);
          w += z * z * ni;
          bc += z * prob.alpha[i] * ni;
        }
        const int ci = static_cast<int>(c);
        t.emplace_back(ci, ci, vol * w);
        t.emplace_back(ci, last, -vol * bc);
        t.emplace_back(last, ci, 1.0);
      }
      Eigen::SparseMatrix<double> jac(last + 1, last + 1);
      jac.setFromTriplets(t.begin(), t.end());
      Eigen::VectorXd rhs(last + 1);
      for (std::size_t c = 0; c < n; ++c) rhs[static_cast<Eigen::Index>(c)] = -f[c];
      rhs[last] = -mean * static_cast<double>(n);
      Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
      lu.compute(jac);
      if (lu.info() != Eigen::Success)
        throw IterationError("stationary: Newton Jacobian is singular", out.residual_history);
      const Eigen::VectorXd delta = lu.solve(rhs);

      // Damped update: halve until the residual decreases.
      double lambda = 1.0;
      bool accepted = false;
      for (int h = 0; h <= options.max_halvings; ++h, lambda *= 0.5) {
        std::vector<double> trial(n);
        for (std::size_t c = 0; c < n; ++c)
          trial[c] = phi[c] + lambda * delta[static_cast<Eigen::Index>(c)];
        const double tp = p + lambda * delta[last];
        try {
          const double tp2 = prob.solve_p(trial, mode, tp);
          const std::vector<double> tf = prob.residual(trial, tp2);
          double tmean = 0.0;
          for (double v : trial) tmean += v;
          tmean /= static_cast<double>(n);
          const double tres = std::max(max_abs(tf) / prob.scale(trial, tp2), std::abs(tmean));
          if (tres < res) {
            phi = std::move(trial);
            p = tp2;
            accepted = true;
            break;
          }
        } catch (const DomainError&) {
        }
      }
      if (!accepted) {
        // Take the smallest step anyway; stagnation is caught by max_iterations.
        for (std::size_t c = 0; c < n; ++c) phi[c] += lambda * delta[static_cast<Eigen::Index>(c)];
        p += lambda * delta[last];
      }
    }
    if (!converged) {
      std::ostringstream os;
      os << "stationary: no convergence after " << options.max_iterations
         << " iterations (residual " << out.residual_history.back() << ")";
      throw IterationError(os.str(), out.residual_history);
    }
  }

  out.residual = out.residual_history.back();
  out.potential = Field(grid_ptr, phi);
  out.c.resize(k);
  for (std::size_t i = 0; i < k; ++i) out.c[i] = prob.coefficient(i, mode == ConstraintMode::none ? 0.0 : p);
  for (std::size_t i = 0; i < k; ++i) {
    Field d(grid_ptr);
    const int z = params.charges[i];
    for (std::size_t c = 0; c < n; ++c) d[c] = out.c[i] * safe_exp(-z * phi[c]);
    out.densities.push_back(std::move(d));
  }

  double q = prob.q_star;
  for (std::size_t i = 0; i < k; ++i) q += params.charges[i] * integrate_field(out.densities[i]);
  out.charge_residual = std::abs(q);

  for (std::size_t i = 0; i < k; ++i) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t c = 0; c < n; ++c) {
      const double mu = params.charges[i] * phi[c] +
                        std::log(params.normalization[i] * out.densities[i][c]);
      out.potential_residual = std::max(out.potential_residual, std::abs(mu));
      lo = std::min(lo, mu);
      hi = std::max(hi, mu);
      out.phi_max = std::max(out.phi_max, std::abs(params.charges[i] * phi[c]));
    }
    out.potential_spread = std::max(out.potential_spread, hi - lo);
  }
  std::vector<double> cell(k), rate(k);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < k; ++i) cell[i] = out.densities[i][c];
    reaction_rate(cell, tensors, rate);
    out.reaction_residual = std::max(out.reaction_residual, max_abs(rate));
  }
  return out;
}

AprioriBounds apriori_bounds(const StationaryState& stationary, const ReactionBounds& bounds,
                             double external_charge) {
  AprioriBounds b;
  const double factor = bounds.k_inf * (1.0 + std::abs(external_charge));
  b.c_bound = factor * std::exp(stationary.phi_max);
  b.n_bound = factor * std::exp(2.0 * stationary.phi_max);
  for (double c : stationary.c) b.c_norm = std::max(b.c_norm, std::abs(c));
  for (const Field& f : stationary.densities) b.n_norm = std::max(b.n_norm, f.max_abs());
  b.pass = b.c_norm <= b.c_bound && b.n_norm <= b.n_bound;
  return b;
}

}  // namespace scintikit
