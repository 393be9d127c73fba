#include "scintikit/evolve.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

#include "scintikit/errors.hpp"
#include "scintikit/poisson.hpp"
#include "scintikit/thermo.hpp"

namespace scintikit {

double bernoulli(double x) {
  if (std::abs(x) < 1e-5) return 1.0 - x / 2.0 + x * x / 12.0;
  return x / std::expm1(x);
}

double sg_face_flux(double n_left, double n_right, double u, double d, double h) {
  return d / h * (bernoulli(-u) * n_left - bernoulli(u) * n_right);
}

void SolverSettings::validate() const {
  if (!(dt > 0.0)) throw ValidationError("solver: dt must be positive");
  if (!(t_final > dt)) throw ValidationError("solver: dt must be smaller than t_final");
  if (!(linear_tolerance > 0.0 && linear_tolerance < 1.0))
    throw ValidationError("solver: linear tolerance must lie in (0, 1)");
  if (!(gibbs_tolerance > 0.0 && gibbs_tolerance < 1.0))
    throw ValidationError("solver: gibbs tolerance must lie in (0, 1)");
  if (!(safeguard_factor > 0.0 && safeguard_factor < 1.0))
    throw ValidationError("solver: safeguard factor must lie in (0, 1)");
  if (output_stride == 0) throw ValidationError("solver: output stride must be positive");
  if (max_retries < 0) throw ValidationError("solver: max retries must be nonnegative");
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool all_positive(const std::vector<Field>& d, double& min_out) {
  bool ok = true;
  for (const Field& f : d)
    for (double v : f.values()) {
      if (!(v > 0.0) || !std::isfinite(v)) ok = false;
      min_out = std::min(min_out, v);
    }
  return ok;
}

double mass(const Field& f) { return integrate_field(f); }

}  // namespace

std::string diagnostics_header(std::size_t species) {
  std::string h = "t,E,G,G_rel,Psi,Q,l1_dist";
  for (std::size_t i = 1; i <= species; ++i) h += ",mass_" + std::to_string(i);
  return h;
}

std::string format_row(const TraceRow& r) {
  std::string s = fmt(r.t) + "," + fmt(r.entropy) + "," + fmt(r.gibbs) + "," +
                  fmt(r.relative_gibbs) + "," + fmt(r.psi) + "," + fmt(r.charge) + "," +
                  fmt(r.l1_dist);
  for (double m : r.masses) s += "," + fmt(m);
  return s;
}

DiagnosticsCsvSink::DiagnosticsCsvSink(const std::string& path, std::size_t species)
    : out_(path) {
  if (!out_) throw Error("cannot open " + path + " for writing");
  out_ << diagnostics_header(species) << '\n';
}

void DiagnosticsCsvSink::write(const TraceRow& row, const CarrierState&) {
  out_ << format_row(row) << '\n';
  out_.flush();
}

SnapshotCsvSink::SnapshotCsvSink(std::string directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(directory_);
}

void SnapshotCsvSink::write(const TraceRow&, const CarrierState& state) {
  char name[64];
  std::snprintf(name, sizeof name, "snapshot_%06zu.csv", count_++);
  const std::string path = (std::filesystem::path(directory_) / name).string();
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  const Grid& g = state.grid();
  out << "cell,x";
  if (g.dimension() == 2) out << ",y";
  for (std::size_t i = 1; i <= state.species(); ++i) out << ",n_" << i;
  out << ",phi\n";
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const Point p = g.center(c);
    out << c << ',' << fmt(p[0]);
    if (g.dimension() == 2) out << ',' << fmt(p[1]);
    for (const Field& f : state.densities) out << ',' << fmt(f[c]);
    out << ',' << fmt(state.potential[c]) << '\n';
  }
}

Integrator::Integrator(const MaterialParams& params, const ReactionTensors& tensors,
                       const SolverSettings& settings, const CarrierState* stationary)
    : params_(params), tensors_(tensors), settings_(settings), stationary_(stationary) {
  stats_.min_density = std::numeric_limits<double>::infinity();
}

Field Integrator::potential(const std::vector<Field>& densities, const Field* guess) const {
  return solve_poisson(potential_problem(densities, params_, settings_.linear_tolerance), guess)
      .potential;
}

std::vector<Field> Integrator::transport(const CarrierState& state, double dt) {
  const Grid& grid = state.grid();
  const std::size_t n = grid.cell_count();
  const std::size_t k = state.species();
  const double vol = grid.cell_volume();
  const Field& phi = state.potential;
  const auto& m = params_.mobility;

  std::vector<Field> out = state.densities;

  if (settings_.scheme == Scheme::fully_explicit) {
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double d = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (d == 0.0) continue;
        const double z = params_.charges[j];
        for (const Face& f : grid.faces()) {
          const double u = z * (phi[f.lower] - phi[f.upper]);
          const double flux = f.area * sg_face_flux(state.densities[j][f.lower],
                                                    state.densities[j][f.upper], u, d,
                                                    f.distance);
          out[i][f.lower] -= dt / vol * flux;
          out[i][f.upper] += dt / vol * flux;
        }
      }
    return out;
  }

  // Backward Euler with frozen phi. Columns of the matrix sum to vol, so
  // every species keeps its mass up to the solve.
  const bool diagonal = params_.mobility_diagonal();
  auto assemble = [&](std::size_t i, std::size_t j, std::size_t row0, std::size_t col0,
                      std::vector<Eigen::Triplet<double>>& t) {
    const double d = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (d == 0.0) return;
    const double z = params_.charges[j];
    for (const Face& f : grid.faces()) {
      const double u = z * (phi[f.lower] - phi[f.upper]);
      const double g = dt * d * f.area / f.distance;
      const double a = g * bernoulli(-u);
      const double b = g * bernoulli(u);
      const auto rl = static_cast<int>(row0 + f.lower), ru = static_cast<int>(row0 + f.upper);
      const auto cl = static_cast<int>(col0 + f.lower), cu = static_cast<int>(col0 + f.upper);
      t.emplace_back(rl, cl, a);
      t.emplace_back(rl, cu, -b);
      t.emplace_back(ru, cl, -a);
      t.emplace_back(ru, cu, b);
    }
  };

  auto solve = [](const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw StepError("transport: sparse factorization failed");
    Eigen::VectorXd x = lu.solve(b);
    if (lu.info() != Eigen::Success) throw StepError("transport: sparse solve failed");
    return x;
  };

  if (diagonal) {
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<Eigen::Triplet<double>> t;
      t.reserve(n + 4 * grid.faces().size());
      for (std::size_t c = 0; c < n; ++c)
        t.emplace_back(static_cast<int>(c), static_cast<int>(c), vol);
      assemble(i, i, 0, 0, t);
      Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      a.setFromTriplets(t.begin(), t.end());
      Eigen::VectorXd b(static_cast<Eigen::Index>(n));
      for (std::size_t c = 0; c < n; ++c) b[static_cast<Eigen::Index>(c)] = vol * state.densities[i][c];
      const Eigen::VectorXd x = solve(a, b);
      for (std::size_t c = 0; c < n; ++c) out[i][c] = x[static_cast<Eigen::Index>(c)];
    }
  } else {
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t c = 0; c < n * k; ++c)
      t.emplace_back(static_cast<int>(c), static_cast<int>(c), vol);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) assemble(i, j, i * n, j * n, t);
    const auto nk = static_cast<Eigen::Index>(n * k);
    Eigen::SparseMatrix<double> a(nk, nk);
    a.setFromTriplets(t.begin(), t.end());
    Eigen::VectorXd b(nk);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t c = 0; c < n; ++c)
        b[static_cast<Eigen::Index>(i * n + c)] = vol * state.densities[i][c];
    const Eigen::VectorXd x = solve(a, b);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t c = 0; c < n; ++c) out[i][c] = x[static_cast<Eigen::Index>(i * n + c)];
  }
  return out;
}

void Integrator::react_cell(std::span<double> n, double dt) {
  const std::size_t k = n.size();
  const auto kk = static_cast<Eigen::Index>(k);
  const std::vector<double> v(n.begin(), n.end());
  const Eigen::MatrixXd a = -reaction_matrix(v, tensors_);
  if (a.isZero(0.0)) return;

  if (settings_.scheme == Scheme::fully_explicit) {
    for (std::size_t i = 0; i < k; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * v[j];
      n[i] = v[i] + dt * s;
    }
    return;
  }

  // Modified Patankar: losses and off-diagonal production are implicit, so
  // a conservative exchange gives I + dt K with unit column sums.
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(kk, kk);
  Eigen::VectorXd rhs(kk);
  for (std::size_t i = 0; i < k; ++i) rhs[static_cast<Eigen::Index>(i)] = v[i];
  for (Eigen::Index i = 0; i < kk; ++i)
    for (Eigen::Index j = 0; j < kk; ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      if (i == j) {
        if (aij < 0.0) l(i, i) -= dt * aij;
        else rhs[i] += dt * aij * v[ui];
      } else if (aij > 0.0) {
        l(i, j) -= dt * aij;
      } else {
        l(i, i) -= dt * aij * v[uj] / v[ui];
      }
    }
  Eigen::VectorXd x = l.partialPivLu().solve(rhs);
  bool ok = true;
  for (Eigen::Index i = 0; i < kk; ++i)
    if (!(x[i] > 0.0) || !std::isfinite(x[i])) ok = false;
  if (!ok) {
    ++stats_.fallback_cells;
    for (Eigen::Index i = 0; i < kk; ++i) {
      double prod = 0.0, loss = 0.0;
      for (Eigen::Index j = 0; j < kk; ++j) {
        const double c = a(i, j) * v[static_cast<std::size_t>(j)];
        if (c > 0.0) prod += c;
        else loss -= c;
      }
      const double vi = v[static_cast<std::size_t>(i)];
      x[i] = (vi + dt * prod) / (1.0 + dt * loss / vi);
    }
  }
  for (std::size_t i = 0; i < k; ++i) n[i] = x[static_cast<Eigen::Index>(i)];
}

std::vector<Field> Integrator::react(const std::vector<Field>& densities, double dt) {
  std::vector<Field> out = densities;
  if (tensors_.is_zero()) return out;
  const std::size_t k = densities.size();
  const std::size_t cells = densities.front().size();
  const double vol = densities.front().grid().cell_volume();
  const auto& z = params_.charges;
  const bool charged = std::any_of(z.begin(), z.end(), [](int q) { return q != 0; });

  std::vector<double> n(k), v(k), rate(k);
  double defect = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t i = 0; i < k; ++i) v[i] = n[i] = densities[i][c];
    react_cell(n, dt);
    if (charged) {
      double target = 0.0, now = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        target += z[i] * v[i];
        now += z[i] * n[i];
      }
      defect += (now - target) * vol;
      // Restore z.n by an exponential tilt n_i exp(-theta z_i) when the
      // kinetics conserve charge pointwise; otherwise leave the defect.
      reaction_rate(v, tensors_, rate);
      double zr = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        zr += z[i] * rate[i];
        scale += std::abs(z[i] * rate[i]);
      }
      if (now != target && std::abs(zr) <= 1e-12 * scale + 1e-300) {
        double mag = 0.0;
        for (std::size_t i = 0; i < k; ++i) mag += std::abs(z[i]) * n[i];
        auto g = [&](double th) {
          double s = 0.0;
          for (std::size_t i = 0; i < k; ++i) s += z[i] * n[i] * std::exp(-th * z[i]);
          return s - target;
        };
        auto dg = [&](double th) {
          double s = 0.0;
          for (std::size_t i = 0; i < k; ++i)
            s -= z[i] * z[i] * n[i] * std::exp(-th * z[i]);
          return s;
        };
        // g decreases in theta; bracket and run safeguarded Newton.
        double lo = 0.0, hi = 0.0;
        double step = std::abs(now - target) / std::max(-dg(0.0), 1e-300);
        step = std::min(std::max(step, 1e-16), 1.0);
        bool found = false;
        if (g(0.0) > 0.0) {
          hi = step;
          for (int it = 0; it < 200 && g(hi) > 0.0; ++it) { lo = hi; hi *= 2.0; }
          found = g(hi) <= 0.0;
        } else {
          lo = -step;
          for (int it = 0; it < 200 && g(lo) < 0.0; ++it) { hi = lo; lo *= 2.0; }
          found = g(lo) >= 0.0;
        }
        if (found) {
          double th = 0.5 * (lo + hi);
          for (int it = 0; it < 100; ++it) {
            const double gv = g(th);
            if (std::abs(gv) <= 1e-16 * mag) break;
            if (gv > 0.0) lo = th;
            else hi = th;
            double next = th - gv / dg(th);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (next == th) break;
            th = next;
          }
          for (std::size_t i = 0; i < k; ++i) n[i] *= std::exp(-th * z[i]);
          ++stats_.projected_cells;
        }
      }
    }
    for (std::size_t i = 0; i < k; ++i) out[i][c] = n[i];
  }
  stats_.reaction_charge_defect = std::max(stats_.reaction_charge_defect, std::abs(defect));
  return out;
}

CarrierState Integrator::single_step(const CarrierState& state, double dt) {
  double min_seen = std::numeric_limits<double>::infinity();
  std::vector<Field> moved = transport(state, dt);
  if (!all_positive(moved, min_seen)) {
    std::ostringstream os;
    os << "transport substep lost positivity at t = " << state.time << " (min density "
       << min_seen << ")";
    throw StepError(os.str());
  }
  for (std::size_t i = 0; i < moved.size(); ++i) {
    const double before = mass(state.densities[i]);
    const double after = mass(moved[i]);
    const double rel = std::abs(after - before) / std::max(std::abs(before), 1e-300);
    stats_.transport_mass_defect = std::max(stats_.transport_mass_defect, rel);
  }
  std::vector<Field> reacted = react(moved, dt);
  if (!all_positive(reacted, min_seen)) {
    std::ostringstream os;
    os << "reaction substep lost positivity at t = " << state.time << " (min density "
       << min_seen << ")";
    throw StepError(os.str());
  }
  stats_.min_density = std::min(stats_.min_density, min_seen);
  CarrierState next;
  next.potential = potential(reacted, &state.potential);
  next.densities = std::move(reacted);
  next.time = state.time + dt;
  return next;
}

double Integrator::monitored(const CarrierState& state) const {
  if (stationary_ != nullptr) return relative_gibbs(state, *stationary_, params_);
  return free_energy(state, params_);
}

namespace {

/// K(n)n . mu >= 0 in every cell, the condition under which the monitored
/// functional must not grow.
bool pairing_nonnegative(const CarrierState& s, const MaterialParams& p,
                         const ReactionTensors& t) {
  if (t.is_zero()) return true;
  const std::size_t k = s.species();
  std::vector<double> n(k), rate(k);
  for (std::size_t c = 0; c < s.potential.size(); ++c) {
    for (std::size_t i = 0; i < k; ++i) n[i] = s.densities[i][c];
    reaction_rate(n, t, rate);
    double pair = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double mu = p.charges[i] * s.potential[c] + std::log(p.normalization[i] * n[i]);
      pair += rate[i] * mu;
      mag += std::abs(rate[i] * mu);
    }
    if (pair < -1e-12 * mag) return false;
  }
  return true;
}

}  // namespace

CarrierState Integrator::guarded_step(const CarrierState& state, double dt, int depth) {
  auto subdivide = [&]() {
    if (depth >= settings_.max_retries) {
      std::ostringstream os;
      os << "step at t = " << state.time << " failed after " << depth << " retries";
      throw StepError(os.str());
    }
    ++stats_.retries;
    const int parts = std::max(2, static_cast<int>(std::lround(1.0 / settings_.safeguard_factor)));
    CarrierState s = state;
    const double t_end = state.time + dt;
    for (int p = 0; p < parts; ++p) {
      s = guarded_step(s, dt / parts, depth + 1);
    }
    s.time = t_end;
    return s;
  };

  CarrierState next;
  try {
    next = single_step(state, dt);
  } catch (const StepError&) {
    if (!settings_.adaptive) throw;
    return subdivide();
  }
  if (settings_.adaptive && pairing_nonnegative(state, params_, tensors_)) {
    const double before = monitored(state);
    const double after = monitored(next);
    if (after > before + guard_tolerance_) return subdivide();
  }
  return next;
}

CarrierState Integrator::step(const CarrierState& state, double dt) {
  if (guard_tolerance_ == 0.0)
    guard_tolerance_ = settings_.gibbs_tolerance * (1.0 + std::abs(monitored(state)));
  CarrierState next = guarded_step(state, dt, 0);
  ++stats_.steps;
  return next;
}

double Integrator::radiative_rate(const CarrierState& state) const {
  const std::size_t k = state.species();
  const auto& r = tensors_.recombination;
  const auto& rr = tensors_.quadratic_recombination;
  const bool quad = !rr.is_zero();
  double total = 0.0;
  for (std::size_t c = 0; c < state.potential.size(); ++c) {
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double nj = state.densities[j][c];
        double kij = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (quad)
          for (std::size_t h = 0; h < k; ++h) kij += rr(i, j, h) * state.densities[h][c];
        total += kij * nj;
      }
  }
  return total * state.grid().cell_volume();
}

TraceRow Integrator::diagnostics(const CarrierState& state) const {
  TraceRow row;
  row.t = state.time;
  const ThermoReport rep = thermo_report(state, params_, tensors_, stationary_);
  row.entropy = rep.entropy;
  row.gibbs = rep.gibbs;
  row.relative_gibbs = rep.relative_gibbs;
  row.psi = rep.dissipation.psi;
  row.reaction_pairing_negative = rep.dissipation.reaction_pairing_negative;
  row.charge = electric_charge(state, params_);
  for (const Field& f : state.densities) row.masses.push_back(mass(f));
  row.min_density = state.min_density();
  row.photons = photons_;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  row.l1_dist = nan;
  row.h1_dist = nan;
  if (stationary_ != nullptr) {
    const double vol = state.grid().cell_volume();
    double l1 = 0.0;
    for (std::size_t i = 0; i < state.species(); ++i)
      for (std::size_t c = 0; c < state.potential.size(); ++c)
        l1 += std::abs(state.densities[i][c] - stationary_->densities[i][c]);
    row.l1_dist = l1 * vol;
    Field diff = state.potential;
    double l2 = 0.0;
    for (std::size_t c = 0; c < diff.size(); ++c) {
      diff[c] -= stationary_->potential[c];
      l2 += diff[c] * diff[c];
    }
    row.h1_dist = std::sqrt(l2 * vol + gradient_norm_squared(diff));
  }
  return row;
}

DiagnosticsTrace Integrator::run(const CarrierState& initial,
                                 std::span<TraceSink* const> sinks) {
  settings_.validate();
  DiagnosticsTrace trace;
  q0_ = electric_charge(initial, params_);
  guard_tolerance_ = settings_.gibbs_tolerance * (1.0 + std::abs(monitored(initial)));
  photons_ = 0.0;
  stats_.min_density = initial.min_density();

  auto emit = [&](const CarrierState& s, double dt_used) {
    TraceRow row = diagnostics(s);
    row.dt = dt_used;
    for (TraceSink* sink : sinks) sink->write(row, s);
    trace.rows.push_back(std::move(row));
    if (settings_.keep_snapshots) trace.snapshots.push_back(s);
  };

  const double t0 = initial.time;
  const double span = settings_.t_final - t0;
  const auto steps = static_cast<std::size_t>(std::ceil(span / settings_.dt - 1e-9));
  CarrierState state = initial;
  emit(state, 0.0);
  double rate_prev = radiative_rate(state);
  for (std::size_t m = 1; m <= steps; ++m) {
    const double t_next = m == steps ? settings_.t_final
                                     : t0 + static_cast<double>(m) * settings_.dt;
    const double h = t_next - state.time;
    state = step(state, h);
    state.time = t_next;
    const double rate = radiative_rate(state);
    photons_ += 0.5 * h * (rate_prev + rate);
    rate_prev = rate;
    stats_.charge_drift =
        std::max(stats_.charge_drift, std::abs(electric_charge(state, params_) - q0_));
    if (m % settings_.output_stride == 0 || m == steps) emit(state, h);
  }
  trace.stats = stats_;
  trace.final_state = std::move(state);
  return trace;
}

CarrierState step(const CarrierState& state, const MaterialParams& params,
                  const ReactionTensors& tensors, const SolverSettings& settings) {
  Integrator integ(params, tensors, settings);
  return integ.step(state, settings.dt);
}

DiagnosticsTrace run(const CarrierState& initial, const MaterialParams& params,
                     const ReactionTensors& tensors, const SolverSettings& settings,
                     const CarrierState* stationary, std::span<TraceSink* const> sinks) {
  Integrator integ(params, tensors, settings, stationary);
  return integ.run(initial, sinks);
}

}  // namespace scintikit
