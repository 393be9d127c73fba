#include "scintikit/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "scintikit/errors.hpp"
#include "scintikit/thermo.hpp"

namespace scintikit {

double poincare_constant(const Grid& grid) {
  const double d = grid.diameter() / std::numbers::pi;
  return d * d;
}

DecayConstants decay_constants(const DecayInputs& in) {
  if (!(in.k1 > 0.0)) throw DegenerateBoundError("decay constants: K1 must be positive");
  if (!(in.mobility_min > 0.0)) throw DegenerateBoundError("decay constants: M* must be positive");
  if (!(in.permittivity > 0.0))
    throw DegenerateBoundError("decay constants: permittivity must be positive");
  const double eps = in.permittivity;
  const double x = in.k_inf * std::exp(2.0 * in.phi_max) * (1.0 + std::abs(in.external_charge));
  const double inv = 0.5 * x * std::max(eps / in.mobility_min * x, 1.0 / in.k1) *
                     (1.0 + in.poincare / eps * x);
  DecayConstants c;
  c.c1 = 1.0 / inv;
  c.c2 = 3.0 * x + 0.5 * in.gibbs0 + 2.0 / eps * (1.0 + in.poincare);
  return c;
}

BoundReport bound_report(const MaterialParams& params, const ReactionTensors& tensors,
                         const StationaryState& stationary, const CarrierState& initial) {
  BoundReport r;
  r.species = params.species();
  double n0max = 0.0;
  for (const Field& f : initial.densities) n0max = std::max(n0max, f.max_abs());
  r.reaction = reaction_bounds(tensors, n0max);
  r.reaction_norm = r.reaction.norm;
  r.inputs.k1 = r.reaction.k1;
  r.inputs.k_inf = r.reaction.k_inf;
  r.inputs.phi_max = stationary.phi_max;
  r.inputs.external_charge = params.external_charge();
  r.inputs.permittivity = params.permittivity;
  r.inputs.mobility_min = params.check_mobility().smallest_eigenvalue;
  r.inputs.poincare = poincare_constant(initial.grid());
  r.inputs.gibbs0 = relative_gibbs(initial, stationary.as_state(), params);
  r.constants = decay_constants(r.inputs);
  r.tau = 1.0 / r.constants.c1;
  r.extrapolated = r.species > 2;
  return r;
}

DecayVerdict verify_decay_estimate(std::span<const TraceRow> rows, const BoundReport& report) {
  DecayVerdict v;
  const double g0 = report.inputs.gibbs0;
  const double c1 = report.constants.c1;
  const double c2 = report.constants.c2;
  v.slack = 1e-8 * (1.0 + g0);
  v.first_violation = std::numeric_limits<double>::quiet_NaN();
  for (const TraceRow& row : rows) {
    if (std::isnan(row.l1_dist) || std::isnan(row.h1_dist) || std::isnan(row.relative_gibbs))
      throw ValidationError(
          "decay estimate: trace lacks l1_dist, h1_dist or G_rel (no stationary state)");
    MarginRow a{row.t, c1 * row.relative_gibbs, 2.0 * row.psi, 0.0};
    a.margin = a.rhs + v.slack - a.lhs;
    MarginRow b{row.t, row.l1_dist * row.l1_dist + row.h1_dist * row.h1_dist,
                c2 * g0 * std::exp(-c1 * row.t), 0.0};
    b.margin = b.rhs + v.slack - b.lhs;
    if (v.pass && (a.margin < 0.0 || b.margin < 0.0)) {
      v.pass = false;
      v.first_violation = row.t;
      v.first_violation_check = a.margin < 0.0 ? "dissipation" : "distance";
    }
    v.dissipation.push_back(a);
    v.distance.push_back(b);
  }
  return v;
}

namespace {

struct Line {
  double intercept = 0.0;
  double slope = 0.0;
};

Line fit_line(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("fit: sample times are all equal");
  Line l;
  l.slope = sxy / sxx;
  l.intercept = my - l.slope * mx;
  return l;
}

/// Nonnegative least-squares amplitudes for two exponentials; returns the
/// residual norm.
double amplitudes(std::span<const double> t, std::span<const double> y, double tf, double ts,
                  double& af, double& as) {
  const auto m = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd a(m, 2);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, 0) = std::exp(-t[static_cast<std::size_t>(i)] / tf);
    a(i, 1) = std::exp(-t[static_cast<std::size_t>(i)] / ts);
    b[i] = y[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 2) return std::numeric_limits<double>::infinity();
  Eigen::Vector2d x = qr.solve(b);
  if (x[0] < 0.0 || x[1] < 0.0) {
    // Best single-column nonnegative fit.
    double best = std::numeric_limits<double>::infinity();
    for (int col = 0; col < 2; ++col) {
      const double coef = std::max(0.0, a.col(col).dot(b) / a.col(col).squaredNorm());
      const double r = (a.col(col) * coef - b).norm();
      if (r < best) {
        best = r;
        x = Eigen::Vector2d::Zero();
        x[col] = coef;
      }
    }
  }
  af = x[0];
  as = x[1];
  return (a * x - b).norm();
}

}  // namespace

DecayFit fit_decay(std::span<const double> t, std::span<const double> y, FitMode mode) {
  if (t.size() != y.size()) throw ValidationError("fit: time and value counts differ");
  if (t.size() < 8) throw ValidationError("fit: at least 8 samples are required");
  for (double v : y)
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("fit: samples must be positive");

  DecayFit fit;
  fit.mode = mode;
  const std::size_t half = t.size() / 2;
  std::vector<double> logs;
  for (std::size_t i = half; i < y.size(); ++i) logs.push_back(std::log(y[i]));
  const Line line = fit_line(t.subspan(half), logs);
  fit.tail_rate = -line.slope;
  const double span = t.back() - t.front();
  const double scale = std::abs(line.slope) * std::max(span, 1e-300);

  if (mode == FitMode::single) {
    fit.decaying = line.slope < 0.0 && scale > 1e-12;
    fit.tau_slow = fit.decaying ? -1.0 / line.slope : std::numeric_limits<double>::infinity();
    fit.amp_slow = std::exp(line.intercept);
    fit.tau_fast = fit.tau_slow;
    double r = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double model = fit.decaying ? fit.amp_slow * std::exp(-t[i] / fit.tau_slow)
                                        : fit.amp_slow;
      r += (model - y[i]) * (model - y[i]);
    }
    fit.residual = std::sqrt(r);
    return fit;
  }

  // Log-spaced grid from a fraction of the smallest spacing to well past the span.
  double dt_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < t.size(); ++i) dt_min = std::min(dt_min, t[i] - t[i - 1]);
  if (!(dt_min > 0.0)) throw ValidationError("fit: sample times must increase");
  const double lo = std::log(0.5 * dt_min), hi = std::log(10.0 * span);
  const int grid = 60;
  double best = std::numeric_limits<double>::infinity();
  std::array<double, 2> arg{lo, hi};
  for (int a = 0; a < grid; ++a)
    for (int b = a + 1; b < grid; ++b) {
      const double lf = lo + (hi - lo) * a / (grid - 1);
      const double ls = lo + (hi - lo) * b / (grid - 1);
      double af = 0.0, as = 0.0;
      const double r = amplitudes(t, y, std::exp(lf), std::exp(ls), af, as);
      if (r < best) {
        best = r;
        arg = {lf, ls};
      }
    }
  if (!std::isfinite(best)) throw ValidationError("fit: amplitude problem is rank deficient");

  auto objective = [&](const std::array<double, 2>& p) {
    double af = 0.0, as = 0.0;
    return amplitudes(t, y, std::exp(p[0]), std::exp(p[1]), af, as);
  };
  // Nelder-Mead on (log tau_f, log tau_s).
  const double step = (hi - lo) / (grid - 1);
  std::array<std::array<double, 2>, 3> simplex{arg, arg, arg};
  simplex[1][0] += step;
  simplex[2][1] += step;
  std::array<double, 3> val{};
  for (int i = 0; i < 3; ++i) val[i] = objective(simplex[i]);
  for (int it = 0; it < 2000; ++it) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
    const auto b = simplex[idx[0]], m = simplex[idx[1]], w = simplex[idx[2]];
    const double fb = val[idx[0]], fm = val[idx[1]], fw = val[idx[2]];
    const double size = std::max(std::abs(m[0] - b[0]) + std::abs(m[1] - b[1]),
                                 std::abs(w[0] - b[0]) + std::abs(w[1] - b[1]));
    if (size < 1e-12) break;
    const std::array<double, 2> c{0.5 * (b[0] + m[0]), 0.5 * (b[1] + m[1])};
    auto along = [&](double s) {
      return std::array<double, 2>{c[0] + s * (w[0] - c[0]), c[1] + s * (w[1] - c[1])};
    };
    const auto r = along(-1.0);
    const double fr = objective(r);
    if (fr < fb) {
      const auto e = along(-2.0);
      const double fe = objective(e);
      if (fe < fr) { simplex[idx[2]] = e; val[idx[2]] = fe; }
      else { simplex[idx[2]] = r; val[idx[2]] = fr; }
    } else if (fr < fm) {
      simplex[idx[2]] = r;
      val[idx[2]] = fr;
    } else {
      const auto k = fr < fw ? along(-0.5) : along(0.5);
      const double fk = objective(k);
      if (fk < std::min(fr, fw)) {
        simplex[idx[2]] = k;
        val[idx[2]] = fk;
      } else {
        for (int i : {idx[1], idx[2]}) {
          simplex[i] = {b[0] + 0.5 * (simplex[i][0] - b[0]), b[1] + 0.5 * (simplex[i][1] - b[1])};
          val[i] = objective(simplex[i]);
        }
      }
    }
  }
  const int ib = static_cast<int>(std::min_element(val.begin(), val.end()) - val.begin());
  double tf = std::exp(simplex[ib][0]), ts = std::exp(simplex[ib][1]);
  double af = 0.0, as = 0.0;
  fit.residual = amplitudes(t, y, tf, ts, af, as);
  if (tf > ts) {
    std::swap(tf, ts);
    std::swap(af, as);
  }
  fit.tau_fast = tf;
  fit.tau_slow = ts;
  fit.amp_fast = af;
  fit.amp_slow = as;
  fit.decaying = true;
  return fit;
}

double local_light_yield(std::span<const double> t, std::span<const double> np, double n0,
                         double tau_bar) {
  if (!(n0 > 0.0)) throw ValidationError("light yield: N0 must be positive");
  if (!(tau_bar > 0.0)) throw ValidationError("light yield: tau must be positive");
  if (t.size() != np.size() || t.size() < 2)
    throw ValidationError("light yield: need at least two samples");
  if (t.back() < tau_bar * (1.0 - 1e-12) + t.front())
    throw ValidationError("light yield: trace ends before tau");
  const double t0 = t.front();
  double integral = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double a = t[i - 1] - t0, b = t[i] - t0;
    if (a >= tau_bar) break;
    if (b <= tau_bar) {
      integral += 0.5 * (b - a) * (np[i] + np[i - 1]);
    } else {
      const double w = (tau_bar - a) / (b - a);
      const double end = np[i - 1] + w * (np[i] - np[i - 1]);
      integral += 0.5 * (tau_bar - a) * (np[i - 1] + end);
    }
  }
  return integral / (tau_bar * n0);
}

double characteristic_time(const ReactionTensors& tensors) {
  const double m = tensors.recombination.size() > 0 ? tensors.recombination.maxCoeff() : 0.0;
  if (!(m > 0.0))
    throw ValidationError("characteristic time: R has no positive entry, tau is undefined");
  return 1.0 / m;
}

std::vector<double> point_trace(std::span<const CarrierState> snapshots, const Point& x) {
  std::vector<double> out;
  if (snapshots.empty()) return out;
  const std::size_t cell = snapshots.front().grid().locate(x);
  for (const CarrierState& s : snapshots) {
    double sum = 0.0;
    for (const Field& f : s.densities) sum += f[cell];
    out.push_back(sum);
  }
  return out;
}

double global_light_yield(std::span<const CarrierState> snapshots, const Field& n0_total,
                          double tau_bar) {
  if (snapshots.size() < 2) throw ValidationError("light yield: need at least two snapshots");
  std::vector<double> t;
  for (const CarrierState& s : snapshots) t.push_back(s.time);
  const Grid& grid = n0_total.grid();
  double total = 0.0;
  std::vector<double> np(snapshots.size());
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    for (std::size_t m = 0; m < snapshots.size(); ++m) {
      double sum = 0.0;
      for (const Field& f : snapshots[m].densities) sum += f[c];
      np[m] = sum;
    }
    total += local_light_yield(t, np, n0_total[c], tau_bar);
  }
  return total * grid.cell_volume();
}

YieldBound yield_bound(double c1, double c2, double gibbs0, double tau_bar, double n0_bar) {
  if (!(n0_bar > 0.0)) throw ValidationError("yield bound: N0bar = ||n0 - n_inf||_L1 is zero");
  if (!(tau_bar > 0.0)) throw ValidationError("yield bound: tau must be positive");
  YieldBound y;
  const double decay = -std::expm1(-c1 * tau_bar);
  y.literal = c2 / c1 * decay * gibbs0;
  y.chain = c2 * gibbs0 * decay / (c1 * tau_bar * n0_bar);
  y.root = std::sqrt(c2 * gibbs0) * 2.0 / c1 * -std::expm1(-0.5 * c1 * tau_bar) /
           (tau_bar * n0_bar);
  return y;
}

YieldBound yield_bound(std::span<const TraceRow> rows, double c1, double c2, double gibbs0,
                       double tau_bar) {
  if (rows.empty()) throw ValidationError("yield bound: empty trace");
  const double n0_bar = rows.front().l1_dist;
  if (std::isnan(n0_bar)) throw ValidationError("yield bound: trace lacks l1_dist");
  YieldBound y = yield_bound(c1, c2, gibbs0, tau_bar, n0_bar);
  std::vector<double> t, np;
  for (const TraceRow& r : rows) {
    t.push_back(r.t);
    np.push_back(r.l1_dist);
  }
  y.estimate = local_light_yield(t, np, n0_bar, tau_bar);
  y.pass = y.estimate <= y.root + 1e-8 * (1.0 + y.root);
  return y;
}

}  // namespace scintikit
