#pragma once

#include <span>
#include <string>
#include <vector>

#include "scintikit/evolve.hpp"
#include "scintikit/grid.hpp"
#include "scintikit/kinetics.hpp"
#include "scintikit/material.hpp"
#include "scintikit/stationary.hpp"

namespace scintikit {

/// (diam / pi)^2, the zero-mean Poincare constant of a convex domain.
double poincare_constant(const Grid& grid);

struct DecayInputs {
  double k1 = 0.0;
  double k_inf = 0.0;
  double phi_max = 0.0;      ///< Phi_inf
  double external_charge = 0.0;  ///< Q* (its absolute value enters)
  double permittivity = 1.0;
  double mobility_min = 0.0;  ///< M*
  double poincare = 0.0;      ///< L(Omega)
  double gibbs0 = 0.0;        ///< G(n0, phi0) relative to the stationary state
};

struct DecayConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// C1^-1 = 1/2 X max{(eps0/M*) X, 1/K1} (1 + (L/eps0) X),
/// C2 = 3 X + G0/2 + (2/eps0)(1 + L), with X = K_inf e^(2 Phi) (1 + |Q*|).
/// Throws DegenerateBoundError when K1, M* or eps0 is not positive.
DecayConstants decay_constants(const DecayInputs& in);

struct BoundReport {
  std::size_t species = 0;
  DecayInputs inputs;
  ReactionBounds reaction;
  DecayConstants constants;
  double tau = 0.0;  ///< 1 / C1
  bool extrapolated = false;  ///< k > 2
  std::string reaction_norm;
  std::string poincare_convention = "L = (diam / pi)^2, diam the Euclidean diagonal";
  std::string gibbs_convention = "G0 = G(n0 | n_inf) with the relative Gibbs free energy";
  std::string bound_norm = "max norms for c and n_inf";
};

/// Assembles every input from the model, the stationary state and n0.
BoundReport bound_report(const MaterialParams& params, const ReactionTensors& tensors,
                         const StationaryState& stationary, const CarrierState& initial);

struct MarginRow {
  double t = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  ///< rhs + slack - lhs, nonnegative when satisfied
};

struct DecayVerdict {
  bool pass = true;
  double slack = 0.0;
  std::vector<MarginRow> dissipation;  ///< C1 G_rel <= 2 Psi
  std::vector<MarginRow> distance;     ///< l1^2 + h1^2 <= C2 G0 e^(-C1 t)
  /// Time of the first violation, NaN when none.
  double first_violation = 0.0;
  std::string first_violation_check;
};

/// Checks both inequalities at every row with slack 1e-8 (1 + G0). Throws
/// ValidationError when l1_dist, h1_dist or G_rel is missing.
DecayVerdict verify_decay_estimate(std::span<const TraceRow> rows, const BoundReport& report);

enum class FitMode { single, dual };

struct DecayFit {
  FitMode mode = FitMode::single;
  double amp_fast = 0.0;
  double tau_fast = 0.0;
  double amp_slow = 0.0;
  double tau_slow = 0.0;
  double residual = 0.0;   ///< ||model - y||_2
  double tail_rate = 0.0;  ///< -slope of log y on the trailing half
  bool decaying = true;
};

/// Single: log-linear least squares on the trailing half, tau = -1/slope.
/// Dual: separable least squares over a log grid of (tau_f, tau_s), then
/// Nelder-Mead on log tau. Needs >= 8 positive samples.
DecayFit fit_decay(std::span<const double> t, std::span<const double> y, FitMode mode);

/// Y_L = (1 / (tau N0)) integral_0^tau N_p dt by the trapezoid rule, the
/// last interval cut at tau by linear interpolation.
double local_light_yield(std::span<const double> t, std::span<const double> np, double n0,
                         double tau_bar);

/// tau = 1 / max_ij R_ij. Throws ValidationError when R has no positive entry.
double characteristic_time(const ReactionTensors& tensors);

/// Y = integral over Omega of (1 / (tau N0(x))) integral_0^tau N_p(x, t) dt,
/// N_p the species sum of each snapshot.
double global_light_yield(std::span<const CarrierState> snapshots, const Field& n0_total,
                          double tau_bar);

/// Point trace of N_p = sum_i n_i at the cell containing x.
std::vector<double> point_trace(std::span<const CarrierState> snapshots, const Point& x);

struct YieldBound {
  double estimate = 0.0;  ///< (1 / (tau N0bar)) integral_0^tau ||n_p - n_inf||_L1 dt
  double literal = 0.0;   ///< (C2 / C1)(1 - e^(-C1 tau)) G0 as printed
  double chain = 0.0;     ///< (1 / (tau N0bar)) C2 G0 (1 - e^(-C1 tau)) / C1
  double root = 0.0;      ///< (1 / (tau N0bar)) sqrt(C2 G0) (2 / C1)(1 - e^(-C1 tau / 2))
  bool pass = false;      ///< estimate <= root + slack
};

/// Bound values only (estimate left at zero).
YieldBound yield_bound(double c1, double c2, double gibbs0, double tau_bar, double n0_bar);

/// Bound values plus the estimate from the l1_dist column of a
/// quenching-free run. Throws ValidationError when N0bar = 0.
YieldBound yield_bound(std::span<const TraceRow> rows, double c1, double c2, double gibbs0,
                       double tau_bar);

}  // namespace scintikit
