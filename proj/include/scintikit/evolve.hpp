#pragma once

#include <cstddef>
#include <functional>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "scintikit/grid.hpp"
#include "scintikit/kinetics.hpp"
#include "scintikit/material.hpp"

namespace scintikit {

/// Bernoulli function x / (exp(x) - 1), B(0) = 1.
double bernoulli(double x);

/// Scharfetter-Gummel flux from the lower cell L to the upper cell R,
/// (d / h) (B(-u) n_L - B(u) n_R). It vanishes when n_R = n_L exp(u); with
/// u = z (phi_L - phi_R) that is the Boltzmann profile n ~ exp(-z phi).
double sg_face_flux(double n_left, double n_right, double u, double d, double h);

enum class Scheme { split_implicit, fully_explicit };

struct SolverSettings {
  double dt = 1e-3;
  double t_final = 1.0;
  /// Gibbs safeguard: a step that raises the monitored free energy by more
  /// than gibbs_tolerance * (1 + |F(0)|) is redone as two half steps.
  bool adaptive = false;
  double safeguard_factor = 0.5;
  double gibbs_tolerance = 1e-12;
  int max_retries = 12;
  double linear_tolerance = 1e-12;  ///< Poisson relative residual
  std::size_t output_stride = 1;
  Scheme scheme = Scheme::split_implicit;
  /// Keep every output state in the returned trace.
  bool keep_snapshots = false;

  void validate() const;
};

/// Diagnostics at one output time.
struct TraceRow {
  double t = 0.0;
  double entropy = 0.0;
  double gibbs = 0.0;
  double relative_gibbs = 0.0;  ///< NaN without a stationary state
  double psi = 0.0;
  double charge = 0.0;
  double l1_dist = 0.0;  ///< sum_i ||n_i - ninf_i||_L1, NaN without a stationary state
  double h1_dist = 0.0;  ///< ||phi - phi_inf||_H1, NaN without a stationary state
  std::vector<double> masses;
  double photons = 0.0;  ///< cumulative radiative recombination
  double min_density = 0.0;
  double dt = 0.0;
  bool reaction_pairing_negative = false;
};

/// Per-run conservation and positivity statistics.
struct StepStatistics {
  std::size_t steps = 0;
  std::size_t retries = 0;
  /// max over steps and species of |mass after transport - mass before| / mass
  double transport_mass_defect = 0.0;
  /// max over steps of |Q(t) - Q(0)|
  double charge_drift = 0.0;
  /// max over steps of |integral z.(n after reaction - n before)| with no
  /// projection applied, i.e. charge the reaction update did not conserve
  double reaction_charge_defect = 0.0;
  std::size_t projected_cells = 0;
  std::size_t fallback_cells = 0;
  double min_density = 0.0;  ///< over all cells, species and substeps
};

struct DiagnosticsTrace {
  std::vector<TraceRow> rows;
  std::vector<CarrierState> snapshots;  ///< filled when keep_snapshots is set
  StepStatistics stats;
  CarrierState final_state;
};

/// Receives rows in time order.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void write(const TraceRow& row, const CarrierState& state) = 0;
};

/// t,E,G,G_rel,Psi,Q,l1_dist,mass_1..mass_k
class DiagnosticsCsvSink : public TraceSink {
 public:
  DiagnosticsCsvSink(const std::string& path, std::size_t species);
  void write(const TraceRow& row, const CarrierState& state) override;

 private:
  std::ofstream out_;
};

/// One CSV per output time: cell,x[,y],n_1..n_k,phi.
class SnapshotCsvSink : public TraceSink {
 public:
  explicit SnapshotCsvSink(std::string directory);
  void write(const TraceRow& row, const CarrierState& state) override;

 private:
  std::string directory_;
  std::size_t count_ = 0;
};

std::string diagnostics_header(std::size_t species);
std::string format_row(const TraceRow& row);

/// Time stepper for the reaction-diffusion-drift-Poisson system.
class Integrator {
 public:
  Integrator(const MaterialParams& params, const ReactionTensors& tensors,
             const SolverSettings& settings, const CarrierState* stationary = nullptr);

  /// One step of size dt from state (whose potential must be consistent).
  /// Throws StepError when positivity is lost or retries are exhausted.
  CarrierState step(const CarrierState& state, double dt);

  /// Transport substep alone, with frozen potential.
  std::vector<Field> transport(const CarrierState& state, double dt);
  /// Reaction substep alone, cellwise.
  std::vector<Field> react(const std::vector<Field>& densities, double dt);
  /// Consistent potential for the given densities.
  Field potential(const std::vector<Field>& densities, const Field* guess = nullptr) const;

  DiagnosticsTrace run(const CarrierState& initial, std::span<TraceSink* const> sinks = {});

  TraceRow diagnostics(const CarrierState& state) const;
  const StepStatistics& statistics() const { return stats_; }
  /// Functional watched by the safeguard: G(n|n_inf) if a stationary state
  /// is known, the free energy otherwise.
  double monitored(const CarrierState& state) const;

 private:
  CarrierState single_step(const CarrierState& state, double dt);
  CarrierState guarded_step(const CarrierState& state, double dt, int depth);
  void react_cell(std::span<double> n, double dt);
  double radiative_rate(const CarrierState& state) const;

  const MaterialParams& params_;
  const ReactionTensors& tensors_;
  SolverSettings settings_;
  const CarrierState* stationary_;
  StepStatistics stats_;
  double q0_ = 0.0;
  double guard_tolerance_ = 0.0;
  double photons_ = 0.0;
};

/// Convenience wrappers.
CarrierState step(const CarrierState& state, const MaterialParams& params,
                  const ReactionTensors& tensors, const SolverSettings& settings);
DiagnosticsTrace run(const CarrierState& initial, const MaterialParams& params,
                     const ReactionTensors& tensors, const SolverSettings& settings,
                     const CarrierState* stationary = nullptr,
                     std::span<TraceSink* const> sinks = {});

/// Smooth vector test function v(x, t) with its time derivative.
struct WeakTestFunction {
  std::function<std::vector<double>(const Point&, double)> value;
  std::function<std::vector<double>(const Point&, double)> time_derivative;
};

/// |LHS - RHS| of the weak identity
///   int v.n |_0^T - intint n.v_t = -intint S[grad mu].grad v + K(n)n.v
/// over stored snapshots (trapezoid rule in time). Needs >= 3 snapshots.
double weak_residual(std::span<const CarrierState> snapshots, const WeakTestFunction& v,
                     const MaterialParams& params, const ReactionTensors& tensors);

/// xi(n) with its gradient and Hessian in n.
struct Renormalization {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> gradient;
  std::function<std::vector<double>(std::span<const double>)> hessian;  ///< row-major k x k
};

struct ScalarTestFunction {
  std::function<double(const Point&, double)> value;
  std::function<double(const Point&, double)> time_derivative;
};

/// Defect of the renormalized identity in chain-rule form
///   int xi(n) psi |_0^T - intint xi(n) psi_t
///     = -intint (Hess xi grad n) . S[grad mu] psi + S[grad mu] grad xi . grad psi
///       + (K(n)n . grad xi) psi.
double renormalized_residual(std::span<const CarrierState> snapshots,
                             const Renormalization& xi, const ScalarTestFunction& psi,
                             const MaterialParams& params, const ReactionTensors& tensors);

}  // namespace scintikit
