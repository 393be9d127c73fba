#include "scintikit/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <thread>

#include "scintikit/analysis.hpp"
#include "scintikit/errors.hpp"
#include "scintikit/io.hpp"
#include "scintikit/kinetics.hpp"
#include "scintikit/poisson.hpp"
#include "scintikit/thermo.hpp"
#include "scintikit/track.hpp"

namespace scintikit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string path_in(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

json vec_json(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(number_json(x));
  return a;
}

// Commands other than validate refuse to run on a model that breaks the
// structural hypotheses.
void require_valid(const RunConfig& cfg) {
  cfg.material.validate();
  cfg.tensors.validate();
  cfg.excitation.validate();
  cfg.solver.validate();
}

StationaryAttempt attempt_with(const RunConfig& cfg, const ReactionTensors& tensors) {
  StationaryAttempt a;
  try {
    StationaryState s = solve_stationary(cfg.material, tensors, cfg.analysis.stationary);
    double n_norm = 0.0;
    for (const Field& f : s.densities) n_norm = std::max(n_norm, f.max_abs());
    a.genuine = s.potential_residual <= 1e-8 && s.reaction_residual <= 1e-8 * (1.0 + n_norm);
    if (!a.genuine)
      a.reason = "stationary state is not an equilibrium of the dynamics (||mu_inf|| = " +
                 num(s.potential_residual) + ", ||K(n_inf) n_inf|| = " +
                 num(s.reaction_residual) + ")";
    a.state = std::move(s);
  } catch (const InfeasibleError& e) {
    a.reason = std::string("no stationary state: ") + e.what();
  } catch (const IterationError& e) {
    a.reason = std::string("stationary solve did not converge: ") + e.what();
  }
  return a;
}

json stationary_summary(const StationaryAttempt& a) {
  json j;
  j["available"] = a.state.has_value();
  j["genuine"] = a.genuine;
  j["reason"] = a.reason.empty() ? json(nullptr) : json(a.reason);
  return j;
}

json statistics_json(const StepStatistics& s) {
  json j;
  j["steps"] = s.steps;
  j["retries"] = s.retries;
  j["transport_mass_defect"] = number_json(s.transport_mass_defect);
  j["charge_drift"] = number_json(s.charge_drift);
  j["reaction_charge_defect"] = number_json(s.reaction_charge_defect);
  j["projected_cells"] = s.projected_cells;
  j["fallback_cells"] = s.fallback_cells;
  j["min_density"] = number_json(s.min_density);
  return j;
}

json bound_json(const BoundReport& b) {
  json j;
  j["species"] = b.species;
  j["extrapolated"] = b.extrapolated;
  j["C1"] = number_json(b.constants.c1);
  j["C2"] = number_json(b.constants.c2);
  j["tau"] = number_json(b.tau);
  j["inputs"] = {{"K1", number_json(b.inputs.k1)},
                 {"K_inf", number_json(b.inputs.k_inf)},
                 {"Phi_inf", number_json(b.inputs.phi_max)},
                 {"Q_star", number_json(b.inputs.external_charge)},
                 {"eps0", number_json(b.inputs.permittivity)},
                 {"M_star", number_json(b.inputs.mobility_min)},
                 {"L", number_json(b.inputs.poincare)},
                 {"G0", number_json(b.inputs.gibbs0)}};
  j["reaction"] = {{"K1", number_json(b.reaction.k1)},
                   {"K2", number_json(b.reaction.k2)},
                   {"K_inf", number_json(b.reaction.k_inf)},
                   {"n0_max", number_json(b.reaction.n0_max)}};
  j["conventions"] = {{"reaction_norm", b.reaction_norm},
                      {"poincare", b.poincare_convention},
                      {"gibbs", b.gibbs_convention},
                      {"bounds", b.bound_norm}};
  return j;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Run manifest: everything needed to reproduce the outputs. Wall-clock
// timings live in a separate file so the manifest itself is deterministic.
void write_manifest(const std::string& out, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& outputs, const json& extra,
                    double seconds) {
  json m;
  m["tool"] = "scintikit";
  m["version"] = kVersion;
  m["command"] = command;
  m["config_hash"] = config_hash(cfg.source);
  m["seed"] = cfg.seed;
  m["config"] = cfg.source;
  m["outputs"] = outputs;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_json(path_in(out, "manifest.json"), m);
  write_json(path_in(out, "timings.json"),
             json{{"command", command}, {"wall_seconds", seconds}});
}

struct Simulation {
  CarrierState initial;
  StationaryAttempt stationary;
  DiagnosticsTrace trace;
};

// Runs with the stationary state as reference when it is a genuine
// equilibrium; otherwise relative quantities stay NaN.
Simulation simulate(const RunConfig& cfg, const ReactionTensors& tensors,
                    const SolverSettings& settings, std::span<TraceSink* const> sinks) {
  Simulation s;
  s.initial = initial_state(cfg.excitation, cfg.grid, cfg.material);
  s.stationary = attempt_with(cfg, tensors);
  std::optional<CarrierState> reference;
  if (s.stationary.genuine) reference = s.stationary.state->as_state();
  s.trace = run(s.initial, cfg.material, tensors, settings,
                reference ? &*reference : nullptr, sinks);
  return s;
}

}  // namespace

bool ValidationReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string ValidationReport::text() const {
  std::ostringstream os;
  for (const Check& c : checks) {
    os << (c.pass ? "PASS " : "FAIL ") << c.id << "  " << c.title;
    if (!c.detail.empty()) os << ": " << c.detail;
    os << "\n";
  }
  os << (pass() ? "all hypotheses hold\n" : "some hypotheses fail\n");
  return os.str();
}

json ValidationReport::to_json() const {
  json j;
  j["pass"] = pass();
  j["checks"] = json::array();
  for (const Check& c : checks)
    j["checks"].push_back({{"id", c.id}, {"title", c.title}, {"pass", c.pass},
                           {"detail", c.detail}});
  return j;
}

ValidationReport validate_config(const RunConfig& cfg) {
  ValidationReport r;
  const std::size_t k = cfg.material.species();
  const auto samples = sample_states(k, cfg.analysis.samples, cfg.seed);

  std::vector<Field> n0;
  std::string n0_error;
  try {
    cfg.excitation.validate();
    n0 = initial_densities(cfg.excitation, cfg.grid);
  } catch (const Error& e) {
    n0_error = e.what();
  }

  // Poisson compatibility and H1 share the initial potential solve.
  Check compat{"poisson", "Poisson compatibility Q* + integral z.n0 = 0", false, ""};
  Check h1{"H1", "drift term: grad phi0 bounded", false, ""};
  std::optional<Field> phi0;
  if (!n0_error.empty()) {
    compat.detail = h1.detail = "no initial data: " + n0_error;
  } else {
    try {
      const PoissonProblem pb = potential_problem(n0, cfg.material, 1e-12);
      phi0 = solve_poisson(pb).potential;
      compat.pass = true;
      compat.detail = "|Q| = " + num(std::abs(integrate_field(pb.rho)));
    } catch (const CompatibilityError& e) {
      compat.detail = "integral of rho = " + num(e.integral());
      h1.detail = "potential undefined";
    } catch (const Error& e) {
      compat.detail = h1.detail = e.what();
    }
    if (phi0) {
      double g = 0.0;
      for (const Face& f : cfg.grid->faces())
        g = std::max(g, std::abs((*phi0)[f.upper] - (*phi0)[f.lower]) / f.distance);
      h1.pass = std::isfinite(g);
      h1.detail = "max |grad phi0| = " + num(g);
    }
  }

  Check h2{"H2", "reaction term: K(n)n continuous with admissible coefficients", false, ""};
  try {
    cfg.tensors.validate();
    if (cfg.tensors.species() != k) throw ValidationError("tensor size differs from k");
    bool finite = true;
    for (const auto& s : samples) {
      const Eigen::VectorXd rate = reaction_rate(s, cfg.tensors);
      finite = finite && rate.allFinite();
    }
    h2.pass = finite;
    h2.detail = finite ? "coefficients valid, K(n)n finite at " + std::to_string(samples.size()) +
                             " samples"
                       : "K(n)n not finite at some sample";
  } catch (const Error& e) {
    h2.detail = e.what();
  }

  Check h3{"H3", "initial data: n0 > 0 with finite entropy", false, ""};
  if (!n0_error.empty()) {
    h3.detail = n0_error;
  } else {
    double lo = n0.empty() ? 0.0 : n0.front().min();
    for (const Field& f : n0) lo = std::min(lo, f.min());
    if (lo > 0.0) {
      CarrierState s{n0, phi0 ? *phi0 : Field(cfg.grid), 0.0};
      const double e = scintillation_entropy(s, cfg.material);
      h3.pass = std::isfinite(e);
      h3.detail = "min n0 = " + num(lo) + ", E(n0) = " + num(e);
    } else {
      h3.detail = "min n0 = " + num(lo);
    }
  }

  Check h4{"H4", "reaction entropy inequality at sampled states", false, ""};
  Check charge{"charge", "charge compatibility z.K(n)n = 0", false, ""};
  if (h2.pass) {
    std::vector<double> w = cfg.analysis.h4.weights, l = cfg.analysis.h4.shifts;
    if (w.empty()) w.assign(k, 1.0);
    if (l.empty()) l.assign(k, 0.0);
    const SampleReport rep =
        validate_h4(cfg.tensors, cfg.material.normalization, w, l, samples, cfg.analysis.h4.sign);
    h4.pass = rep.pass;
    h4.detail = std::string(cfg.analysis.h4.sign == RateSign::production ? "production"
                                                                          : "as-printed") +
                " sign, max sum = " + num(rep.worst) + ", " +
                std::to_string(rep.violations.size()) + " of " + std::to_string(rep.samples) +
                " samples violate";
    const SampleReport cr =
        validate_charge_compatibility(cfg.tensors, cfg.material.charges, samples);
    charge.pass = cr.pass;
    charge.detail = "max |z.K(n)n| = " + num(cr.worst) + ", " +
                    std::to_string(cr.violations.size()) + " of " + std::to_string(cr.samples) +
                    " samples violate";
  } else {
    h4.detail = charge.detail = "skipped: reaction tensors invalid";
  }

  Check h5{"H5", "mobility matrix symmetric positive definite", false, ""};
  if (static_cast<std::size_t>(cfg.material.mobility.rows()) == k &&
      static_cast<std::size_t>(cfg.material.mobility.cols()) == k) {
    const MobilityCheck mc = cfg.material.check_mobility();
    h5.pass = mc.pass();
    h5.detail = "||M - M^T|| = " + num(mc.asymmetry) +
                ", smallest eigenvalue = " + num(mc.smallest_eigenvalue);
  } else {
    h5.detail = "M is not k x k";
  }

  r.checks = {h1, h2, h3, h4, h5, charge, compat};
  return r;
}

StationaryAttempt attempt_stationary(const RunConfig& cfg) {
  return attempt_with(cfg, cfg.tensors);
}

std::vector<double> trace_column(std::span<const TraceRow> rows, const std::string& name) {
  std::vector<double> out;
  out.reserve(rows.size());
  auto take = [&](auto f) {
    for (const TraceRow& r : rows) out.push_back(f(r));
    return out;
  };
  if (name == "t") return take([](const TraceRow& r) { return r.t; });
  if (name == "E") return take([](const TraceRow& r) { return r.entropy; });
  if (name == "G") return take([](const TraceRow& r) { return r.gibbs; });
  if (name == "G_rel") return take([](const TraceRow& r) { return r.relative_gibbs; });
  if (name == "Psi") return take([](const TraceRow& r) { return r.psi; });
  if (name == "Q") return take([](const TraceRow& r) { return r.charge; });
  if (name == "l1_dist") return take([](const TraceRow& r) { return r.l1_dist; });
  if (name == "h1_dist") return take([](const TraceRow& r) { return r.h1_dist; });
  if (name == "photons") return take([](const TraceRow& r) { return r.photons; });
  if (name.rfind("mass_", 0) == 0) {
    std::size_t i = 0;
    try {
      i = std::stoul(name.substr(5));
    } catch (const std::exception&) {
      i = 0;
    }
    if (i >= 1 && (rows.empty() || i <= rows.front().masses.size()))
      return take([i](const TraceRow& r) { return r.masses[i - 1]; });
  }
  throw ConfigError("unknown trace column '" + name + "'");
}

int cmd_validate(const RunConfig& cfg, const std::string& out, std::ostream& log) {
  const ValidationReport r = validate_config(cfg);
  log << r.text();
  ensure_directory(out);
  json j = r.to_json();
  j["config_hash"] = config_hash(cfg.source);
  j["seed"] = cfg.seed;
  write_json(path_in(out, "validation.json"), j);
  return r.pass() ? exit_ok : exit_check_failed;
}

int cmd_simulate(const RunConfig& cfg, const std::string& out, std::ostream& log) {
  require_valid(cfg);
  const Stopwatch clock;
  ensure_directory(out);
  std::vector<std::string> outputs{"diagnostics.csv"};
  std::vector<TraceSink*> sinks;
  DiagnosticsCsvSink csv(path_in(out, "diagnostics.csv"), cfg.material.species());
  sinks.push_back(&csv);
  std::optional<SnapshotCsvSink> snaps;
  if (cfg.write_snapshots) {
    ensure_directory(path_in(out, "snapshots"));
    snaps.emplace(path_in(out, "snapshots"));
    sinks.push_back(&*snaps);
    outputs.push_back("snapshots/");
  }
  Simulation sim;
  try {
    sim = simulate(cfg, cfg.tensors, cfg.solver, sinks);
  } catch (const StepError& e) {
    json extra{{"status", "failed"}, {"error", e.what()}};
    write_manifest(out, "simulate", cfg, outputs, extra, clock.seconds());
    throw;
  }
  write_state_csv(path_in(out, "final_state.csv"), sim.trace.final_state);
  outputs.push_back("final_state.csv");
  json extra{{"status", "ok"},
             {"statistics", statistics_json(sim.trace.stats)},
             {"stationary", stationary_summary(sim.stationary)}};
  write_manifest(out, "simulate", cfg, outputs, extra, clock.seconds());
  const TraceRow& last = sim.trace.rows.back();
  log << "simulated to t = " << num(last.t) << " in " << sim.trace.stats.steps << " steps ("
      << sim.trace.stats.retries << " retries), min density " << num(sim.trace.stats.min_density)
      << "\n";
  if (!sim.stationary.genuine) log << sim.stationary.reason << "\n";
  return exit_ok;
}

int cmd_stationary(const RunConfig& cfg, const std::string& out, std::ostream& log) {
  require_valid(cfg);
  ensure_directory(out);
  const StationaryState s = solve_stationary(cfg.material, cfg.tensors, cfg.analysis.stationary);
  write_state_csv(path_in(out, "stationary.csv"), s.as_state());

  json j;
  j["mode"] = to_string(s.mode);
  j["c"] = vec_json(s.c);
  j["phi_max"] = number_json(s.phi_max);
  j["residual"] = number_json(s.residual);
  j["charge_residual"] = number_json(s.charge_residual);
  j["potential_residual"] = number_json(s.potential_residual);
  j["potential_spread"] = number_json(s.potential_spread);
  j["reaction_residual"] = number_json(s.reaction_residual);
  j["iterations"] = s.iterations;
  j["residual_history"] = vec_json(s.residual_history);

  const CarrierState n0 = initial_state(cfg.excitation, cfg.grid, cfg.material);
  double n0_max = 0.0;
  for (const Field& f : n0.densities) n0_max = std::max(n0_max, f.max_abs());
  try {
    const ReactionBounds rb = reaction_bounds(cfg.tensors, n0_max);
    const AprioriBounds ab = apriori_bounds(s, rb, cfg.material.external_charge());
    j["apriori"] = {{"c_bound", number_json(ab.c_bound)}, {"n_bound", number_json(ab.n_bound)},
                    {"c_norm", number_json(ab.c_norm)},   {"n_norm", number_json(ab.n_norm)},
                    {"pass", ab.pass},                    {"norm", ab.norm}};
  } catch (const DegenerateBoundError& e) {
    j["apriori"] = nullptr;
    j["apriori_reason"] = e.what();
  }
  write_json(path_in(out, "stationary.json"), j);
  log << "stationary state (" << to_string(s.mode) << "): Phi_inf = " << num(s.phi_max)
      << ", ||mu_inf|| = " << num(s.potential_residual) << ", " << s.iterations
      << " iterations\n";
  return exit_ok;
}

int cmd_bound(const RunConfig& cfg, const std::string& out, std::ostream& log) {
  require_valid(cfg);
  ensure_directory(out);
  Simulation sim = simulate(cfg, cfg.tensors, cfg.solver, {});
  if (!sim.stationary.genuine)
    throw InfeasibleError("decay bound needs an equilibrium: " + sim.stationary.reason);
  const BoundReport b = bound_report(cfg.material, cfg.tensors, *sim.stationary.state,
                                     sim.initial);
  const DecayVerdict v = verify_decay_estimate(sim.trace.rows, b);
  write_margins_csv(path_in(out, "margins_dissipation.csv"), v.dissipation);
  write_margins_csv(path_in(out, "margins_distance.csv"), v.distance);

  json j = bound_json(b);
  j["verification"] = {{"pass", v.pass},
                       {"slack", number_json(v.slack)},
                       {"first_violation", number_json(v.first_violation)},
                       {"first_violation_check", v.first_violation_check}};
  write_json(path_in(out, "bound.json"), j);
  log << "C1 = " << num(b.constants.c1) << ", C2 = " << num(b.constants.c2)
      << (b.extrapolated ? " (k > 2: extrapolated)" : "") << "\n"
      << "decay estimate " << (v.pass ? "PASS" : "FAIL");
  if (!v.pass) log << " at t = " << num(v.first_violation) << " (" << v.first_violation_check << ")";
  log << "\n";
  return v.pass ? exit_ok : exit_check_failed;
}

int cmd_yield(const RunConfig& cfg, const std::string& out, std::ostream& log) {
  require_valid(cfg);
  const double tau = cfg.analysis.tau_bar ? *cfg.analysis.tau_bar
                                          : characteristic_time(cfg.tensors);
  if (!(tau > 0.0)) throw ValidationError("tau_bar must be positive");
  ensure_directory(out);
  const ReactionTensors qf = quenching_free(cfg.tensors);
  SolverSettings settings = cfg.solver;
  settings.t_final = tau;
  settings.keep_snapshots = true;
  const Simulation sim = simulate(cfg, qf, settings, {});
  const auto& snaps = sim.trace.snapshots;

  const std::vector<double> t = trace_column(sim.trace.rows, "t");
  const std::vector<double> np = point_trace(snaps, cfg.analysis.yield_point);
  const double local = local_light_yield(t, np, np.front(), tau);
  Field n0_total(cfg.grid);
  for (const Field& f : sim.initial.densities)
    for (std::size_t c = 0; c < f.size(); ++c) n0_total[c] += f[c];
  const double global = global_light_yield(snaps, n0_total, tau);

  json j;
  j["tau_bar"] = tau;
  j["tau_source"] = cfg.analysis.tau_bar ? "config" : "1 / max R";
  j["point"] = {cfg.analysis.yield_point[0], cfg.analysis.yield_point[1]};
  j["local_yield"] = number_json(local);
  j["global_yield"] = number_json(global);
  j["photons"] = number_json(sim.trace.rows.back().photons);
  j["stationary"] = stationary_summary(sim.stationary);

  bool pass = true;
  std::string reason;
  if (!sim.stationary.genuine) {
    reason = sim.stationary.reason;
  } else if (!(sim.trace.rows.front().l1_dist > 0.0)) {
    reason = "n0 = n_inf, so N0bar = 0";
  } else {
    try {
      const BoundReport b = bound_report(cfg.material, qf, *sim.stationary.state, sim.initial);
      const YieldBound y = yield_bound(sim.trace.rows, b.constants.c1, b.constants.c2,
                                       b.inputs.gibbs0, tau);
      pass = y.pass;
      j["bound"] = {{"estimate", number_json(y.estimate)}, {"bound", number_json(y.root)},
                    {"literal", number_json(y.literal)},   {"chain", number_json(y.chain)},
                    {"C1", number_json(b.constants.c1)},   {"C2", number_json(b.constants.c2)},
                    {"G0", number_json(b.inputs.gibbs0)},  {"pass", y.pass}};
    } catch (const DegenerateBoundError& e) {
      reason = e.what();
    }
  }
  if (!reason.empty()) {
    j["bound"] = nullptr;
    j["bound_reason"] = reason;
  }
  write_json(path_in(out, "yield.json"), j);
  log << "tau_bar = " << num(tau) << ", Y_L = " << num(local) << ", Y = " << num(global) << "\n";
  if (!reason.empty()) log << "no yield bound: " << reason << "\n";
  else log << "yield bound " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? exit_ok : exit_check_failed;
}

int cmd_fit_decay(const RunConfig& cfg, const std::string& out, std::ostream& log) {
  require_valid(cfg);
  ensure_directory(out);
  const Simulation sim = simulate(cfg, cfg.tensors, cfg.solver, {});
  const std::vector<double> t = trace_column(sim.trace.rows, "t");
  const std::vector<double> y = trace_column(sim.trace.rows, cfg.analysis.fit_column);
  const DecayFit f = fit_decay(t, y, cfg.analysis.fit_mode);

  json j;
  j["column"] = cfg.analysis.fit_column;
  j["mode"] = f.mode == FitMode::single ? "single" : "double";
  j["samples"] = t.size();
  j["decaying"] = f.decaying;
  j["residual"] = number_json(f.residual);
  j["tail_rate"] = number_json(f.tail_rate);
  if (f.mode == FitMode::single) {
    j["amplitude"] = number_json(f.amp_slow);
    j["tau"] = number_json(f.tau_slow);
  } else {
    j["fast"] = {{"amplitude", number_json(f.amp_fast)}, {"tau", number_json(f.tau_fast)}};
    j["slow"] = {{"amplitude", number_json(f.amp_slow)}, {"tau", number_json(f.tau_slow)}};
  }
  write_json(path_in(out, "decay_fit.json"), j);
  log << "fit of " << cfg.analysis.fit_column << ": tau = ";
  if (f.mode == FitMode::dual) log << num(f.tau_fast) << ", ";
  log << num(f.tau_slow);
  log << (f.decaying ? "" : " (not decaying)") << "\n";
  return exit_ok;
}

int run_command(const std::string& command, const RunConfig& cfg, const std::string& out,
                std::ostream& log) {
  try {
    if (command == "validate") return cmd_validate(cfg, out, log);
    if (command == "simulate") return cmd_simulate(cfg, out, log);
    if (command == "stationary") return cmd_stationary(cfg, out, log);
    if (command == "bound") return cmd_bound(cfg, out, log);
    if (command == "yield") return cmd_yield(cfg, out, log);
    if (command == "fit-decay") return cmd_fit_decay(cfg, out, log);
    log << "error: unknown command '" << command << "'\n";
    return exit_config;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const ValidationError& e) {
    log << "invalid input: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return exit_runtime;
  }
}

int run_commands(const std::string& command, const std::vector<std::string>& configs,
                 const std::optional<std::string>& out, std::optional<std::uint64_t> seed,
                 std::ostream& log) {
  const bool sweep = configs.size() > 1;
  std::vector<int> codes(configs.size(), exit_ok);
  std::vector<std::string> logs(configs.size());

  auto one = [&](std::size_t i) {
    std::ostringstream os;
    try {
      RunConfig cfg = load_config(configs[i]);
      if (seed) cfg.seed = *seed;
      std::string dir = out ? *out : cfg.output_directory;
      if (sweep) dir = (fs::path(dir) / cfg.name).string();
      codes[i] = run_command(command, cfg, dir, os);
    } catch (const ConfigError& e) {
      os << "config error: " << e.what() << "\n";
      codes[i] = exit_config;
    } catch (const std::exception& e) {
      os << "error: " << e.what() << "\n";
      codes[i] = exit_runtime;
    }
    logs[i] = os.str();
  };

  std::size_t workers = 1;
  if (const char* env = std::getenv("SCINTIKIT_THREADS")) {
    try {
      workers = std::max<std::size_t>(1, std::stoul(env));
    } catch (const std::exception&) {
      workers = 1;
    }
  }
  workers = std::min(workers, configs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) one(i);
      });
    for (std::thread& th : pool) th.join();
  }

  // Logs in config order regardless of which worker finished first.
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (sweep) log << "== " << configs[i] << "\n";
    log << logs[i];
  }
  return *std::max_element(codes.begin(), codes.end());
}

}  // namespace scintikit
