#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scintikit/config.hpp"
#include "scintikit/evolve.hpp"
#include "scintikit/stationary.hpp"

namespace scintikit {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes shared by every command.
enum ExitCode : int {
  exit_ok = 0,
  exit_check_failed = 1,  ///< a hypothesis or an estimate did not hold
  exit_config = 2,        ///< unreadable or invalid configuration
  exit_runtime = 3,       ///< solver, feasibility or I/O failure
};

struct Check {
  std::string id;
  std::string title;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<Check> checks;
  bool pass() const;
  std::string text() const;
  nlohmann::json to_json() const;
};

/// H1-H5 plus charge and Poisson compatibility. Never throws on a failed
/// hypothesis; it lands in the report instead.
ValidationReport validate_config(const RunConfig& cfg);

/// Stationary state or the reason there is none.
struct StationaryAttempt {
  std::optional<StationaryState> state;
  std::string reason;
  /// mu_inf = 0 and K(n_inf) n_inf = 0 up to 1e-8, so n_inf is the limit
  /// the dynamics relaxes to.
  bool genuine = false;
};
StationaryAttempt attempt_stationary(const RunConfig& cfg);

/// Named column of a trace: t, E, G, G_rel, Psi, Q, l1_dist, h1_dist,
/// photons or mass_<i>. Throws ConfigError for anything else.
std::vector<double> trace_column(std::span<const TraceRow> rows, const std::string& name);

int cmd_validate(const RunConfig& cfg, const std::string& out, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, const std::string& out, std::ostream& log);
int cmd_stationary(const RunConfig& cfg, const std::string& out, std::ostream& log);
int cmd_bound(const RunConfig& cfg, const std::string& out, std::ostream& log);
int cmd_yield(const RunConfig& cfg, const std::string& out, std::ostream& log);
int cmd_fit_decay(const RunConfig& cfg, const std::string& out, std::ostream& log);

/// Dispatches by name and maps exceptions to exit codes. Errors are
/// printed to log.
int run_command(const std::string& command, const RunConfig& cfg, const std::string& out,
                std::ostream& log);

/// Loads each config and runs the command, one output directory per config
/// (out/<name>) when there are several. Worker count from SCINTIKIT_THREADS.
/// Returns the largest exit code.
int run_commands(const std::string& command, const std::vector<std::string>& configs,
                 const std::optional<std::string>& out, std::optional<std::uint64_t> seed,
                 std::ostream& log);

}  // namespace scintikit
