#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scintikit/analysis.hpp"
#include "scintikit/evolve.hpp"
#include "scintikit/grid.hpp"
#include "scintikit/kinetics.hpp"
#include "scintikit/material.hpp"
#include "scintikit/stationary.hpp"
#include "scintikit/track.hpp"

namespace scintikit {

struct H4Options {
  std::vector<double> weights;  ///< pi_i, default all ones
  std::vector<double> shifts;   ///< lambda_i, default zeros
  RateSign sign = RateSign::as_printed;
};

struct AnalysisOptions {
  std::optional<double> tau_bar;
  FitMode fit_mode = FitMode::single;
  std::string fit_column = "mass_1";
  StationaryOptions stationary;
  Point yield_point{0.5, 0.5};
  H4Options h4;
  std::size_t samples = 64;
};

/// Everything a command needs, parsed and validated.
struct RunConfig {
  std::shared_ptr<const Grid> grid;
  MaterialParams material;
  ReactionTensors tensors;
  ExcitationSpec excitation;
  SolverSettings solver;
  bool write_snapshots = false;
  AnalysisOptions analysis;
  std::string output_directory = "out";
  std::uint64_t seed = 0;
  nlohmann::json source;  ///< the configuration as given
  std::string name;       ///< file stem, used by sweeps
};

/// Parses and validates; throws ConfigError with a key path or a line and
/// column for syntax errors. A run manifest is accepted too: its embedded
/// configuration and seed are used.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& origin = "<string>");
RunConfig config_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit hash of the canonical (sorted, compact) JSON text.
std::string config_hash(const nlohmann::json& j);

}  // namespace scintikit
