#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "scintikit/analysis.hpp"
#include "scintikit/grid.hpp"

namespace scintikit {

/// %.17g, or "nan".
std::string format_number(double v);

/// Creates the directory (and parents); throws Error when that fails.
void ensure_directory(const std::string& path);

void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const nlohmann::json& j);

/// cell,x[,y],n_1..n_k,phi
void write_state_csv(const std::string& path, const CarrierState& state);

/// t,lhs,rhs,margin
void write_margins_csv(const std::string& path, std::span<const MarginRow> rows);

/// JSON number, with non-finite values as null.
nlohmann::json number_json(double v);

}  // namespace scintikit
