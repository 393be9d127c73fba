#include "scintikit/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "scintikit/errors.hpp"

namespace scintikit {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec || !std::filesystem::is_directory(path))
    throw Error("cannot create output directory " + path + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("write to " + path + " failed");
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_state_csv(const std::string& path, const CarrierState& state) {
  std::string s = "cell,x";
  const Grid& g = state.grid();
  if (g.dimension() == 2) s += ",y";
  for (std::size_t i = 1; i <= state.species(); ++i) s += ",n_" + std::to_string(i);
  s += ",phi\n";
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const Point p = g.center(c);
    s += std::to_string(c) + "," + format_number(p[0]);
    if (g.dimension() == 2) s += "," + format_number(p[1]);
    for (const Field& f : state.densities) s += "," + format_number(f[c]);
    s += "," + format_number(state.potential[c]) + "\n";
  }
  write_text(path, s);
}

void write_margins_csv(const std::string& path, std::span<const MarginRow> rows) {
  std::string s = "t,lhs,rhs,margin\n";
  for (const MarginRow& r : rows)
    s += format_number(r.t) + "," + format_number(r.lhs) + "," + format_number(r.rhs) + "," +
         format_number(r.margin) + "\n";
  write_text(path, s);
}

nlohmann::json number_json(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace scintikit
