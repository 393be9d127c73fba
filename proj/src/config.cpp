#include "scintikit/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "scintikit/errors.hpp"

namespace scintikit {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) fail(path + "." + key, "unknown key");
}

const json& need(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path + "." + key, "missing required key");
  return j.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double number_or(const json& j, const std::string& path, const char* key, double fallback) {
  return j.contains(key) ? number(j.at(key), path + "." + key) : fallback;
}

bool boolean_or(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) fail(path + "." + key, "expected true or false");
  return j.at(key).get<bool>();
}

std::size_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(path, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::vector<double> vec(const json& j, const std::string& path, std::size_t expect = 0) {
  if (!j.is_array()) fail(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  if (expect && out.size() != expect)
    fail(path, "expected " + std::to_string(expect) + " entries, got " + std::to_string(out.size()));
  return out;
}

Eigen::MatrixXd matrix(const json& j, const std::string& path, std::size_t k) {
  if (!j.is_array() || j.size() != k) fail(path, "expected a " + std::to_string(k) + " x " +
                                                     std::to_string(k) + " nested array");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const auto row = vec(j[i], path + "[" + std::to_string(i) + "]", k);
    for (std::size_t c = 0; c < k; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

/// Sparse entries [i, j, h, (m,) value] with 1-based indices.
template <class T, std::size_t Rank>
void entries(const json& j, const std::string& path, std::size_t k, T& t) {
  if (!j.is_array()) fail(path, "expected an array of entries");
  for (std::size_t e = 0; e < j.size(); ++e) {
    const std::string p = path + "[" + std::to_string(e) + "]";
    if (!j[e].is_array() || j[e].size() != Rank + 1)
      fail(p, "expected " + std::to_string(Rank) + " one-based indices and a value");
    std::array<std::size_t, Rank> idx{};
    for (std::size_t a = 0; a < Rank; ++a) {
      const std::size_t v = count(j[e][a], p + "[" + std::to_string(a) + "]");
      if (v < 1 || v > k) fail(p, "index out of range 1.." + std::to_string(k));
      idx[a] = v - 1;
    }
    const double value = number(j[e][Rank], p + "[" + std::to_string(Rank) + "]");
    if constexpr (Rank == 3) t(idx[0], idx[1], idx[2]) += value;
    else t(idx[0], idx[1], idx[2], idx[3]) += value;
  }
}

Tensor3 tensor3(const json& j, const std::string& path, std::size_t k) {
  Tensor3 t(k);
  if (j.is_object()) {
    allow_keys(j, path, {"entries"});
    entries<Tensor3, 3>(need(j, path, "entries"), path + ".entries", k, t);
    return t;
  }
  if (!j.is_array() || j.size() != k) fail(path, "expected k nested k x k arrays or {entries}");
  for (std::size_t i = 0; i < k; ++i) {
    const Eigen::MatrixXd m = matrix(j[i], path + "[" + std::to_string(i) + "]", k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        t(i, a, b) = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
  return t;
}

Tensor4 tensor4(const json& j, const std::string& path, std::size_t k) {
  Tensor4 t(k);
  if (j.is_object()) {
    allow_keys(j, path, {"entries"});
    entries<Tensor4, 4>(need(j, path, "entries"), path + ".entries", k, t);
    return t;
  }
  if (!j.is_array() || j.size() != k) fail(path, "expected a dense k^4 array or {entries}");
  for (std::size_t i = 0; i < k; ++i) {
    const json& ji = j[i];
    if (!ji.is_array() || ji.size() != k) fail(path, "expected a dense k^4 array");
    for (std::size_t a = 0; a < k; ++a) {
      const Eigen::MatrixXd m = matrix(ji[a], path + "[" + std::to_string(i) + "][" +
                                                  std::to_string(a) + "]", k);
      for (std::size_t b = 0; b < k; ++b)
        for (std::size_t c = 0; c < k; ++c)
          t(i, a, b, c) = m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c));
    }
  }
  return t;
}

std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  std::ostringstream os;
  os << "line " << line << ", column " << col;
  return os.str();
}

}  // namespace

std::string config_hash(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig config_from_json(const json& root) {
  allow_keys(root, "$", {"grid", "material", "tensors", "excitation", "solver", "analysis",
                         "output", "seed"});
  RunConfig cfg;
  cfg.source = root;

  // grid
  {
    const std::string p = "$.grid";
    const json& g = need(root, "$", "grid");
    allow_keys(g, p, {"extents", "cells"});
    const auto ext = vec(need(g, p, "extents"), p + ".extents");
    const json& cj = need(g, p, "cells");
    if (!cj.is_array()) fail(p + ".cells", "expected an array");
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < cj.size(); ++i)
      cells.push_back(count(cj[i], p + ".cells[" + std::to_string(i) + "]"));
    try {
      cfg.grid = std::make_shared<const Grid>(ext, cells);
    } catch (const ValidationError& e) {
      fail(p, e.what());
    }
  }

  // material
  std::size_t k = 0;
  {
    const std::string p = "$.material";
    const json& m = need(root, "$", "material");
    allow_keys(m, p, {"charges", "mobility", "normalization", "permittivity"});
    const json& zj = need(m, p, "charges");
    if (!zj.is_array() || zj.empty()) fail(p + ".charges", "expected a nonempty array");
    for (std::size_t i = 0; i < zj.size(); ++i) {
      if (!zj[i].is_number_integer()) fail(p + ".charges[" + std::to_string(i) + "]", "expected an integer");
      cfg.material.charges.push_back(zj[i].get<int>());
    }
    k = cfg.material.charges.size();
    cfg.material.mobility = matrix(need(m, p, "mobility"), p + ".mobility", k);
    cfg.material.normalization =
        m.contains("normalization") ? vec(m.at("normalization"), p + ".normalization", k)
                                    : std::vector<double>(k, 1.0);
    cfg.material.permittivity = number_or(m, p, "permittivity", 1.0);
  }

  // tensors
  {
    const std::string p = "$.tensors";
    cfg.tensors = ReactionTensors::zeros(k);
    if (root.contains("tensors")) {
      const json& t = root.at("tensors");
      allow_keys(t, p, {"R", "G", "E", "R_quadratic", "G_quadratic", "G_auger"});
      if (t.contains("R")) cfg.tensors.recombination = matrix(t.at("R"), p + ".R", k);
      if (t.contains("G")) cfg.tensors.quenching = matrix(t.at("G"), p + ".G", k);
      if (t.contains("E")) cfg.tensors.exchange = matrix(t.at("E"), p + ".E", k);
      if (t.contains("R_quadratic"))
        cfg.tensors.quadratic_recombination = tensor3(t.at("R_quadratic"), p + ".R_quadratic", k);
      if (t.contains("G_quadratic"))
        cfg.tensors.quadratic_quenching = tensor3(t.at("G_quadratic"), p + ".G_quadratic", k);
      if (t.contains("G_auger"))
        cfg.tensors.auger_quenching = tensor4(t.at("G_auger"), p + ".G_auger", k);
    }
    try {
      cfg.tensors.validate();
    } catch (const ValidationError& e) {
      fail(p, e.what());
    }
  }

  // excitation
  {
    const std::string p = "$.excitation";
    const json& e = need(root, "$", "excitation");
    allow_keys(e, p, {"energy", "track_radius", "track_length", "excitation_energy", "fractions",
                      "profile", "external_charge", "length_scale"});
    ExcitationSpec& x = cfg.excitation;
    x.energy = number(need(e, p, "energy"), p + ".energy");
    x.track_radius = number(need(e, p, "track_radius"), p + ".track_radius");
    x.excitation_energy = number(need(e, p, "excitation_energy"), p + ".excitation_energy");
    const json& tl = need(e, p, "track_length");
    if (tl.is_number()) {
      x.track_length.value = tl.get<double>();
    } else {
      allow_keys(tl, p + ".track_length", {"coefficient", "exponent"});
      x.track_length.coefficient =
          number(need(tl, p + ".track_length", "coefficient"), p + ".track_length.coefficient");
      x.track_length.exponent = number_or(tl, p + ".track_length", "exponent", 0.0);
    }
    if (e.contains("length_scale")) {
      // Physical lengths in units of the rescaling length l*.
      const double l = number(e.at("length_scale"), p + ".length_scale");
      if (!(l > 0.0)) fail(p + ".length_scale", "must be positive");
      x.track_radius /= l;
      if (x.track_length.value) *x.track_length.value /= l;
      else x.track_length.coefficient /= l;
    }
    x.fractions = vec(need(e, p, "fractions"), p + ".fractions", k);
    if (e.contains("profile")) {
      const std::string pp = p + ".profile";
      const json& pr = e.at("profile");
      allow_keys(pr, pp, {"kind", "center", "width", "floor"});
      const std::string kind = need(pr, pp, "kind").is_string() ? pr.at("kind").get<std::string>() : "";
      if (kind == "uniform") {
        x.profile.kind = DepositionProfile::Kind::uniform;
      } else if (kind == "gaussian") {
        x.profile.kind = DepositionProfile::Kind::gaussian;
        const auto c = vec(need(pr, pp, "center"), pp + ".center");
        if (c.size() != static_cast<std::size_t>(cfg.grid->dimension()))
          fail(pp + ".center", "needs one coordinate per grid axis");
        for (std::size_t a = 0; a < c.size(); ++a) x.profile.center[a] = c[a];
        x.profile.width = number(need(pr, pp, "width"), pp + ".width");
      } else {
        fail(pp + ".kind", "expected \"uniform\" or \"gaussian\"");
      }
      if (pr.contains("floor")) x.profile.floor = number(pr.at("floor"), pp + ".floor");
    }
    if (e.contains("external_charge")) {
      const json& q = e.at("external_charge");
      if (q.is_string() && q.get<std::string>() == "balance") x.external_charge.reset();
      else x.external_charge = number(q, p + ".external_charge");
    } else {
      x.external_charge = 0.0;
    }
    try {
      x.validate();
    } catch (const ValidationError& err) {
      fail(p, err.what());
    }
  }

  // solver
  {
    const std::string p = "$.solver";
    const json& s = need(root, "$", "solver");
    allow_keys(s, p, {"dt", "t_final", "adaptive", "safeguard_factor", "gibbs_tolerance",
                      "max_retries", "linear_tolerance", "output_stride", "scheme", "snapshots"});
    SolverSettings& st = cfg.solver;
    st.dt = number(need(s, p, "dt"), p + ".dt");
    st.t_final = number(need(s, p, "t_final"), p + ".t_final");
    st.adaptive = boolean_or(s, p, "adaptive", false);
    st.safeguard_factor = number_or(s, p, "safeguard_factor", st.safeguard_factor);
    st.gibbs_tolerance = number_or(s, p, "gibbs_tolerance", st.gibbs_tolerance);
    if (s.contains("max_retries")) st.max_retries = static_cast<int>(count(s.at("max_retries"), p + ".max_retries"));
    st.linear_tolerance = number_or(s, p, "linear_tolerance", st.linear_tolerance);
    if (s.contains("output_stride")) st.output_stride = count(s.at("output_stride"), p + ".output_stride");
    if (s.contains("scheme")) {
      const json& sc = s.at("scheme");
      const std::string name = sc.is_string() ? sc.get<std::string>() : "";
      if (name == "split-implicit") st.scheme = Scheme::split_implicit;
      else if (name == "fully-explicit") st.scheme = Scheme::fully_explicit;
      else fail(p + ".scheme", "expected \"split-implicit\" or \"fully-explicit\"");
    }
    cfg.write_snapshots = boolean_or(s, p, "snapshots", false);
    try {
      st.validate();
    } catch (const ValidationError& err) {
      fail(p, err.what());
    }
  }

  // analysis
  {
    const std::string p = "$.analysis";
    AnalysisOptions& a = cfg.analysis;
    a.h4.weights.assign(k, 1.0);
    a.h4.shifts.assign(k, 0.0);
    if (root.contains("analysis")) {
      const json& an = root.at("analysis");
      allow_keys(an, p, {"tau_bar", "fit_mode", "fit_column", "c_direction",
                         "stationary_normalization", "stationary_tolerance", "yield_point",
                         "h4", "samples"});
      if (an.contains("tau_bar")) a.tau_bar = number(an.at("tau_bar"), p + ".tau_bar");
      if (an.contains("fit_mode")) {
        const std::string m = an.at("fit_mode").is_string() ? an.at("fit_mode").get<std::string>() : "";
        if (m == "single") a.fit_mode = FitMode::single;
        else if (m == "double") a.fit_mode = FitMode::dual;
        else fail(p + ".fit_mode", "expected \"single\" or \"double\"");
      }
      if (an.contains("fit_column")) {
        if (!an.at("fit_column").is_string()) fail(p + ".fit_column", "expected a string");
        a.fit_column = an.at("fit_column").get<std::string>();
      }
      if (an.contains("c_direction"))
        a.stationary.c_direction = vec(an.at("c_direction"), p + ".c_direction", k);
      a.stationary.normalization = number_or(an, p, "stationary_normalization", 1.0);
      a.stationary.tolerance = number_or(an, p, "stationary_tolerance", a.stationary.tolerance);
      if (an.contains("yield_point")) {
        const auto y = vec(an.at("yield_point"), p + ".yield_point");
        if (y.size() != static_cast<std::size_t>(cfg.grid->dimension()))
          fail(p + ".yield_point", "needs one coordinate per grid axis");
        for (std::size_t i = 0; i < y.size(); ++i) a.yield_point[i] = y[i];
      } else {
        for (int ax = 0; ax < cfg.grid->dimension(); ++ax)
          a.yield_point[ax] = 0.5 * cfg.grid->extent(ax);
      }
      if (an.contains("h4")) {
        const std::string hp = p + ".h4";
        const json& h = an.at("h4");
        allow_keys(h, hp, {"weights", "shifts", "sign"});
        if (h.contains("weights")) a.h4.weights = vec(h.at("weights"), hp + ".weights", k);
        if (h.contains("shifts")) a.h4.shifts = vec(h.at("shifts"), hp + ".shifts", k);
        if (h.contains("sign")) {
          const std::string sgn = h.at("sign").is_string() ? h.at("sign").get<std::string>() : "";
          if (sgn == "as-printed") a.h4.sign = RateSign::as_printed;
          else if (sgn == "production") a.h4.sign = RateSign::production;
          else fail(hp + ".sign", "expected \"as-printed\" or \"production\"");
        }
      }
      if (an.contains("samples")) a.samples = count(an.at("samples"), p + ".samples");
    } else {
      for (int ax = 0; ax < cfg.grid->dimension(); ++ax)
        a.yield_point[ax] = 0.5 * cfg.grid->extent(ax);
    }
  }

  if (root.contains("output")) {
    const json& o = root.at("output");
    allow_keys(o, "$.output", {"directory"});
    if (o.contains("directory")) {
      if (!o.at("directory").is_string()) fail("$.output.directory", "expected a string");
      cfg.output_directory = o.at("directory").get<std::string>();
    }
  }
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned() && !root.at("seed").is_number_integer())
      fail("$.seed", "expected an unsigned integer");
    cfg.seed = root.at("seed").get<std::uint64_t>();
  }

  // q* carries Q*, given or balancing the initial carriers.
  const std::vector<Field> n0 = initial_densities(cfg.excitation, cfg.grid);
  cfg.material.background_charge = external_charge_field(cfg.excitation, n0, cfg.material.charges);
  for (double c : cfg.material.normalization)
    if (!(c > 0.0)) fail("$.material.normalization", "entries must be positive");
  if (!(cfg.material.permittivity > 0.0)) fail("$.material.permittivity", "must be positive");
  // Symmetry and definiteness of M are hypotheses: the validate command
  // reports them and the other commands refuse to run without them.
  return cfg;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + origin + ": syntax error at " + line_context(text, e.byte) +
                      ": " + e.what());
  }
  std::uint64_t manifest_seed = 0;
  bool manifest = false;
  if (j.is_object() && j.contains("tool") && j.contains("config")) {
    manifest = true;
    if (j.contains("seed")) manifest_seed = j.at("seed").get<std::uint64_t>();
    j = j.at("config");
  }
  RunConfig cfg = config_from_json(j);
  if (manifest) cfg.seed = manifest_seed;
  cfg.name = std::filesystem::path(origin).stem().string();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace scintikit
