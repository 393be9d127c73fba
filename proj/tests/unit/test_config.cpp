#include <catch2/catch.hpp>

#include <filesystem>

#include "builders.hpp"
#include "scintikit/config.hpp"
#include "scintikit/errors.hpp"

using namespace scintikit;
using Catch::Matchers::Contains;

namespace {

const char* minimal = R"({
  "grid": {"extents": [1.0], "cells": [8]},
  "material": {"charges": [0], "mobility": [[1.0]]},
  "excitation": {"energy": 1.0, "track_radius": 1.0, "track_length": 1.0,
                 "excitation_energy": 1.0, "fractions": [1.0]},
  "solver": {"dt": 0.1, "t_final": 1.0}
})";

std::string message_of(const std::string& text) {
  try {
    parse_config(text, "inline.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

nlohmann::json base() { return nlohmann::json::parse(minimal); }

}  // namespace

TEST_CASE("every shipped config parses", "[config]") {
  for (const auto& entry : std::filesystem::directory_iterator(SCINTIKIT_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    INFO(entry.path().string());
    const RunConfig cfg = load_config(entry.path().string());
    CHECK(cfg.name == entry.path().stem().string());
    CHECK(cfg.material.species() == cfg.tensors.species());
  }
}

TEST_CASE("minimal config with defaults", "[config]") {
  const RunConfig cfg = parse_config(minimal);
  CHECK(cfg.grid->cell_count() == 8);
  CHECK(cfg.material.normalization == std::vector<double>{1.0});
  CHECK(cfg.tensors.is_zero());
  CHECK(cfg.solver.adaptive == false);
  CHECK(cfg.analysis.fit_mode == FitMode::single);
  CHECK(cfg.analysis.yield_point[0] == 0.5);
  CHECK(cfg.output_directory == "out");
  CHECK(cfg.seed == 0);
  CHECK(cfg.material.external_charge() == 0.0);
}

TEST_CASE("unknown keys are rejected with their path", "[config]") {
  nlohmann::json j = base();
  j["solver"]["bogus"] = 1;
  CHECK_THAT(message_of(j.dump()), Contains("$.solver.bogus"));
  j = base();
  j["extra"] = true;
  CHECK_THAT(message_of(j.dump()), Contains("$.extra"));
  j = base();
  j["excitation"]["profile"] = {{"kind", "gaussian"}, {"center", {0.5}}, {"width", 0.1}, {"sigma", 2}};
  CHECK_THAT(message_of(j.dump()), Contains("$.excitation.profile.sigma"));
}

TEST_CASE("schema errors name the offending key", "[config]") {
  nlohmann::json j = base();
  j.erase("solver");
  CHECK_THAT(message_of(j.dump()), Contains("$.solver"));
  j = base();
  j["material"]["mobility"] = {{1.0, 2.0}};
  CHECK_THAT(message_of(j.dump()), Contains("$.material.mobility"));
  j = base();
  j["material"]["charges"] = {0.5};
  CHECK_THAT(message_of(j.dump()), Contains("$.material.charges[0]"));
  j = base();
  j["tensors"] = {{"G", {{-1.0}}}};
  CHECK_THAT(message_of(j.dump()), Contains("$.tensors"));
  j = base();
  j["analysis"] = {{"fit_mode", "triple"}};
  CHECK_THAT(message_of(j.dump()), Contains("$.analysis.fit_mode"));
  j = base();
  j["solver"]["dt"] = "fast";
  CHECK_THAT(message_of(j.dump()), Contains("$.solver.dt"));
  j = base();
  j["grid"]["cells"] = {1};
  CHECK_THAT(message_of(j.dump()), Contains("$.grid"));
}

TEST_CASE("syntax errors carry line context", "[config]") {
  const std::string bad = "{\n  \"grid\": {\"extents\": [1.0],\n  \"cells\" [8]}\n}";
  const std::string msg = message_of(bad);
  CHECK_THAT(msg, Contains("line 3"));
  CHECK_THAT(msg, Contains("inline.json"));
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("sparse tensor entries are one-based", "[config]") {
  nlohmann::json j = base();
  j["material"] = {{"charges", {-1, 1}}, {"mobility", {{1.0, 0.0}, {0.0, 1.0}}}};
  j["excitation"]["fractions"] = {0.5, 0.5};
  j["tensors"] = {{"R_quadratic", {{"entries", {{1, 1, 2, 3.0}, {2, 2, 1, 4.0}}}}},
                  {"G_auger", {{"entries", {{2, 2, 2, 1, 5.0}}}}}};
  const RunConfig cfg = parse_config(j.dump());
  CHECK(cfg.tensors.quadratic_recombination(0, 0, 1) == 3.0);
  CHECK(cfg.tensors.quadratic_recombination(1, 1, 0) == 4.0);
  CHECK(cfg.tensors.auger_quenching(1, 1, 1, 0) == 5.0);
  j["tensors"] = {{"R_quadratic", {{"entries", {{0, 1, 1, 1.0}}}}}};
  CHECK_THAT(message_of(j.dump()), Contains("$.tensors.R_quadratic"));
}

TEST_CASE("background charge from the excitation", "[config]") {
  nlohmann::json j = base();
  j["material"]["charges"] = {1};
  j["excitation"]["external_charge"] = "balance";
  CHECK(parse_config(j.dump()).material.external_charge() == Approx(-1.0 / testkit::pi));  // N = 1 / pi
  j["excitation"]["external_charge"] = 0.25;
  CHECK(parse_config(j.dump()).material.external_charge() == Approx(0.25));
}

TEST_CASE("manifest round trip and hashing", "[config]") {
  const RunConfig a = parse_config(minimal);
  nlohmann::json manifest = {{"tool", "scintikit"}, {"seed", 99}, {"config", a.source}};
  const RunConfig b = parse_config(manifest.dump(), "manifest.json");
  CHECK(b.source == a.source);
  CHECK(b.seed == 99);
  CHECK(config_hash(a.source) == config_hash(b.source));
  CHECK(config_hash(a.source).size() == 16);
  nlohmann::json changed = a.source;
  changed["solver"]["dt"] = 0.2;
  CHECK(config_hash(changed) != config_hash(a.source));
}

TEST_CASE("length scale rescales physical track geometry", "[config]") {
  nlohmann::json j = base();
  j["excitation"]["length_scale"] = 2.0;
  const RunConfig cfg = parse_config(j.dump());
  CHECK(cfg.excitation.track_radius == 0.5);
  CHECK(*cfg.excitation.track_length.value == 0.5);
}
