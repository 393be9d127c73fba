#include <catch2/catch.hpp>

#include <cmath>
#include <limits>

#include "builders.hpp"
#include "scintikit/analysis.hpp"
#include "scintikit/errors.hpp"

using namespace scintikit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using testkit::pi;

namespace {

DecayInputs unit_inputs() {
  DecayInputs in;
  in.k1 = in.k_inf = in.mobility_min = in.permittivity = in.poincare = 1.0;
  in.phi_max = in.external_charge = in.gibbs0 = 0.0;
  return in;
}

BoundReport report(double c1, double c2, double g0) {
  BoundReport b;
  b.constants = {c1, c2};
  b.inputs.gibbs0 = g0;
  return b;
}

TraceRow row(double t, double g_rel, double psi, double l1, double h1) {
  TraceRow r;
  r.t = t;
  r.relative_gibbs = g_rel;
  r.psi = psi;
  r.l1_dist = l1;
  r.h1_dist = h1;
  return r;
}

}  // namespace

TEST_CASE("Poincare constant", "[analysis]") {
  CHECK_THAT(poincare_constant(*Grid::interval(1.0, 4)), WithinRel(1.0 / (pi * pi), 1e-15));
  CHECK_THAT(poincare_constant(*Grid::rectangle(1.0, 1.0, 4, 4)), WithinRel(2.0 / (pi * pi), 1e-15));
  CHECK_THAT(poincare_constant(*Grid::interval(1.0, 4)), WithinAbs(0.101321, 1e-6));
}

TEST_CASE("decay constants", "[analysis]") {
  DecayInputs in = unit_inputs();
  DecayConstants c = decay_constants(in);
  CHECK(c.c1 == 1.0);
  CHECK(c.c2 == 7.0);

  in.external_charge = 1.0;
  c = decay_constants(in);
  CHECK_THAT(c.c1, WithinRel(1.0 / 6.0, 1e-15));
  CHECK(c.c2 == 10.0);
  in.external_charge = -1.0;  // only |Q*| enters
  CHECK_THAT(decay_constants(in).c1, WithinRel(1.0 / 6.0, 1e-15));

  // G0 enters C2 with weight 1/2; Phi doubles in the exponent.
  in = unit_inputs();
  in.gibbs0 = 2.0;
  CHECK(decay_constants(in).c2 == 8.0);
  in = unit_inputs();
  in.phi_max = std::log(2.0);
  // X = 4: C1^-1 = 1/2 * 4 * 4 * 5 = 40, C2 = 12 + 4
  CHECK_THAT(decay_constants(in).c1, WithinRel(1.0 / 40.0, 1e-14));
  CHECK_THAT(decay_constants(in).c2, WithinRel(16.0, 1e-14));
}

TEST_CASE("doubling K_inf more than quadruples the decay time", "[analysis][property]") {
  for (double k : {1.0, 2.0, 5.0}) {
    DecayInputs in = unit_inputs();
    in.k_inf = k;
    const double t1 = 1.0 / decay_constants(in).c1;
    in.k_inf = 2.0 * k;
    const double t2 = 1.0 / decay_constants(in).c1;
    CHECK(t2 > 4.0 * t1);
  }
}

TEST_CASE("degenerate decay inputs", "[analysis]") {
  DecayInputs in = unit_inputs();
  in.k1 = 0.0;
  CHECK_THROWS_AS(decay_constants(in), DegenerateBoundError);
  in = unit_inputs();
  in.mobility_min = 0.0;
  CHECK_THROWS_AS(decay_constants(in), DegenerateBoundError);
  in = unit_inputs();
  in.permittivity = 0.0;
  CHECK_THROWS_AS(decay_constants(in), DegenerateBoundError);
}

TEST_CASE("decay estimate verification", "[analysis]") {
  const BoundReport b = report(0.5, 10.0, 1.0);
  std::vector<TraceRow> eq{row(0, 0, 0, 0, 0), row(1, 0, 0, 0, 0), row(2, 0, 0, 0, 0)};
  CHECK(verify_decay_estimate(eq, b).pass);

  std::vector<TraceRow> good;
  for (int m = 0; m <= 10; ++m) {
    const double t = 0.5 * m, e = std::exp(-t);
    good.push_back(row(t, e, e, 0.5 * e, 0.5 * e));
  }
  const DecayVerdict ok = verify_decay_estimate(good, b);
  CHECK(ok.pass);
  CHECK(std::isnan(ok.first_violation));
  REQUIRE(ok.dissipation.size() == good.size());
  CHECK_THAT(ok.dissipation[2].lhs, WithinRel(0.5 * std::exp(-1.0), 1e-15));
  CHECK_THAT(ok.distance[2].rhs, WithinRel(10.0 * std::exp(-0.5), 1e-15));

  std::vector<TraceRow> bad = good;
  for (std::size_t m = 3; m < bad.size(); ++m) bad[m].l1_dist *= 1e6;
  const DecayVerdict v = verify_decay_estimate(bad, b);
  CHECK_FALSE(v.pass);
  CHECK(v.first_violation == 1.5);
  CHECK(v.first_violation_check.find("dist") != std::string::npos);
  CHECK(v.distance[3].margin < 0.0);

  bad = good;
  bad[1].relative_gibbs = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(verify_decay_estimate(bad, b), ValidationError);
}

TEST_CASE("single exponential fit", "[analysis]") {
  std::vector<double> t, y;
  for (int i = 0; i <= 20; ++i) {
    t.push_back(0.25 * i);
    y.push_back(std::exp(-t.back()));
  }
  const DecayFit f = fit_decay(t, y, FitMode::single);
  CHECK(f.decaying);
  CHECK_THAT(f.tau_slow, WithinAbs(1.0, 1e-10));
  CHECK_THAT(f.amp_slow, WithinAbs(1.0, 1e-10));

  const std::vector<double> flat(t.size(), 3.0);
  const DecayFit c = fit_decay(t, flat, FitMode::single);
  CHECK_FALSE(c.decaying);
  CHECK(std::isinf(c.tau_slow));

  CHECK_THROWS_AS(fit_decay(std::span(t).first(5), std::span(y).first(5), FitMode::single),
                  ValidationError);
}

TEST_CASE("bi-exponential fit", "[analysis]") {
  std::vector<double> t, y;
  for (int i = 0; i < 200; ++i) {
    t.push_back(30.0 * i / 199.0);
    y.push_back(2.0 * std::exp(-t.back()) + 0.5 * std::exp(-t.back() / 10.0));
  }
  const DecayFit f = fit_decay(t, y, FitMode::dual);
  CHECK_THAT(f.amp_fast, WithinRel(2.0, 0.01));
  CHECK_THAT(f.tau_fast, WithinRel(1.0, 0.01));
  CHECK_THAT(f.amp_slow, WithinRel(0.5, 0.01));
  CHECK_THAT(f.tau_slow, WithinRel(10.0, 0.01));
}

TEST_CASE("local light yield", "[analysis]") {
  std::vector<double> t, one, zero, decay;
  for (int i = 0; i <= 2000; ++i) {
    t.push_back(1e-3 * i);
    one.push_back(2.0);
    zero.push_back(0.0);
    decay.push_back(2.0 * std::exp(-t.back()));
  }
  CHECK_THAT(local_light_yield(t, one, 2.0, 1.0), WithinRel(1.0, 1e-14));
  CHECK(local_light_yield(t, zero, 2.0, 1.0) == 0.0);
  CHECK_THAT(local_light_yield(t, decay, 2.0, 1.0), WithinAbs(1.0 - std::exp(-1.0), 1e-7));
  // tau between samples
  CHECK_THAT(local_light_yield(t, one, 2.0, 0.0105), WithinRel(1.0, 1e-12));
  CHECK_THROWS_AS(local_light_yield(t, one, 2.0, 5.0), ValidationError);
  CHECK_THROWS_AS(local_light_yield(t, one, 0.0, 1.0), ValidationError);
}

TEST_CASE("characteristic time", "[analysis]") {
  ReactionTensors t = ReactionTensors::zeros(1);
  t.recombination(0, 0) = 2.0;
  CHECK(characteristic_time(t) == 0.5);
  ReactionTensors u = ReactionTensors::zeros(2);
  u.recombination << 1, 3, 0, 2;
  CHECK_THAT(characteristic_time(u), WithinRel(1.0 / 3.0, 1e-15));
  CHECK_THROWS_AS(characteristic_time(ReactionTensors::zeros(2)), ValidationError);
}

TEST_CASE("global light yield", "[analysis]") {
  const auto g = Grid::interval(1.0, 10);
  const Field n0 = Field::sample(g, [](const Point& x) { return 1.0 + x[0]; });
  std::vector<CarrierState> still, none, decay;
  for (int m = 0; m <= 1000; ++m) {
    const double t = 1e-3 * m;
    Field half = n0;
    for (double& v : half.values()) v *= 0.5;
    still.push_back({{half, half}, Field(g), t});
    none.push_back({{Field(g, 0.0)}, Field(g), t});
    Field d = n0;
    for (double& v : d.values()) v *= std::exp(-t);
    decay.push_back({{d}, Field(g), t});
  }
  CHECK_THAT(global_light_yield(still, n0, 1.0), WithinRel(1.0, 1e-13));
  CHECK(global_light_yield(none, n0, 1.0) == 0.0);
  CHECK_THAT(global_light_yield(decay, n0, 1.0), WithinAbs(1.0 - std::exp(-1.0), 1e-6));

  const auto trace = point_trace(still, {0.55, 0.0});
  CHECK_THAT(trace[7], WithinRel(n0[5], 1e-15));
}

TEST_CASE("yield bound", "[analysis]") {
  const YieldBound y = yield_bound(1.0, 7.0, 1.0, 1.0, 1.0);
  CHECK_THAT(y.literal, WithinRel(7.0 * (1.0 - std::exp(-1.0)), 1e-14));
  CHECK_THAT(y.literal, WithinAbs(4.424, 1e-3));
  CHECK_THAT(y.root, WithinRel(std::sqrt(7.0) * 2.0 * (1.0 - std::exp(-0.5)), 1e-14));
  CHECK_THAT(y.root, WithinAbs(2.082, 1e-3));
  CHECK_THAT(y.chain, WithinRel(7.0 * (1.0 - std::exp(-1.0)), 1e-14));

  // instant equilibration: the estimate collapses to the first interval
  std::vector<TraceRow> rows;
  for (int m = 0; m <= 1000; ++m) rows.push_back(row(1e-3 * m, 0, 0, m == 0 ? 1.0 : 0.0, 0));
  const YieldBound e = yield_bound(rows, 1.0, 7.0, 1.0, 1.0);
  CHECK_THAT(e.estimate, WithinAbs(5e-4, 1e-12));
  CHECK(e.pass);

  CHECK_THROWS_AS(yield_bound(1.0, 7.0, 1.0, 1.0, 0.0), ValidationError);
}
