#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "builders.hpp"
#include "scintikit/errors.hpp"
#include "scintikit/evolve.hpp"
#include "scintikit/poisson.hpp"
#include "scintikit/stationary.hpp"
#include "scintikit/thermo.hpp"
#include "scintikit/track.hpp"

using namespace scintikit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using testkit::pi;

namespace {

CarrierState consistent(std::vector<Field> n, const MaterialParams& p) {
  CarrierState s;
  s.potential = solve_poisson(potential_problem(n, p, 1e-13)).potential;
  s.densities = std::move(n);
  return s;
}

SolverSettings settings(double dt, double t_final) {
  SolverSettings st;
  st.dt = dt;
  st.t_final = t_final;
  return st;
}

// Exact decay of a uniform single species under backward-Euler-type
// kinetics compared to n0 e^(-r t).
double decay_error(double dt) {
  const auto g = Grid::interval(1.0, 4);
  const MaterialParams p = testkit::material(g, {0});
  ReactionTensors t = ReactionTensors::zeros(1);
  t.recombination(0, 0) = 2.0;
  const DiagnosticsTrace tr = run(consistent({Field(g, 1.0)}, p), p, t, settings(dt, 1.0));
  return std::abs(tr.final_state.densities[0][0] - std::exp(-2.0));
}

}  // namespace

TEST_CASE("Bernoulli function", "[evolve]") {
  CHECK(bernoulli(0.0) == 1.0);
  CHECK_THAT(bernoulli(1.0), WithinRel(1.0 / (std::exp(1.0) - 1.0), 1e-15));
  CHECK_THAT(bernoulli(-1.0), WithinRel(std::exp(1.0) / (std::exp(1.0) - 1.0), 1e-15));
  for (double x : {1e-9, -1e-9, 9.9e-6, 1.01e-5, -1.01e-5, 1e-3, 30.0, -30.0, 700.0})
    CHECK_THAT(bernoulli(x), WithinRel(x / std::expm1(x), 1e-12));
  // B(-x) = B(x) + x
  for (double x : {1e-7, 0.3, 5.0}) CHECK_THAT(bernoulli(-x), WithinRel(bernoulli(x) + x, 1e-13));
}

TEST_CASE("Scharfetter-Gummel flux", "[evolve]") {
  CHECK_THAT(sg_face_flux(3.0, 1.0, 0.0, 2.0, 0.5), WithinRel(2.0 * 2.0 / 0.5, 1e-15));
  const double e = std::exp(1.0);
  CHECK_THAT(sg_face_flux(1.0, 2.0, 1.0, 1.0, 0.5),
             WithinRel(2.0 * (e / (e - 1.0) - 2.0 / (e - 1.0)), 1e-14));
  CHECK_THAT(sg_face_flux(1.0, 2.0, 1.0, 1.0, 0.5), WithinAbs(0.836047, 1e-6));
  // Discrete Boltzmann equilibrium n_R = n_L e^u has zero flux.
  for (double u : {-3.0, -1e-7, 0.0, 2e-6, 0.7, 12.0})
    CHECK_THAT(sg_face_flux(1.3, 1.3 * std::exp(u), u, 0.8, 0.1), WithinAbs(0.0, 1e-13));
}

TEST_CASE("solver settings validation", "[evolve]") {
  CHECK_NOTHROW(settings(0.1, 1.0).validate());
  CHECK_THROWS_AS(settings(0.0, 1.0).validate(), ValidationError);
  CHECK_THROWS_AS(settings(2.0, 1.0).validate(), ValidationError);
  SolverSettings s = settings(0.1, 1.0);
  s.output_stride = 0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("zero dynamics leave the state unchanged", "[evolve]") {
  const auto g = Grid::interval(1.0, 16);
  const MaterialParams p = testkit::material(g, {0, 0});
  const CarrierState s0 = consistent({Field(g, 0.4), Field(g, 2.5)}, p);
  const DiagnosticsTrace tr = run(s0, p, ReactionTensors::zeros(2), settings(0.05, 1.0));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < g->cell_count(); ++c)
      CHECK_THAT(tr.final_state.densities[i][c], WithinAbs(s0.densities[i][c], 1e-13));
  for (const TraceRow& r : tr.rows) CHECK_THAT(r.gibbs, WithinAbs(tr.rows[0].gibbs, 1e-13));
  CHECK(tr.rows.size() == 21);
}

TEST_CASE("pure kinetics converges at first order", "[evolve]") {
  const double e1 = decay_error(1e-2), e2 = decay_error(5e-3), e3 = decay_error(2.5e-3);
  CHECK(std::log2(e1 / e2) == Approx(1.0).margin(0.1));
  CHECK(std::log2(e2 / e3) == Approx(1.0).margin(0.1));
}

TEST_CASE("pure diffusion damps a cosine mode at the Fourier rate", "[evolve]") {
  const auto g = Grid::interval(1.0, 128);
  const MaterialParams p = testkit::material(g, {0}, {0.5});
  const double amp = 0.1;
  const CarrierState s0 = consistent(
      {Field::sample(g, [&](const Point& x) { return 1.0 + amp * std::cos(pi * x[0]); })}, p);
  const double t = 0.2;
  const DiagnosticsTrace tr = run(s0, p, ReactionTensors::zeros(1), settings(1e-4, t));
  // project onto cos(pi x)
  double a = 0.0;
  for (std::size_t c = 0; c < g->cell_count(); ++c)
    a += (tr.final_state.densities[0][c] - 1.0) * std::cos(pi * g->center(c)[0]) * g->cell_volume();
  a *= 2.0;
  const double rate = -std::log(a / amp) / t;
  CHECK_THAT(rate, WithinRel(pi * pi * 0.5, 0.02));
}

TEST_CASE("transport conserves every species mass", "[evolve][property]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  const auto g = Grid::rectangle(1.0, 1.0, 10, 8);
  MaterialParams p = testkit::material(g, {-1, 2});
  p.mobility << 1.0, 0.3, 0.3, 0.8;  // coupled species
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<Field> n;
    for (int i = 0; i < 2; ++i) {
      std::vector<double> v(g->cell_count());
      for (double& x : v) x = u(rng);
      n.emplace_back(g, v);
    }
    CarrierState s;
    s.densities = n;
    s.potential = Field::sample(g, [&](const Point& x) { return 3.0 * std::sin(4.0 * x[0] + x[1]); });
    Integrator integ(p, ReactionTensors::zeros(2), settings(0.01, 1.0));
    const auto out = integ.transport(s, 0.05);
    for (int i = 0; i < 2; ++i)
      CHECK_THAT(integrate_field(out[i]), WithinRel(integrate_field(n[i]), 1e-12));
  }
}

TEST_CASE("transport relaxes toward the Boltzmann profile", "[evolve]") {
  // With a frozen potential the discrete steady state is n ~ e^(-z phi).
  const auto g = Grid::interval(1.0, 32);
  const MaterialParams p = testkit::material(g, {2});
  CarrierState s;
  s.densities = {Field(g, 1.0)};
  s.potential = Field::sample(g, [](const Point& x) { return 0.5 * x[0] * x[0]; });
  Integrator integ(p, ReactionTensors::zeros(1), settings(0.01, 1.0));
  for (int m = 0; m < 40; ++m) s.densities = integ.transport(s, 5.0);
  const double ratio0 = s.densities[0][0] * std::exp(2.0 * s.potential[0]);
  for (std::size_t c = 1; c < g->cell_count(); ++c)
    CHECK_THAT(s.densities[0][c] * std::exp(2.0 * s.potential[c]), WithinRel(ratio0, 1e-9));
}

TEST_CASE("stiff reactions stay positive", "[evolve][property]") {
  const auto g = Grid::interval(1.0, 4);
  const MaterialParams p = testkit::material(g, {-1, 1, 0});
  ReactionTensors t = ReactionTensors::zeros(3);
  t.quadratic_recombination(0, 0, 1) = 500.0;
  t.quadratic_recombination(1, 1, 0) = 500.0;
  t.recombination(2, 2) = 1000.0;
  t.auger_quenching(2, 2, 2, 2) = 100.0;
  Integrator integ(p, t, settings(0.1, 1.0));
  for (const auto& s : sample_states(3, 200, 3, 1e-6, 1e2)) {
    std::vector<Field> n;
    for (double v : s) n.emplace_back(g, v);
    const auto out = integ.react(n, 0.1);
    for (int i = 0; i < 3; ++i) CHECK(out[i].min() > 0.0);
    // charge z.n is restored by the update
    const double q0 = -s[0] + s[1];
    const double q1 = -out[0][0] + out[1][0];
    CHECK_THAT(q1, WithinAbs(q0, 1e-12 * (1.0 + s[0] + s[1])));
  }
}

TEST_CASE("charge is conserved on an annihilation run", "[evolve]") {
  RunConfig cfg = load_config(testkit::config_path("annihilation"));
  const CarrierState s0 = initial_state(cfg.excitation, cfg.grid, cfg.material);
  cfg.solver.t_final = 0.5;
  const DiagnosticsTrace tr = run(s0, cfg.material, cfg.tensors, cfg.solver);
  const double q0 = tr.rows.front().charge;
  for (const TraceRow& r : tr.rows) CHECK(std::abs(r.charge - q0) <= 1e-10 * (1.0 + std::abs(q0)));
  CHECK(tr.stats.charge_drift <= 1e-10 * (1.0 + std::abs(q0)));
  CHECK(tr.stats.min_density > 0.0);
  // annihilation removes carriers
  CHECK(tr.rows.back().masses[0] < tr.rows.front().masses[0]);
}

TEST_CASE("Gibbs safeguard keeps the relative Gibbs energy monotone", "[evolve]") {
  RunConfig cfg = testkit::benchmark(64, 5e-3, 1.0);
  const CarrierState s0 = initial_state(cfg.excitation, cfg.grid, cfg.material);
  const StationaryState inf = solve_stationary(cfg.material, cfg.tensors, cfg.analysis.stationary);
  const CarrierState ref = inf.as_state();
  const DiagnosticsTrace tr = run(s0, cfg.material, cfg.tensors, cfg.solver, &ref);
  for (std::size_t m = 1; m < tr.rows.size(); ++m)
    CHECK(tr.rows[m].relative_gibbs <= tr.rows[m - 1].relative_gibbs +
                                           1e-10 * (1.0 + tr.rows[0].relative_gibbs));
  CHECK(tr.rows.back().relative_gibbs < 0.5 * tr.rows.front().relative_gibbs);
  for (const TraceRow& r : tr.rows) CHECK(r.psi >= 0.0);
}

TEST_CASE("trace rows, stride and snapshots", "[evolve]") {
  const auto g = Grid::interval(1.0, 8);
  const MaterialParams p = testkit::material(g, {0});
  ReactionTensors t = ReactionTensors::zeros(1);
  t.recombination(0, 0) = 1.0;
  SolverSettings st = settings(0.1, 1.05);
  st.output_stride = 3;
  st.keep_snapshots = true;
  const DiagnosticsTrace tr = run(consistent({Field(g, 1.0)}, p), p, t, st);
  // steps: 11 (last one shortened); rows at 0, 3, 6, 9 and the final step
  REQUIRE(tr.rows.size() == 5);
  CHECK(tr.snapshots.size() == 5);
  CHECK_THAT(tr.rows.back().t, WithinAbs(1.05, 1e-15));
  CHECK(std::isnan(tr.rows[0].relative_gibbs));
  CHECK(std::isnan(tr.rows[0].l1_dist));
  CHECK(tr.rows[0].photons == 0.0);
  // photons integrate R n = e^-t approximately
  CHECK_THAT(tr.rows.back().photons, WithinAbs(1.0 - std::exp(-1.05), 5e-2));
  const std::string header = diagnostics_header(1);
  CHECK(header == "t,E,G,G_rel,Psi,Q,l1_dist,mass_1");
  const std::string row = format_row(tr.rows[0]);
  CHECK(row.rfind("0,", 0) == 0);
  CHECK(row.find("nan") != std::string::npos);
}

TEST_CASE("weak residual identities", "[evolve]") {
  const auto g = Grid::interval(1.0, 32);
  const MaterialParams p = testkit::material(g, {1, -1});
  SolverSettings st = settings(1e-3, 0.05);
  st.keep_snapshots = true;
  std::vector<Field> n{Field::sample(g, [](const Point& x) { return 1.0 + 0.5 * std::cos(pi * x[0]); }),
                       Field(g, 1.0)};
  const DiagnosticsTrace tr = run(consistent(n, p), p, ReactionTensors::zeros(2), st);

  WeakTestFunction zero{[](const Point&, double) { return std::vector<double>{0.0, 0.0}; },
                        [](const Point&, double) { return std::vector<double>{0.0, 0.0}; }};
  CHECK(weak_residual(tr.snapshots, zero, p, ReactionTensors::zeros(2)) == 0.0);

  WeakTestFunction constant{[](const Point&, double) { return std::vector<double>{1.0, 2.0}; },
                            [](const Point&, double) { return std::vector<double>{0.0, 0.0}; }};
  CHECK(weak_residual(tr.snapshots, constant, p, ReactionTensors::zeros(2)) <= 1e-8);

  // Linear xi with a time-independent psi reduces to the weak identity
  // with v = grad xi * psi.
  const std::vector<double> a{0.7, -1.3};
  auto psi_x = [](const Point& x) { return std::sin(pi * x[0]) + x[0]; };
  Renormalization xi{[&](std::span<const double> n) { return a[0] * n[0] + a[1] * n[1]; },
                     [&](std::span<const double>) { return a; },
                     [](std::span<const double>) { return std::vector<double>(4, 0.0); }};
  ScalarTestFunction psi{[&](const Point& x, double) { return psi_x(x); },
                         [](const Point&, double) { return 0.0; }};
  WeakTestFunction v{[&](const Point& x, double) {
                       return std::vector<double>{a[0] * psi_x(x), a[1] * psi_x(x)};
                     },
                     [](const Point&, double) { return std::vector<double>{0.0, 0.0}; }};
  const double rw = weak_residual(tr.snapshots, v, p, ReactionTensors::zeros(2));
  const double rr = renormalized_residual(tr.snapshots, xi, psi, p, ReactionTensors::zeros(2));
  CHECK_THAT(rr, WithinAbs(rw, 1e-12));

  Renormalization flat{[](std::span<const double>) { return 2.0; },
                       [](std::span<const double>) { return std::vector<double>{0.0, 0.0}; },
                       [](std::span<const double>) { return std::vector<double>(4, 0.0); }};
  CHECK_THAT(renormalized_residual(tr.snapshots, flat, psi, p, ReactionTensors::zeros(2)),
             WithinAbs(0.0, 1e-14));

  CHECK_THROWS_AS(weak_residual(std::span(tr.snapshots).first(2), zero, p, ReactionTensors::zeros(2)),
                  ValidationError);
}

TEST_CASE("fully explicit scheme matches on a smooth problem", "[evolve]") {
  const auto g = Grid::interval(1.0, 16);
  const MaterialParams p = testkit::material(g, {0});
  ReactionTensors t = ReactionTensors::zeros(1);
  t.recombination(0, 0) = 1.0;
  std::vector<Field> n{Field::sample(g, [](const Point& x) { return 1.0 + 0.2 * std::cos(pi * x[0]); })};
  SolverSettings a = settings(1e-4, 0.1), b = a;
  b.scheme = Scheme::fully_explicit;
  const auto ra = run(consistent(n, p), p, t, a), rb = run(consistent(n, p), p, t, b);
  for (std::size_t c = 0; c < g->cell_count(); ++c)
    CHECK_THAT(ra.final_state.densities[0][c], WithinRel(rb.final_state.densities[0][c], 1e-3));
}
