#include "scintikit/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "scintikit/errors.hpp"

namespace scintikit {

bool Tensor3::is_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
}

bool Tensor4::is_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
}

ReactionTensors ReactionTensors::zeros(std::size_t k) {
  const auto n = static_cast<Eigen::Index>(k);
  return {Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n),
          Eigen::MatrixXd::Zero(n, n), Tensor3(k), Tensor3(k), Tensor4(k)};
}

bool ReactionTensors::is_zero() const {
  return recombination.isZero(0.0) && quenching.isZero(0.0) && exchange.isZero(0.0) &&
         quadratic_recombination.is_zero() && quadratic_quenching.is_zero() &&
         auger_quenching.is_zero();
}

bool ReactionTensors::operator==(const ReactionTensors& o) const {
  return recombination == o.recombination && quenching == o.quenching &&
         exchange == o.exchange && quadratic_recombination == o.quadratic_recombination &&
         quadratic_quenching == o.quadratic_quenching && auger_quenching == o.auger_quenching;
}

void ReactionTensors::validate() const {
  const auto k = recombination.rows();
  auto square = [k](const Eigen::MatrixXd& m) { return m.rows() == k && m.cols() == k; };
  if (!square(recombination) || !square(quenching) || !square(exchange))
    throw ValidationError("tensors: R, G and E must all be k x k");
  const auto kk = static_cast<std::size_t>(k);
  if (quadratic_recombination.extent() != kk || quadratic_quenching.extent() != kk ||
      auger_quenching.extent() != kk)
    throw ValidationError("tensors: quadratic and Auger tensors must have extent k");
  auto check = [](std::span<const double> v, bool nonneg, const char* name) {
    for (double x : v) {
      if (!std::isfinite(x))
        throw ValidationError(std::string("tensors: non-finite entry in ") + name);
      if (nonneg && x < 0.0)
        throw ValidationError(std::string("tensors: negative entry in ") + name);
    }
  };
  check({recombination.data(), static_cast<std::size_t>(recombination.size())}, true, "R");
  check({quenching.data(), static_cast<std::size_t>(quenching.size())}, true, "G");
  check({exchange.data(), static_cast<std::size_t>(exchange.size())}, false, "E");
  check(quadratic_recombination.data(), true, "quadratic recombination");
  check(quadratic_quenching.data(), true, "quadratic quenching");
  check(auger_quenching.data(), true, "Auger quenching");
}

void reaction_matrix(std::span<const double> n, const ReactionTensors& t,
                     Eigen::MatrixXd& out) {
  const std::size_t k = t.species();
  out = t.recombination + t.quenching + t.exchange;
  const bool quadratic = !t.quadratic_recombination.is_zero() || !t.quadratic_quenching.is_zero();
  const bool cubic = !t.auger_quenching.is_zero();
  if (!quadratic && !cubic) return;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      if (quadratic)
        for (std::size_t h = 0; h < k; ++h)
          s += (t.quadratic_recombination(i, j, h) + t.quadratic_quenching(i, j, h)) * n[h];
      if (cubic)
        for (std::size_t h = 0; h < k; ++h)
          for (std::size_t m = 0; m < k; ++m)
            s += t.auger_quenching(i, j, h, m) * n[h] * n[m];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += s;
    }
}

Eigen::MatrixXd reaction_matrix(std::span<const double> n, const ReactionTensors& t) {
  Eigen::MatrixXd out;
  reaction_matrix(n, t, out);
  return out;
}

void reaction_rate(std::span<const double> n, const ReactionTensors& t,
                   std::span<double> out) {
  Eigen::MatrixXd k;
  reaction_matrix(n, t, k);
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < k.cols(); ++j) s += k(i, j) * n[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
}

Eigen::VectorXd reaction_rate(std::span<const double> n, const ReactionTensors& t) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(t.species()));
  reaction_rate(n, t, {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

ReactionBounds reaction_bounds(const ReactionTensors& t, double n0_max) {
  const std::size_t k = t.species();
  ReactionBounds b;
  b.n0_max = n0_max;
  const Eigen::MatrixXd lin = t.recombination + t.quenching + t.exchange;
  b.k1 = lin.cwiseAbs().rowwise().sum().maxCoeff();

  double quad = 0.0;
  double aug = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double qrow = 0.0;
    double arow = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t h = 0; h < k; ++h) {
        qrow += std::abs(t.quadratic_recombination(i, j, h) + t.quadratic_quenching(i, j, h));
        for (std::size_t m = 0; m < k; ++m) arow += std::abs(t.auger_quenching(i, j, h, m));
      }
    quad = std::max(quad, qrow);
    aug = std::max(aug, arow);
  }
  b.k2 = quad + aug;
  b.k_inf = b.k1 + b.k2 * n0_max * n0_max;
  if (!(b.k1 > 0.0))
    throw DegenerateBoundError("reaction bounds: K1 = ||R + G + E|| is zero");
  return b;
}

SampleReport validate_charge_compatibility(const ReactionTensors& t,
                                           std::span<const int> charges,
                                           std::span<const std::vector<double>> samples) {
  SampleReport rep;
  rep.name = "charge compatibility";
  std::vector<double> rate(t.species());
  for (const auto& n : samples) {
    reaction_rate(n, t, rate);
    double zk = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < rate.size(); ++i) {
      zk += charges[i] * rate[i];
      norm = std::max(norm, std::abs(rate[i]));
    }
    ++rep.samples;
    rep.worst = std::max(rep.worst, std::abs(zk));
    if (std::abs(zk) > 1e-12 * norm) {
      rep.pass = false;
      rep.violations.push_back({n, zk});
    }
  }
  return rep;
}

SampleReport validate_h4(const ReactionTensors& t, std::span<const double> normalization,
                         std::span<const double> weights, std::span<const double> shifts,
                         std::span<const std::vector<double>> samples, RateSign sign) {
  SampleReport rep;
  rep.name = "H4 entropy production";
  rep.worst = -std::numeric_limits<double>::infinity();
  for (double w : weights)
    if (!(w > 0.0)) throw ValidationError("H4: weights pi_i must be positive");
  const double s = sign == RateSign::as_printed ? 1.0 : -1.0;
  std::vector<double> rate(t.species());
  for (const auto& n : samples) {
    reaction_rate(n, t, rate);
    double sum = 0.0;
    for (std::size_t i = 0; i < rate.size(); ++i)
      sum += weights[i] * s * rate[i] * (normalization[i] * std::log(n[i]) + shifts[i]);
    ++rep.samples;
    rep.worst = std::max(rep.worst, sum);
    if (sum > 1e-12) {
      rep.pass = false;
      rep.violations.push_back({n, sum});
    }
  }
  if (rep.samples == 0) rep.worst = 0.0;
  return rep;
}

ReactionTensors quenching_free(const ReactionTensors& t) {
  ReactionTensors out = t;
  const std::size_t k = t.species();
  out.quenching.setZero();
  out.quadratic_quenching = Tensor3(k);
  out.auger_quenching = Tensor4(k);
  return out;
}

std::vector<std::vector<double>> sample_states(std::size_t k, std::size_t count,
                                               std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  const double a = std::log(lo);
  const double b = std::log(hi);
  std::vector<std::vector<double>> out(count, std::vector<double>(k));
  for (auto& s : out)
    for (auto& v : s) {
      // Explicit transform of the raw engine output keeps samples identical
      // across standard library implementations.
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = std::exp(a + (b - a) * u);
    }
  return out;
}

}  // namespace scintikit
