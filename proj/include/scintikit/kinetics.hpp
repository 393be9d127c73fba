#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scintikit {

/// Dense k x k x k array, T(i, j, h).
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(std::size_t k) : k_(k), data_(k * k * k, 0.0) {}
  std::size_t extent() const { return k_; }
  double operator()(std::size_t i, std::size_t j, std::size_t h) const {
    return data_[(i * k_ + j) * k_ + h];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t h) {
    return data_[(i * k_ + j) * k_ + h];
  }
  std::span<const double> data() const { return data_; }
  bool is_zero() const;
  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<double> data_;
};

/// Dense k x k x k x k array, T(i, j, h, m).
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(std::size_t k) : k_(k), data_(k * k * k * k, 0.0) {}
  std::size_t extent() const { return k_; }
  double operator()(std::size_t i, std::size_t j, std::size_t h, std::size_t m) const {
    return data_[((i * k_ + j) * k_ + h) * k_ + m];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t h, std::size_t m) {
    return data_[((i * k_ + j) * k_ + h) * k_ + m];
  }
  std::span<const double> data() const { return data_; }
  bool is_zero() const;
  bool operator==(const Tensor4&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<double> data_;
};

/// Coefficients of the quadratic kinetic law
///   K_ij(n) = R_ij + G_ij + E_ij + (RR_ijh + GG_ijh) n_h + A_ijhm n_h n_m.
struct ReactionTensors {
  Eigen::MatrixXd recombination;  ///< R, linear radiative recombination (>= 0)
  Eigen::MatrixXd quenching;      ///< G, linear quenching (>= 0)
  Eigen::MatrixXd exchange;       ///< E, conversion between species (any sign)
  Tensor3 quadratic_recombination;  ///< bold R (>= 0)
  Tensor3 quadratic_quenching;      ///< bold G (>= 0)
  Tensor4 auger_quenching;          ///< blackboard G, cubic Auger term (>= 0)

  static ReactionTensors zeros(std::size_t k);
  std::size_t species() const { return static_cast<std::size_t>(recombination.rows()); }
  bool is_zero() const;
  /// Shapes, finiteness and sign constraints; throws ValidationError.
  void validate() const;
  bool operator==(const ReactionTensors& other) const;
};

/// K(n) written into out (resized to k x k).
void reaction_matrix(std::span<const double> n, const ReactionTensors& t,
                     Eigen::MatrixXd& out);
Eigen::MatrixXd reaction_matrix(std::span<const double> n, const ReactionTensors& t);

/// K(n) n written into out (size k).
void reaction_rate(std::span<const double> n, const ReactionTensors& t,
                   std::span<double> out);
Eigen::VectorXd reaction_rate(std::span<const double> n, const ReactionTensors& t);

/// Constants of the reaction bound K1 <= ||K(n)|| <= K1 + K2 ||n0||^2.
struct ReactionBounds {
  double k1 = 0.0;
  double k2 = 0.0;
  double k_inf = 0.0;
  double n0_max = 0.0;
  std::string norm = "max-row-sum (operator infinity norm); quadratic and cubic "
                     "tensors collapsed over trailing indices by absolute sum";
};

/// Throws DegenerateBoundError when K1 = 0.
ReactionBounds reaction_bounds(const ReactionTensors& t, double n0_max);

struct SampleViolation {
  std::vector<double> sample;
  double value = 0.0;
};

struct SampleReport {
  std::string name;
  bool pass = true;
  std::size_t samples = 0;
  double worst = 0.0;  ///< largest checked quantity over the samples
  std::vector<SampleViolation> violations;
};

/// max |z . K(n) n| over spatially uniform samples; PASS iff every sample
/// satisfies |z . K(n) n| <= 1e-12 * ||K(n) n||.
SampleReport validate_charge_compatibility(const ReactionTensors& t,
                                           std::span<const int> charges,
                                           std::span<const std::vector<double>> samples);

/// Which rate enters the entropy-production sum.
enum class RateSign {
  as_printed,  ///< sum_i pi_i (K(n)n)_i (C_i log n_i + lambda_i)
  production,  ///< the same sum with the source term -K(n)n of the evolution equation
};

/// Structural hypothesis on the reaction term; PASS iff the weighted sum is
/// <= 1e-12 at every sample.
SampleReport validate_h4(const ReactionTensors& t, std::span<const double> normalization,
                         std::span<const double> weights, std::span<const double> shifts,
                         std::span<const std::vector<double>> samples,
                         RateSign sign = RateSign::as_printed);

/// Copy with G, bold G and the Auger tensor zeroed.
ReactionTensors quenching_free(const ReactionTensors& t);

/// Deterministic log-uniform samples from (lo, hi)^k.
std::vector<std::vector<double>> sample_states(std::size_t k, std::size_t count,
                                               std::uint64_t seed, double lo = 1e-3,
                                               double hi = 1e3);

}  // namespace scintikit
