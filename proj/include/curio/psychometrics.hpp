#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace curio::psy {

// How `sd` was computed: divide-by-n (population) or divide-by-(n-1) (sample).
// summarize() produces population SDs; published norms are sample SDs.
enum class SdKind { Population, Sample };

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  SdKind sd_kind = SdKind::Population;

  // Variance with the (n-1) denominator. Requires n >= 2.
  double unbiased_variance() const;
  nlohmann::json to_json() const;
  static SampleStats from_json(const nlohmann::json& j);
};

// Mean and population SD. Throws PreconditionError on empty input.
SampleStats summarize(std::span<const double> samples);

// sqrt(((n_a-1) s_a^2 + (n_b-1) s_b^2) / (n_a + n_b - 2)) with unbiased s^2.
double pooled_sd(const SampleStats& a, const SampleStats& b);

// (mean_a - mean_b) / pooled_sd. Positive when `a` lies above `b`.
// Throws PreconditionError when n < 2, DegenerateSamples when pooled SD is 0.
double cohens_d(const SampleStats& a, const SampleStats& b);

struct CovMatrix {
  Eigen::MatrixXd values;
  bool correlation = true;

  std::size_t k() const { return static_cast<std::size_t>(values.rows()); }
  // Symmetric, positive diagonal (unit for correlations), PSD within 1e-10.
  void validate() const;
};

// Pearson correlation of the columns of an n x k data matrix. `names` label
// the columns in error messages.
CovMatrix sample_correlation(const Eigen::MatrixXd& data,
                             std::span<const std::string> names = {});

enum class Estimator { Uls, Ml };

struct FitConfig {
  Estimator estimator = Estimator::Uls;
  int starts = 5;
  std::uint64_t seed = 0;
  double theta_floor = 1e-4;
  double gradient_tol = 1e-8;
  int max_iterations = 10000;
};

struct CFAFit {
  Eigen::VectorXd loadings;
  Eigen::VectorXd error_vars;
  std::size_t k = 0;
  double discrepancy = 0.0;
  bool converged = false;
  int iterations = 0;
  int start_index = 0;
  Estimator estimator = Estimator::Uls;

  nlohmann::json to_json() const;
};

// lambda lambda^T + diag(theta)
Eigen::MatrixXd implied_matrix(const Eigen::VectorXd& loadings, const Eigen::VectorXd& error_vars);

// || r - (lambda lambda^T + diag(theta)) ||_F^2
double uls_discrepancy(const Eigen::MatrixXd& r, const Eigen::VectorXd& loadings,
                       const Eigen::VectorXd& error_vars);

struct Gradient {
  Eigen::VectorXd loadings;
  Eigen::VectorXd error_vars;
};

// Analytic gradient of uls_discrepancy with respect to (lambda, theta).
Gradient uls_gradient(const Eigen::MatrixXd& r, const Eigen::VectorXd& loadings,
                      const Eigen::VectorXd& error_vars);

// ln|Sigma| + tr(R Sigma^-1) - ln|R| - k; infinite when Sigma is not PD.
double ml_discrepancy(const Eigen::MatrixXd& r, const Eigen::VectorXd& loadings,
                      const Eigen::VectorXd& error_vars);
Gradient ml_gradient(const Eigen::MatrixXd& r, const Eigen::VectorXd& loadings,
                     const Eigen::VectorXd& error_vars);

// One-factor model with unit factor variance, theta_i >= floor, sum(lambda) >= 0.
// Multi-start; the lowest discrepancy wins, ties (within 1e-10) go to the
// lower start index. Throws PreconditionError for k < 3 or non-correlation
// input. A failed fit is returned with converged == false.
CFAFit fit_single_factor_cfa(const CovMatrix& r, const FitConfig& cfg = {});

// (sum lambda)^2 / ((sum lambda)^2 + sum theta)
double mcdonalds_omega(std::span<const double> loadings, std::span<const double> error_vars);
// Throws PreconditionError for an unconverged fit unless allow_unconverged.
double mcdonalds_omega(const CFAFit& fit, bool allow_unconverged = false);

}  // namespace curio::psy
