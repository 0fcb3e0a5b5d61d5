#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pbnn {

/// Standard normal CDF.
double normal_cdf(double z);

/**
 * E[min(1, exp(-d - c))] for d ~ N(delta_true, sigma^2), with c = sigma^2/2
 * when `penalty` is set and c = 0 otherwise.
 *
 * Splitting the integral at d = -c gives
 *   Phi((-delta - c) / sigma) + exp(-delta - c + sigma^2/2) Phi((delta + c) / sigma - sigma),
 * which reduces to min(1, exp(-delta - c)) at sigma = 0.
 */
double expected_acceptance(double delta_true, double sigma, bool penalty);

/// The same expectation by adaptive Gauss-Kronrod quadrature of the integrand.
double expected_acceptance_quadrature(double delta_true, double sigma, bool penalty);

/// |A(delta) - exp(-delta) A(-delta)| where A is the mean acceptance of a
/// symmetric-proposal move. Zero exactly when detailed balance holds on average.
double averaged_detailed_balance_residual(double delta_true, double sigma, bool penalty = true);

/// Two abstract states a and b with L(b) - L(a) = delta and noise of std
/// sigma on every estimated loss difference.
struct TwoStateTarget {
  double delta = 0.0;
  double sigma = 0.0;
};

struct TwoStateDistribution {
  double a = 0.5;
  double b = 0.5;
};

/// Boltzmann distribution (1, exp(-delta)) / (1 + exp(-delta)).
TwoStateDistribution two_state_exact(const TwoStateTarget& target);

/// Stationary distribution of the 2x2 chain that always proposes the other
/// state and accepts with expected_acceptance().
TwoStateDistribution two_state_stationary(const TwoStateTarget& target, bool penalty);

/// Fraction of time in each state of a simulated two-state chain whose loss
/// differences are drawn from N(+-delta, sigma^2) and whose accept test is the
/// sampler's noise-penalized rule.
TwoStateDistribution simulate_two_state_chain(const TwoStateTarget& target, bool penalty,
                                              std::size_t steps, std::uint64_t seed);

/// |p.a - q.a| for two-state distributions.
double total_variation(const TwoStateDistribution& p, const TwoStateDistribution& q);

struct ValidationConfig {
  std::vector<double> deltas{-3.0, -1.0, 0.0, 1.0, 3.0};
  std::vector<double> sigmas{0.0, 0.5, 1.0, 2.0, 3.0};
  /// Dense grid on [-3, 3] x [0, 3] for closed form vs quadrature.
  std::size_t dense_points = 13;
  std::size_t mc_steps = 1000000;
  std::vector<double> mc_sigmas{1.0, 2.0};
  double mc_delta = 1.0;
  std::size_t mc_seeds = 3;
  std::uint64_t seed = 0;
};

struct ValidationRow {
  std::string check;
  double delta = 0.0;
  double sigma = 0.0;
  double value = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Every oracle check, in a fixed order.
std::vector<ValidationRow> run_validation(const ValidationConfig& cfg);

}  // namespace pbnn
