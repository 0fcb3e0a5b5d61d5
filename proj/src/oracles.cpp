#include "pbnn/oracles.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <vector>
#include <numbers>
#include <random>

#include "pbnn/errors.hpp"
#include "pbnn/rng.hpp"
#include "pbnn/samplers.hpp"

namespace pbnn {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

namespace {

double penalty_shift(double sigma, bool penalty) { return penalty ? 0.5 * sigma * sigma : 0.0; }

void check_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ArgumentError("sigma must be >= 0");
}

}  // namespace

double expected_acceptance(double delta_true, double sigma, bool penalty) {
  check_sigma(sigma);
  const double c = penalty_shift(sigma, penalty);
  if (sigma == 0.0) return std::min(1.0, std::exp(-delta_true - c));
  const double below = normal_cdf((-delta_true - c) / sigma);
  const double tail = normal_cdf((delta_true + c) / sigma - sigma);
  if (tail == 0.0) return below;
  return below + std::exp(-delta_true - c + 0.5 * sigma * sigma + std::log(tail));
}

double expected_acceptance_quadrature(double delta_true, double sigma, bool penalty) {
  check_sigma(sigma);
  const double c = penalty_shift(sigma, penalty);
  if (sigma == 0.0) return std::min(1.0, std::exp(-delta_true - c));
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  auto density = [&](double d) {
    const double z = (d - delta_true) / sigma;
    return norm * std::exp(-0.5 * z * z);
  };
  auto integrand = [&](double d) {
    const double a = d <= -c ? 1.0 : std::exp(-d - c);
    return a * density(d);
  };
  // Outside delta +- 12 sigma the Gaussian mass is below 1e-32; split at the
  // kink of min(1, .) when it falls inside.
  const double lo = delta_true - 12.0 * sigma;
  const double hi = delta_true + 12.0 * sigma;
  std::vector<double> cuts{lo, delta_true, hi};
  if (-c > lo && -c < hi) cuts.push_back(-c);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  using Integrator = boost::math::quadrature::gauss_kronrod<double, 61>;
  constexpr unsigned kDepth = 15;
  constexpr double kTol = 1e-13;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    total += Integrator::integrate(integrand, cuts[k], cuts[k + 1], kDepth, kTol);
  }
  return total;
}

double averaged_detailed_balance_residual(double delta_true, double sigma, bool penalty) {
  const double forward = expected_acceptance(delta_true, sigma, penalty);
  const double backward = expected_acceptance(-delta_true, sigma, penalty);
  return std::abs(forward - std::exp(-delta_true) * backward);
}

TwoStateDistribution two_state_exact(const TwoStateTarget& target) {
  const double w = std::exp(-target.delta);
  return {1.0 / (1.0 + w), w / (1.0 + w)};
}

TwoStateDistribution two_state_stationary(const TwoStateTarget& target, bool penalty) {
  // Transition matrix [[1 - p_ab, p_ab], [p_ba, 1 - p_ba]]. Solve pi P = pi
  // with pi_a + pi_b = 1: the first balance equation p_ab pi_a - p_ba pi_b = 0
  // together with normalization, by Cramer's rule.
  const double p_ab = expected_acceptance(target.delta, target.sigma, penalty);
  const double p_ba = expected_acceptance(-target.delta, target.sigma, penalty);
  const double det = p_ab + p_ba;
  if (!(det > 0.0)) throw ArgumentError("two-state chain never moves");
  return {p_ba / det, p_ab / det};
}

TwoStateDistribution simulate_two_state_chain(const TwoStateTarget& target, bool penalty,
                                              std::size_t steps, std::uint64_t seed) {
  check_sigma(target.sigma);
  if (steps == 0) throw ArgumentError("need at least one step");
  Rng noise_rng = make_stream(seed, "two-state-noise");
  Rng accept_rng = make_stream(seed, "accept");
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double sigma2 = target.sigma * target.sigma;
  bool in_a = true;
  std::size_t time_in_a = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double true_diff = in_a ? target.delta : -target.delta;
    const NoisyAcceptanceInputs in{true_diff + target.sigma * noise(noise_rng),
                                   penalty ? sigma2 : 0.0, 0.0};
    if (accept_move(log_penalty_acceptance(in), uniform(accept_rng))) in_a = !in_a;
    time_in_a += in_a ? 1 : 0;
  }
  const double fa = static_cast<double>(time_in_a) / static_cast<double>(steps);
  return {fa, 1.0 - fa};
}

double total_variation(const TwoStateDistribution& p, const TwoStateDistribution& q) {
  return 0.5 * (std::abs(p.a - q.a) + std::abs(p.b - q.b));
}

std::vector<ValidationRow> run_validation(const ValidationConfig& cfg) {
  std::vector<ValidationRow> rows;
  constexpr double kExact = 1e-8;

  const std::size_t n = std::max<std::size_t>(cfg.dense_points, 2);
  for (bool penalty : {true, false}) {
    for (std::size_t i = 0; i < n; ++i) {
      const double delta = -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(n - 1);
      for (std::size_t j = 0; j < n; ++j) {
        const double sigma = 3.0 * static_cast<double>(j) / static_cast<double>(n - 1);
        const double closed = expected_acceptance(delta, sigma, penalty);
        const double quad = expected_acceptance_quadrature(delta, sigma, penalty);
        rows.push_back({penalty ? "closed_form_vs_quadrature_penalty"
                                : "closed_form_vs_quadrature_no_penalty",
                        delta, sigma, closed, quad, kExact, std::abs(closed - quad) < kExact});
      }
    }
  }

  for (double delta : cfg.deltas) {
    double previous_log_ratio = std::abs(delta);
    for (double sigma : cfg.sigmas) {
      const TwoStateTarget target{delta, sigma};
      const TwoStateDistribution pen = two_state_stationary(target, true);
      const double ratio = pen.b / pen.a;
      const double want = std::exp(-delta);
      rows.push_back({"stationary_ratio_penalty", delta, sigma, ratio, want, kExact,
                      std::abs(ratio - want) < kExact});

      const double residual = averaged_detailed_balance_residual(delta, sigma, true);
      rows.push_back({"detailed_balance_residual_penalty", delta, sigma, residual, 0.0, kExact,
                      residual < kExact});

      // Without the penalty the noise flattens the distribution towards 1:1.
      const TwoStateDistribution raw = two_state_stationary(target, false);
      const double log_ratio = std::abs(std::log(raw.b / raw.a));
      rows.push_back({"no_penalty_flattening", delta, sigma, log_ratio, previous_log_ratio,
                      1e-12, log_ratio <= previous_log_ratio + 1e-12});
      previous_log_ratio = log_ratio;
    }
  }

  {
    const double residual = averaged_detailed_balance_residual(0.7, 1.3, false);
    rows.push_back({"detailed_balance_residual_no_penalty", 0.7, 1.3, residual, 0.05, 0.05,
                    residual > 0.05});
  }

  if (cfg.mc_steps > 0) {
    for (double sigma : cfg.mc_sigmas) {
      const TwoStateTarget target{cfg.mc_delta, sigma};
      const TwoStateDistribution exact = two_state_exact(target);
      const TwoStateDistribution biased = two_state_stationary(target, false);
      for (std::size_t s = 0; s < cfg.mc_seeds; ++s) {
        const std::uint64_t seed = derive_seed(cfg.seed, "two-state-" + std::to_string(s));
        const TwoStateDistribution pen = simulate_two_state_chain(target, true, cfg.mc_steps, seed);
        const double tv_pen = total_variation(pen, exact);
        rows.push_back({"monte_carlo_tv_penalty", cfg.mc_delta, sigma, tv_pen, 0.0, 0.01,
                        tv_pen < 0.01});
        const TwoStateDistribution raw =
            simulate_two_state_chain(target, false, cfg.mc_steps, seed);
        const double tv_raw = total_variation(raw, exact);
        const double tv_oracle = total_variation(biased, exact);
        rows.push_back({"monte_carlo_tv_no_penalty_vs_oracle", cfg.mc_delta, sigma, tv_raw,
                        tv_oracle, 0.01, std::abs(tv_raw - tv_oracle) < 0.01});
      }
    }
  }
  return rows;
}

}  // namespace pbnn
