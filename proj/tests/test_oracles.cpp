#include <doctest.h>

#include <cmath>

#include "pbnn/oracles.hpp"

using namespace pbnn;

TEST_CASE("expected acceptance degenerate cases") {
  CHECK(expected_acceptance(0.0, 0.0, false) == 1.0);
  for (double d : {-2.0, 0.0, 0.5, 3.0}) {
    CHECK(expected_acceptance(d, 0.0, true) == doctest::Approx(std::min(1.0, std::exp(-d))));
    CHECK(expected_acceptance(d, 0.0, false) == doctest::Approx(std::min(1.0, std::exp(-d))));
  }
}

TEST_CASE("closed form agrees with quadrature") {
  for (bool penalty : {true, false}) {
    CHECK(std::abs(expected_acceptance(1.0, 1.0, penalty) -
                   expected_acceptance_quadrature(1.0, 1.0, penalty)) < 1e-8);
    CHECK(std::abs(expected_acceptance(-2.5, 2.7, penalty) -
                   expected_acceptance_quadrature(-2.5, 2.7, penalty)) < 1e-8);
  }
}

TEST_CASE("averaged detailed balance") {
  CHECK(averaged_detailed_balance_residual(0.0, 1.3, true) == 0.0);
  CHECK(averaged_detailed_balance_residual(0.0, 1.3, false) == 0.0);
  CHECK(averaged_detailed_balance_residual(0.7, 1.3, true) < 1e-8);
  CHECK(averaged_detailed_balance_residual(0.7, 1.3, false) > 0.05);
}

TEST_CASE("two-state stationary distribution") {
  for (double s : {0.0, 1.0, 3.0}) {
    for (bool penalty : {true, false}) {
      const auto d = two_state_stationary({0.0, s}, penalty);
      CHECK(d.a == doctest::Approx(0.5));
      CHECK(d.b == doctest::Approx(0.5));
    }
  }
  const auto noiseless = two_state_stationary({1.0, 0.0}, false);
  CHECK(noiseless.a / noiseless.b == doctest::Approx(std::exp(1.0)).epsilon(1e-12));

  const auto pen = two_state_stationary({1.0, 2.0}, true);
  CHECK(std::abs(pen.a / pen.b - std::exp(1.0)) < 1e-8);
  const auto raw = two_state_stationary({1.0, 2.0}, false);
  CHECK(raw.a / raw.b < std::exp(1.0));
  CHECK(raw.a / raw.b > 1.0);
}

TEST_CASE("simulated two-state chain follows the oracle") {
  const TwoStateTarget target{1.0, 1.0};
  const auto pen = simulate_two_state_chain(target, true, 200000, 4);
  CHECK(total_variation(pen, two_state_exact(target)) < 0.01);
  const auto raw = simulate_two_state_chain(target, false, 200000, 4);
  const double predicted = total_variation(two_state_stationary(target, false),
                                           two_state_exact(target));
  CHECK(std::abs(total_variation(raw, two_state_exact(target)) - predicted) < 0.01);
  CHECK(simulate_two_state_chain(target, true, 1000, 9).a ==
        simulate_two_state_chain(target, true, 1000, 9).a);
}

TEST_CASE("validation grid passes and is configurable") {
  ValidationConfig cfg;
  cfg.dense_points = 3;
  cfg.mc_steps = 20000;
  cfg.mc_seeds = 1;
  const auto rows = run_validation(cfg);
  CHECK(rows.size() > 10);
  std::size_t mc = 0;
  for (const auto& r : rows) {
    if (r.check.rfind("monte_carlo", 0) == 0) {
      ++mc;
      continue;  // 2e4 steps is too short for the 0.01 tolerance
    }
    CHECK_MESSAGE(r.pass, r.check << " at " << r.delta << ", " << r.sigma);
  }
  CHECK(mc == 4);
}
