#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace pbnn {

/**
 * Frictionless double pendulum.
 *
 * Angles are measured from the downward vertical. Observations are recorded
 * every `record_every` integration steps, `n_observations` times in total
 * (the initial state is observation 0).
 */
struct PendulumParams {
  double m1 = 1.0;   ///< [kg]
  double m2 = 1.0;   ///< [kg]
  double l1 = 1.0;   ///< [m]
  double l2 = 1.0;   ///< [m]
  double g = 9.81;   ///< [m s^-2]
  double dt = 1e-3;  ///< RK4 step [s]
  std::size_t record_every = 10;
  std::size_t n_observations = 9999;

  /// Throws ArgumentError on non-positive constants.
  void validate() const;
};

struct PendulumState {
  double phi1 = 0.0;
  double phi2 = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;

  bool finite() const;
  friend bool operator==(const PendulumState&, const PendulumState&) = default;
};

/// Cartesian (x, z) of mass 1 followed by mass 2; z points up.
using Observation = std::array<double, 4>;

/// Time derivative of the state under the Euler-Lagrange equations.
PendulumState derivative(const PendulumState& s, const PendulumParams& p);

/// One classical fourth-order Runge-Kutta step of size p.dt.
PendulumState step_rk4(const PendulumState& s, const PendulumParams& p);

Observation observe(const PendulumState& s, const PendulumParams& p);

/// Kinetic plus potential energy, with the pivot as the potential zero.
double energy(const PendulumState& s, const PendulumParams& p);

/// Integrates from `initial` and returns p.n_observations observations.
std::vector<Observation> simulate(const PendulumState& initial, const PendulumParams& p);

}  // namespace pbnn
