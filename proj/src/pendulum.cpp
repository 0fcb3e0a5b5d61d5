#include "pbnn/pendulum.hpp"

#include <cmath>
#include <string>

#include "pbnn/errors.hpp"

namespace pbnn {

void PendulumParams::validate() const {
  for (double v : {m1, m2, l1, l2, g, dt}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ArgumentError("pendulum constants must be finite and strictly positive");
    }
  }
  if (record_every == 0) throw ArgumentError("record_every must be >= 1");
}

bool PendulumState::finite() const {
  return std::isfinite(phi1) && std::isfinite(phi2) && std::isfinite(omega1) &&
         std::isfinite(omega2);
}

PendulumState derivative(const PendulumState& s, const PendulumParams& p) {
  const double d = s.phi1 - s.phi2;
  const double sd = std::sin(d);
  const double cd = std::cos(d);
  const double den = 2.0 * p.m1 + p.m2 - p.m2 * std::cos(2.0 * d);
  const double w1s = s.omega1 * s.omega1;
  const double w2s = s.omega2 * s.omega2;

  const double a1 = (-p.g * (2.0 * p.m1 + p.m2) * std::sin(s.phi1) -
                     p.m2 * p.g * std::sin(s.phi1 - 2.0 * s.phi2) -
                     2.0 * sd * p.m2 * (w2s * p.l2 + w1s * p.l1 * cd)) /
                    (p.l1 * den);
  const double a2 = (2.0 * sd *
                     (w1s * p.l1 * (p.m1 + p.m2) + p.g * (p.m1 + p.m2) * std::cos(s.phi1) +
                      w2s * p.l2 * p.m2 * cd)) /
                    (p.l2 * den);
  return {s.omega1, s.omega2, a1, a2};
}

namespace {

PendulumState axpy(const PendulumState& s, double h, const PendulumState& k) {
  return {s.phi1 + h * k.phi1, s.phi2 + h * k.phi2, s.omega1 + h * k.omega1,
          s.omega2 + h * k.omega2};
}

}  // namespace

PendulumState step_rk4(const PendulumState& s, const PendulumParams& p) {
  const double h = p.dt;
  const PendulumState k1 = derivative(s, p);
  const PendulumState k2 = derivative(axpy(s, 0.5 * h, k1), p);
  const PendulumState k3 = derivative(axpy(s, 0.5 * h, k2), p);
  const PendulumState k4 = derivative(axpy(s, h, k3), p);
  const double w = h / 6.0;
  PendulumState next{
      s.phi1 + w * (k1.phi1 + 2.0 * k2.phi1 + 2.0 * k3.phi1 + k4.phi1),
      s.phi2 + w * (k1.phi2 + 2.0 * k2.phi2 + 2.0 * k3.phi2 + k4.phi2),
      s.omega1 + w * (k1.omega1 + 2.0 * k2.omega1 + 2.0 * k3.omega1 + k4.omega1),
      s.omega2 + w * (k1.omega2 + 2.0 * k2.omega2 + 2.0 * k3.omega2 + k4.omega2)};
  if (!next.finite()) throw IntegrationDivergedError("RK4 step produced a non-finite state");
  return next;
}

Observation observe(const PendulumState& s, const PendulumParams& p) {
  const double x1 = p.l1 * std::sin(s.phi1);
  const double z1 = -p.l1 * std::cos(s.phi1);
  return {x1, z1, x1 + p.l2 * std::sin(s.phi2), z1 - p.l2 * std::cos(s.phi2)};
}

double energy(const PendulumState& s, const PendulumParams& p) {
  const double d = s.phi1 - s.phi2;
  const double kinetic =
      0.5 * p.m1 * p.l1 * p.l1 * s.omega1 * s.omega1 +
      0.5 * p.m2 *
          (p.l1 * p.l1 * s.omega1 * s.omega1 + p.l2 * p.l2 * s.omega2 * s.omega2 +
           2.0 * p.l1 * p.l2 * s.omega1 * s.omega2 * std::cos(d));
  const double potential =
      -p.g * ((p.m1 + p.m2) * p.l1 * std::cos(s.phi1) + p.m2 * p.l2 * std::cos(s.phi2));
  return kinetic + potential;
}

std::vector<Observation> simulate(const PendulumState& initial, const PendulumParams& p) {
  p.validate();
  if (!initial.finite()) throw ArgumentError("initial pendulum state must be finite");
  std::vector<Observation> out;
  out.reserve(p.n_observations);
  PendulumState s = initial;
  for (std::size_t i = 0; i < p.n_observations; ++i) {
    if (i > 0) {
      for (std::size_t k = 0; k < p.record_every; ++k) s = step_rk4(s, p);
    }
    out.push_back(observe(s, p));
  }
  return out;
}

}  // namespace pbnn
