#pragma once

// Closed-form rotating-frame evolution of a single two-level Bloch vector.
//
// Conventions used throughout ddsim:
//   * rotations are right-handed;
//   * a pulse of phase phi rotates about (cos phi, sin phi, 0);
//   * free precession at detuning D rotates about +z by 2*pi*D*t.

#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "ddsim/error.hpp"

namespace ddsim {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct BlochState {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  constexpr BlochState() = default;
  constexpr BlochState(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  double transverse() const { return std::hypot(x, y); }

  friend constexpr BlochState operator+(BlochState a, BlochState b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend constexpr BlochState operator-(BlochState a, BlochState b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend constexpr BlochState operator*(double s, BlochState a) {
    return {s * a.x, s * a.y, s * a.z};
  }
  friend constexpr bool operator==(const BlochState&, const BlochState&) = default;
};

inline double distance(BlochState a, BlochState b) { return (a - b).norm(); }

/// Longitudinal and transverse relaxation. Infinite times disable the
/// corresponding channel.
struct RelaxationParams {
  double t1_s = kInf;
  double t2_s = kInf;
  double z_equilibrium = 0.0;

  static RelaxationParams none() { return {}; }

  void validate() const {
    if (!(t1_s > 0.0) || !(t2_s > 0.0)) throw ConfigError("relaxation times must be positive");
    if (!(z_equilibrium >= -1.0 && z_equilibrium <= 1.0))
      throw ConfigError("z_equilibrium must lie in [-1, 1]");
    if (std::isfinite(t1_s) && std::isfinite(t2_s) && t2_s > 2.0 * t1_s)
      throw ConfigError("t2 must not exceed 2*t1");
  }
};

/// Pulse description. A hard pulse is an instantaneous rotation by `area`;
/// a finite pulse drives at `rabi_hz` for `duration_s`.
struct PulseEvent {
  enum class Mode { hard, finite };

  Mode mode = Mode::hard;
  double area_rad = 0.0;
  double rabi_hz = 0.0;
  double duration_s = 0.0;
  double phase_rad = 0.0;

  static PulseEvent hard(double area, double phase) {
    return {Mode::hard, area, 0.0, 0.0, phase};
  }
  static PulseEvent finite(double rabi, double duration, double phase) {
    return {Mode::finite, kTwoPi * rabi * duration, rabi, duration, phase};
  }

  /// Time the pulse occupies; zero for hard pulses.
  double occupied_time() const { return mode == Mode::finite ? duration_s : 0.0; }

  friend bool operator==(const PulseEvent&, const PulseEvent&) = default;
};

namespace detail {

// Rodrigues rotation about unit axis (nx, ny, nz).
inline BlochState rotate(BlochState v, double nx, double ny, double nz, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double dot = nx * v.x + ny * v.y + nz * v.z;
  const double k = dot * (1.0 - c);
  return {v.x * c + (ny * v.z - nz * v.y) * s + nx * k,
          v.y * c + (nz * v.x - nx * v.z) * s + ny * k,
          v.z * c + (nx * v.y - ny * v.x) * s + nz * k};
}

inline BlochState rotate_z(BlochState v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

// Precession by a precomputed phase plus relaxation over `duration`.
inline BlochState precess(BlochState v, double phase, double duration, const RelaxationParams& relax) {
  v = rotate_z(v, phase);
  if (std::isfinite(relax.t2_s)) {
    const double d = std::exp(-duration / relax.t2_s);
    v.x *= d;
    v.y *= d;
  }
  if (std::isfinite(relax.t1_s)) {
    const double d = std::exp(-duration / relax.t1_s);
    v.z = relax.z_equilibrium + (v.z - relax.z_equilibrium) * d;
  }
  return v;
}

}  // namespace detail

inline BlochState apply_hard_pulse(BlochState state, double area, double phase) {
  return detail::rotate(state, std::cos(phase), std::sin(phase), 0.0, area);
}

/// Free precession with closed-form relaxation.
inline BlochState evolve_free(BlochState state, double duration, double detuning_hz,
                              const RelaxationParams& relax = {}) {
  if (duration < 0.0) throw SimulationError("evolve_free: negative duration");
  if (duration == 0.0) return state;
  return detail::precess(state, kTwoPi * detuning_hz * duration, duration, relax);
}

/// Exact rotation about the tilted effective field (rabi cos phi, rabi sin phi, detuning).
/// Relaxation is neglected for the duration of the pulse.
inline BlochState apply_finite_pulse(BlochState state, double rabi_hz, double duration, double phase,
                                     double detuning_hz) {
  if (!(rabi_hz > 0.0)) throw SimulationError("apply_finite_pulse: rabi must be positive");
  if (duration < 0.0) throw SimulationError("apply_finite_pulse: negative duration");
  const double eff = std::hypot(rabi_hz, detuning_hz);
  const double nx = rabi_hz * std::cos(phase) / eff;
  const double ny = rabi_hz * std::sin(phase) / eff;
  const double nz = detuning_hz / eff;
  return detail::rotate(state, nx, ny, nz, kTwoPi * eff * duration);
}

inline BlochState apply_pulse(BlochState state, const PulseEvent& pulse, double detuning_hz) {
  if (pulse.mode == PulseEvent::Mode::hard) return apply_hard_pulse(state, pulse.area_rad, pulse.phase_rad);
  return apply_finite_pulse(state, pulse.rabi_hz, pulse.duration_s, pulse.phase_rad, detuning_hz);
}

/// Piecewise-constant detuning trajectory, sample k holds on [k*dt, (k+1)*dt).
inline BlochState evolve_noisy(BlochState state, std::span<const double> detunings_hz, double dt,
                               const RelaxationParams& relax = {}) {
  if (!(dt > 0.0)) throw SimulationError("evolve_noisy: dt must be positive");
  if (detunings_hz.empty()) throw SimulationError("evolve_noisy: empty trajectory");
  for (double d : detunings_hz) {
    if (!std::isfinite(d)) throw SimulationError("evolve_noisy: non-finite detuning sample");
  }
  for (double d : detunings_hz) state = evolve_free(state, dt, d, relax);
  return state;
}

}  // namespace ddsim
