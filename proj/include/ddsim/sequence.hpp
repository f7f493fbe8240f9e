#pragma once

// Pulse programs: an ordered tree of pulse / wait / repeat / acquire events,
// plus builders for the standard two-pulse echo, inversion recovery and
// Bang-Bang decoupling sequences.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ddsim/bloch.hpp"
#include "ddsim/error.hpp"

namespace ddsim {

struct Event;

struct Wait {
  double duration_s = 0.0;
  friend bool operator==(const Wait&, const Wait&) = default;
};

struct Acquire {
  std::string label;
  friend bool operator==(const Acquire&, const Acquire&) = default;
};

struct Repeat {
  std::size_t count = 1;
  std::vector<Event> body;
  friend bool operator==(const Repeat&, const Repeat&) = default;
};

struct Event {
  std::variant<PulseEvent, Wait, Repeat, Acquire> value;

  Event(PulseEvent p) : value(p) {}
  Event(Wait w) : value(w) {}
  Event(Repeat r) : value(std::move(r)) {}
  Event(Acquire a) : value(std::move(a)) {}

  friend bool operator==(const Event&, const Event&) = default;
};

struct PulseProgram {
  std::vector<Event> events;
  friend bool operator==(const PulseProgram&, const PulseProgram&) = default;
};

// ---------------------------------------------------------------------------
// Structural queries

namespace detail {

inline double body_duration(const std::vector<Event>& events) {
  double total = 0.0;
  for (const auto& e : events) {
    if (const auto* p = std::get_if<PulseEvent>(&e.value)) {
      total += p->occupied_time();
    } else if (const auto* w = std::get_if<Wait>(&e.value)) {
      total += w->duration_s;
    } else if (const auto* r = std::get_if<Repeat>(&e.value)) {
      total += static_cast<double>(r->count) * body_duration(r->body);
    }
  }
  return total;
}

inline std::size_t body_event_count(const std::vector<Event>& events) {
  std::size_t n = 0;
  for (const auto& e : events) {
    if (const auto* r = std::get_if<Repeat>(&e.value))
      n += r->count * body_event_count(r->body);
    else
      ++n;
  }
  return n;
}

inline void flatten_into(const std::vector<Event>& events, std::vector<Event>& out) {
  for (const auto& e : events) {
    if (const auto* r = std::get_if<Repeat>(&e.value)) {
      for (std::size_t k = 0; k < r->count; ++k) flatten_into(r->body, out);
    } else {
      out.push_back(e);
    }
  }
}

inline void validate_body(const std::vector<Event>& events, int repeat_depth) {
  for (const auto& e : events) {
    if (const auto* p = std::get_if<PulseEvent>(&e.value)) {
      if (!std::isfinite(p->phase_rad)) throw ConfigError("pulse phase must be finite");
      if (p->mode == PulseEvent::Mode::hard) {
        if (!(p->area_rad > 0.0) || !std::isfinite(p->area_rad))
          throw ConfigError("hard pulse area must be positive and finite");
      } else {
        if (!(p->rabi_hz > 0.0) || !std::isfinite(p->rabi_hz))
          throw ConfigError("finite pulse needs a positive rabi frequency");
        if (!(p->duration_s > 0.0) || !std::isfinite(p->duration_s))
          throw ConfigError("finite pulse duration must be positive and finite");
      }
    } else if (const auto* w = std::get_if<Wait>(&e.value)) {
      if (!(w->duration_s >= 0.0) || !std::isfinite(w->duration_s))
        throw ConfigError("wait duration must be finite and non-negative");
    } else if (const auto* r = std::get_if<Repeat>(&e.value)) {
      if (r->count < 1) throw ConfigError("repeat count must be at least 1");
      validate_body(r->body, repeat_depth + 1);
    } else if (repeat_depth > 1) {
      throw ConfigError("acquire nested more than one repeat level deep");
    }
  }
}

}  // namespace detail

inline double expanded_duration(const PulseProgram& program) {
  return detail::body_duration(program.events);
}

inline std::size_t expanded_event_count(const PulseProgram& program) {
  return detail::body_event_count(program.events);
}

/// Unrolls every Repeat. Memory grows with the expanded event count.
inline PulseProgram expand(const PulseProgram& program) {
  PulseProgram flat;
  flat.events.reserve(expanded_event_count(program));
  detail::flatten_into(program.events, flat.events);
  return flat;
}

inline void validate(const PulseProgram& program) {
  detail::validate_body(program.events, 0);
  if (!std::isfinite(expanded_duration(program))) throw ConfigError("program duration is not finite");
}

/// Drops a leading state-preparation pulse, if any.
inline PulseProgram strip_preparation(PulseProgram program) {
  if (!program.events.empty() && std::holds_alternative<PulseEvent>(program.events.front().value))
    program.events.erase(program.events.begin());
  return program;
}

// ---------------------------------------------------------------------------
// Builders

/// How builders realize nominal rotations: instantaneous, or at a fixed Rabi
/// frequency with duration area / (2 pi rabi).
struct PulseSpec {
  std::optional<double> rabi_hz;

  PulseEvent make(double area, double phase) const {
    if (!rabi_hz) return PulseEvent::hard(area, phase);
    return PulseEvent::finite(*rabi_hz, area / (kTwoPi * *rabi_hz), phase);
  }
};

inline PulseProgram build_hahn_echo(double tau_s, const PulseSpec& spec = {}) {
  if (!(tau_s > 0.0)) throw ConfigError("hahn echo: tau must be positive");
  constexpr double pi = std::numbers::pi;
  return {{spec.make(pi / 2, 0.0), Wait{tau_s}, spec.make(pi, 0.0), Wait{tau_s}, Acquire{"echo"}}};
}

/// pi - delay - pi/2 - acquire. The readout pulse maps z onto -y, so the
/// acquired signal carries the pre-readout population.
inline PulseProgram build_inversion_recovery(double delay_s, const PulseSpec& spec = {}) {
  if (!(delay_s > 0.0)) throw ConfigError("inversion recovery: delay must be positive");
  constexpr double pi = std::numbers::pi;
  return {{spec.make(pi, 0.0), Wait{delay_s}, spec.make(pi / 2, 0.0), Acquire{"readout"}}};
}

enum class BangBangReadout {
  /// Acquire at the refocusing instant 2*N*tau_c after the initial pulse:
  /// the final wait of the last cycle is shortened by tau1.
  echo,
  /// Acquire after the last full cycle (tau1 + 2*N*tau_c).
  stroboscopic,
};

struct BangBangParams {
  double tau1_s = 1.2e-3;
  double tau_c_s = 2e-3;
  std::size_t n_cycles = 1;
  double initial_area_rad = std::numbers::pi / 2;
  /// Wait tau_c after the second (-pi) pulse of each pair.
  bool trailing_wait = true;
  BangBangReadout readout = BangBangReadout::echo;

  void validate() const {
    if (!(tau1_s > 0.0)) throw ConfigError("bang-bang: tau1 must be positive");
    if (!(tau_c_s > 0.0)) throw ConfigError("bang-bang: tau_c must be positive");
    if (!(initial_area_rad > 0.0)) throw ConfigError("bang-bang: initial area must be positive");
    if (readout == BangBangReadout::echo && n_cycles > 0 && trailing_wait && tau1_s > tau_c_s)
      throw ConfigError("bang-bang: echo readout needs tau1 <= tau_c");
  }
};

namespace detail {

inline std::vector<Event> bangbang_cycle(const BangBangParams& p, const PulseSpec& spec, double last_wait) {
  constexpr double pi = std::numbers::pi;
  std::vector<Event> cycle{spec.make(pi, 0.0), Wait{p.tau_c_s}, spec.make(pi, pi)};
  if (p.trailing_wait && last_wait > 0.0) cycle.emplace_back(Wait{last_wait});
  return cycle;
}

inline void append(std::vector<Event>& out, std::vector<Event> in) {
  for (auto& e : in) out.push_back(std::move(e));
}

inline void append_cycles(std::vector<Event>& out, const BangBangParams& p, const PulseSpec& spec, std::size_t n) {
  if (n == 1)
    append(out, bangbang_cycle(p, spec, p.tau_c_s));
  else if (n > 1)
    out.emplace_back(Repeat{n, bangbang_cycle(p, spec, p.tau_c_s)});
}

}  // namespace detail

/// initial pulse - tau1 - N x [pi(0) - tau_c - pi(pi) - tau_c] - acquire "echo".
inline PulseProgram build_bangbang(const BangBangParams& p, const PulseSpec& spec = {}) {
  p.validate();
  PulseProgram prog;
  auto& ev = prog.events;
  ev.emplace_back(spec.make(p.initial_area_rad, 0.0));
  ev.emplace_back(Wait{p.tau1_s});
  if (p.n_cycles > 0) {
    if (p.readout == BangBangReadout::stroboscopic || !p.trailing_wait) {
      detail::append_cycles(ev, p, spec, p.n_cycles);
    } else {
      detail::append_cycles(ev, p, spec, p.n_cycles - 1);
      detail::append(ev, detail::bangbang_cycle(p, spec, p.tau_c_s - p.tau1_s));
    }
  }
  ev.emplace_back(Acquire{"echo"});
  return prog;
}

/// Bang-Bang program with an echo acquisition after each cycle count in
/// `acquire_at` (ascending, positive). Labels are "echo_<n>".
inline PulseProgram build_bangbang_decay(const BangBangParams& p, const std::vector<std::size_t>& acquire_at,
                                         const PulseSpec& spec = {}) {
  p.validate();
  if (!p.trailing_wait || p.readout != BangBangReadout::echo)
    throw ConfigError("bang-bang decay: requires echo readout with trailing waits");
  PulseProgram prog;
  auto& ev = prog.events;
  ev.emplace_back(spec.make(p.initial_area_rad, 0.0));
  ev.emplace_back(Wait{p.tau1_s});
  std::size_t done = 0;
  for (std::size_t i = 0; i < acquire_at.size(); ++i) {
    const std::size_t n = acquire_at[i];
    if (n <= done) throw ConfigError("bang-bang decay: acquisition counts must be strictly ascending and positive");
    detail::append_cycles(ev, p, spec, n - done - 1);
    detail::append(ev, detail::bangbang_cycle(p, spec, p.tau_c_s - p.tau1_s));
    ev.emplace_back(Acquire{"echo_" + std::to_string(n)});
    if (i + 1 < acquire_at.size()) ev.emplace_back(Wait{p.tau1_s});
    done = n;
  }
  return prog;
}

// ---------------------------------------------------------------------------
// Decoupling criterion omega_c * tau_c <= 1

struct BathCutoff {
  double omega_c_rad_per_s = 0.0;
};

struct BangBangCheck {
  bool pass = true;
  double product = 0.0;
};

inline BangBangCheck validate_bangbang(BathCutoff cutoff, double tau_c_s) {
  const double product = cutoff.omega_c_rad_per_s * tau_c_s;
  return {product <= 1.0, product};
}

}  // namespace ddsim
