#pragma once

// Inhomogeneously broadened ensemble under a PulseProgram, with optional
// stochastic detuning noise per member.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ddsim/bloch.hpp"
#include "ddsim/error.hpp"
#include "ddsim/parallel.hpp"
#include "ddsim/quadrature.hpp"
#include "ddsim/sequence.hpp"

namespace ddsim {

/// FWHM of a Gaussian in units of its standard deviation, 2 sqrt(2 ln 2).
inline const double kGaussianFwhmPerSigma = 2.0 * std::sqrt(2.0 * std::log(2.0));

struct GaussianLine {
  double fwhm_hz = 4e3;
};
struct LorentzianLine {
  double fwhm_hz = 4e3;
};
struct ExplicitDetunings {
  std::vector<double> detunings_hz;
};
using LineShape = std::variant<GaussianLine, LorentzianLine, ExplicitDetunings>;

enum class Sampling { monte_carlo, gauss_quadrature };

struct EnsembleSpec {
  std::size_t size = 1;
  LineShape line = GaussianLine{};
  Sampling sampling = Sampling::monte_carlo;
  std::uint64_t seed = 1;
  /// Log-normal spread of per-member T2: t2_member = t2 * exp(spread * N(0,1)).
  double t2_log_spread = 0.0;

  static EnsembleSpec single(double detuning_hz = 0.0) {
    return {1, ExplicitDetunings{{detuning_hz}}, Sampling::monte_carlo, 1, 0.0};
  }
  /// n members at zero detuning, e.g. for noise-only runs.
  static EnsembleSpec homogeneous(std::size_t n) {
    return {n, ExplicitDetunings{std::vector<double>(n, 0.0)}, Sampling::monte_carlo, 1, 0.0};
  }
  static EnsembleSpec gaussian(double fwhm_hz, std::size_t size, Sampling sampling, std::uint64_t seed = 1) {
    return {size, GaussianLine{fwhm_hz}, sampling, seed, 0.0};
  }

  void validate() const {
    if (size < 1) throw ConfigError("ensemble size must be at least 1");
    if (!(t2_log_spread >= 0.0)) throw ConfigError("t2_log_spread must be non-negative");
    std::visit(
        [this](const auto& line) {
          using T = std::decay_t<decltype(line)>;
          if constexpr (std::is_same_v<T, ExplicitDetunings>) {
            if (line.detunings_hz.empty()) throw ConfigError("explicit detuning list is empty");
            for (double d : line.detunings_hz)
              if (!std::isfinite(d)) throw ConfigError("explicit detunings must be finite");
            if (sampling == Sampling::gauss_quadrature)
              throw ConfigError("gauss_quadrature sampling requires a gaussian line");
          } else {
            if (!(line.fwhm_hz > 0.0) || !std::isfinite(line.fwhm_hz)) throw ConfigError("line fwhm must be positive");
            if constexpr (std::is_same_v<T, LorentzianLine>) {
              if (sampling == Sampling::gauss_quadrature)
                throw ConfigError("gauss_quadrature sampling requires a gaussian line");
            }
          }
        },
        line);
  }
};

struct DetuningSample {
  std::vector<double> detunings_hz;
  std::vector<double> weights;  // normalized to 1
};

inline DetuningSample sample_detunings(const EnsembleSpec& spec) {
  spec.validate();
  DetuningSample out;
  if (const auto* ex = std::get_if<ExplicitDetunings>(&spec.line)) {
    out.detunings_hz = ex->detunings_hz;
    out.weights.assign(out.detunings_hz.size(), 1.0 / static_cast<double>(out.detunings_hz.size()));
    return out;
  }
  if (spec.sampling == Sampling::gauss_quadrature) {
    const double sigma = std::get<GaussianLine>(spec.line).fwhm_hz / kGaussianFwhmPerSigma;
    auto rule = gauss_hermite_normal(spec.size);
    out.detunings_hz.resize(spec.size);
    for (std::size_t i = 0; i < spec.size; ++i) out.detunings_hz[i] = sigma * rule.nodes[i];
    out.weights = std::move(rule.weights);
    return out;
  }
  std::mt19937_64 rng(mix64(spec.seed));
  out.detunings_hz.resize(spec.size);
  if (const auto* g = std::get_if<GaussianLine>(&spec.line)) {
    std::normal_distribution<double> normal(0.0, g->fwhm_hz / kGaussianFwhmPerSigma);
    for (auto& d : out.detunings_hz) d = normal(rng);
  } else {
    std::cauchy_distribution<double> cauchy(0.0, std::get<LorentzianLine>(spec.line).fwhm_hz / 2.0);
    for (auto& d : out.detunings_hz) d = cauchy(rng);
  }
  out.weights.assign(spec.size, 1.0 / static_cast<double>(spec.size));
  return out;
}

// ---------------------------------------------------------------------------
// Bath noise

/// Gaussian stationary noise with autocorrelation sigma^2 exp(-|t|/tau_b).
struct OrnsteinUhlenbeck {
  double sigma_hz = 0.0;
  double tau_b_s = 1.0;
};

/// Symmetric two-state noise +-amplitude; each state switches at flip_rate.
struct Telegraph {
  double amplitude_hz = 0.0;
  double flip_rate_hz = 1.0;
};

using NoiseComponent = std::variant<OrnsteinUhlenbeck, Telegraph>;

struct NoiseModel {
  std::vector<NoiseComponent> components;
  /// Trajectory resolution; 0 selects the default of (shortest correlation time) / 100.
  double dt_s = 0.0;

  static NoiseModel none() { return {}; }
  static NoiseModel ornstein_uhlenbeck(double sigma_hz, double tau_b_s, double dt_s = 0.0) {
    return {{OrnsteinUhlenbeck{sigma_hz, tau_b_s}}, dt_s};
  }

  bool active() const { return !components.empty(); }

  double shortest_correlation_time() const {
    double t = kInf;
    for (const auto& c : components) {
      if (const auto* ou = std::get_if<OrnsteinUhlenbeck>(&c))
        t = std::min(t, ou->tau_b_s);
      else
        t = std::min(t, 1.0 / (2.0 * std::get<Telegraph>(c).flip_rate_hz));
    }
    return t;
  }

  double resolved_dt() const { return dt_s > 0.0 ? dt_s : shortest_correlation_time() / 100.0; }

  void validate() const {
    if (dt_s < 0.0 || !std::isfinite(dt_s)) throw ConfigError("noise dt must be positive");
    for (const auto& c : components) {
      if (const auto* ou = std::get_if<OrnsteinUhlenbeck>(&c)) {
        if (!(ou->sigma_hz >= 0.0) || !std::isfinite(ou->sigma_hz)) throw ConfigError("OU sigma must be >= 0");
        if (!(ou->tau_b_s > 0.0) || !std::isfinite(ou->tau_b_s)) throw ConfigError("OU tau_b must be positive");
      } else {
        const auto& tg = std::get<Telegraph>(c);
        if (!(tg.amplitude_hz >= 0.0) || !std::isfinite(tg.amplitude_hz))
          throw ConfigError("telegraph amplitude must be >= 0");
        if (!(tg.flip_rate_hz > 0.0) || !std::isfinite(tg.flip_rate_hz))
          throw ConfigError("telegraph flip rate must be positive");
      }
    }
    if (active() && resolved_dt() > shortest_correlation_time() / 10.0 * (1.0 + 1e-12))
      throw ConfigError("noise dt must not exceed a tenth of the bath correlation time");
  }
};

inline std::size_t trajectory_steps(double dt, double duration) {
  return static_cast<std::size_t>(std::ceil(duration / dt)) + 1;
}

/// Exact discrete OU update on a grid of step dt, stationary start.
inline std::vector<double> generate_ou_trajectory(const OrnsteinUhlenbeck& ou, double dt, double duration,
                                                  std::uint64_t seed) {
  if (!(dt > 0.0)) throw ConfigError("OU trajectory: dt must be positive");
  const std::size_t n = trajectory_steps(dt, duration);
  std::vector<double> x(n, 0.0);
  if (ou.sigma_hz == 0.0) return x;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double a = std::exp(-dt / ou.tau_b_s);
  const double kick = ou.sigma_hz * std::sqrt(-std::expm1(-2.0 * dt / ou.tau_b_s));
  x[0] = ou.sigma_hz * normal(rng);
  for (std::size_t k = 1; k < n; ++k) x[k] = x[k - 1] * a + kick * normal(rng);
  return x;
}

inline std::vector<double> generate_telegraph_trajectory(const Telegraph& tg, double dt, double duration,
                                                         std::uint64_t seed) {
  const std::size_t n = trajectory_steps(dt, duration);
  std::vector<double> x(n, 0.0);
  if (tg.amplitude_hz == 0.0) return x;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform;
  const double p_flip = -0.5 * std::expm1(-2.0 * tg.flip_rate_hz * dt);
  double s = uniform(rng) < 0.5 ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && uniform(rng) < p_flip) s = -s;
    x[k] = s * tg.amplitude_hz;
  }
  return x;
}

/// Sum of all components for one member.
inline std::vector<double> generate_noise_trajectory(const NoiseModel& noise, double duration, std::uint64_t seed) {
  const double dt = noise.resolved_dt();
  std::vector<double> total(trajectory_steps(dt, duration), 0.0);
  for (std::size_t c = 0; c < noise.components.size(); ++c) {
    const std::uint64_t s = member_seed(seed, c);
    const auto part = std::holds_alternative<OrnsteinUhlenbeck>(noise.components[c])
                          ? generate_ou_trajectory(std::get<OrnsteinUhlenbeck>(noise.components[c]), dt, duration, s)
                          : generate_telegraph_trajectory(std::get<Telegraph>(noise.components[c]), dt, duration, s);
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += part[k];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Running programs

struct RunOptions {
  BlochState initial_state{0.0, 0.0, 1.0};
  /// When set, hard pulses execute as finite pulses of the same area at this Rabi frequency.
  std::optional<double> rabi_hz;
  unsigned threads = 0;
  /// Record the mean Bloch vector after every expanded event.
  bool record_trajectory = true;
  std::size_t max_trajectory_steps = std::size_t{1} << 25;
  double max_work = 2e10;  // members x noise steps
};

struct Acquisition {
  std::string label;
  double time_s = 0.0;
  BlochState mean;
};

struct SimulationResult {
  std::vector<double> sample_times;
  std::vector<BlochState> mean_bloch;
  std::vector<Acquisition> acquisitions;
  BlochState final_mean;
  double duration_s = 0.0;
  std::size_t members = 0;
};

struct EchoAmplitude {
  double magnitude = 0.0;
  double phase_rad = 0.0;
};

inline EchoAmplitude transverse_amplitude(BlochState v) { return {std::hypot(v.x, v.y), std::atan2(v.y, v.x)}; }

/// Amplitude of the last acquisition carrying `label`.
inline EchoAmplitude echo_amplitude(const SimulationResult& result, std::string_view label) {
  for (auto it = result.acquisitions.rbegin(); it != result.acquisitions.rend(); ++it)
    if (it->label == label) return transverse_amplitude(it->mean);
  throw SimulationError("no acquisition labelled '" + std::string(label) + "'");
}

/// Signed population read out by a phase-0 pi/2 pulse (which maps z onto -y).
inline double readout_population(const SimulationResult& result, std::string_view label) {
  for (auto it = result.acquisitions.rbegin(); it != result.acquisitions.rend(); ++it)
    if (it->label == label) return -it->mean.y;
  throw SimulationError("no acquisition labelled '" + std::string(label) + "'");
}

namespace detail {

inline std::size_t count_acquires(const std::vector<Event>& events) {
  std::size_t n = 0;
  for (const auto& e : events) {
    if (const auto* r = std::get_if<Repeat>(&e.value))
      n += r->count * count_acquires(r->body);
    else if (std::holds_alternative<Acquire>(e.value))
      ++n;
  }
  return n;
}

// Per-member noise phase: cumulative[k] = 2 pi dt sum_{j<k} x_j.
class NoisePhase {
 public:
  NoisePhase() = default;
  NoisePhase(std::vector<double> samples, double dt) : x_(std::move(samples)), dt_(dt) {
    cumulative_.resize(x_.size() + 1);
    cumulative_[0] = 0.0;
    for (std::size_t k = 0; k < x_.size(); ++k) cumulative_[k + 1] = cumulative_[k] + kTwoPi * dt_ * x_[k];
  }

  bool empty() const { return x_.empty(); }

  double value_at(double t) const { return x_[index(t)]; }

  double phase_between(double t0, double t1) const { return phase_at(t1) - phase_at(t0); }

 private:
  std::size_t index(double t) const {
    const double k = std::floor(t / dt_);
    if (k <= 0.0) return 0;
    return std::min(static_cast<std::size_t>(k), x_.size() - 1);
  }
  double phase_at(double t) const {
    const std::size_t k = index(t);
    return cumulative_[k] + kTwoPi * x_[k] * (t - static_cast<double>(k) * dt_);
  }

  std::vector<double> x_;
  std::vector<double> cumulative_;
  double dt_ = 1.0;
};

struct Accumulator {
  std::vector<BlochState> acquisitions;
  std::vector<BlochState> trajectory;
  BlochState final_state{0.0, 0.0, 0.0};
};

class MemberRun {
 public:
  MemberRun(const RunOptions& opts, double static_detuning, const RelaxationParams& relax, const NoisePhase& noise,
            double weight, Accumulator& acc)
      : opts_(opts), detuning_(static_detuning), relax_(relax), noise_(noise), weight_(weight), acc_(acc) {}

  void run(const std::vector<Event>& events) {
    state_ = opts_.initial_state;
    record();
    walk(events);
    acc_.final_state = acc_.final_state + weight_ * state_;
  }

 private:
  void walk(const std::vector<Event>& events) {
    for (const auto& e : events) {
      if (const auto* p = std::get_if<PulseEvent>(&e.value)) {
        pulse(*p);
      } else if (const auto* w = std::get_if<Wait>(&e.value)) {
        wait(w->duration_s);
      } else if (const auto* r = std::get_if<Repeat>(&e.value)) {
        for (std::size_t k = 0; k < r->count; ++k) walk(r->body);
      } else {
        auto& slot = acc_.acquisitions[acq_index_++];
        slot = slot + weight_ * state_;
      }
    }
  }

  void pulse(const PulseEvent& p) {
    PulseEvent applied = p;
    if (p.mode == PulseEvent::Mode::hard && opts_.rabi_hz)
      applied = PulseEvent::finite(*opts_.rabi_hz, p.area_rad / (kTwoPi * *opts_.rabi_hz), p.phase_rad);
    // noise is held at its value at the pulse start
    const double detuning = detuning_ + (noise_.empty() ? 0.0 : noise_.value_at(time_));
    state_ = apply_pulse(state_, applied, detuning);
    time_ += applied.occupied_time();
    record();
  }

  void wait(double d) {
    double phase = kTwoPi * detuning_ * d;
    if (!noise_.empty()) phase += noise_.phase_between(time_, time_ + d);
    state_ = precess(state_, phase, d, relax_);
    time_ += d;
    record();
  }

  void record() {
    if (!opts_.record_trajectory) return;
    auto& slot = acc_.trajectory[sample_index_++];
    slot = slot + weight_ * state_;
  }

  const RunOptions& opts_;
  double detuning_;
  RelaxationParams relax_;
  const NoisePhase& noise_;
  double weight_;
  Accumulator& acc_;
  BlochState state_;
  double time_ = 0.0;
  std::size_t acq_index_ = 0;
  std::size_t sample_index_ = 0;
};

// Event timing is identical for every member; derive it once.
struct Timeline {
  std::vector<double> sample_times;
  std::vector<Acquisition> acquisitions;

  void walk(const std::vector<Event>& events, const RunOptions& opts, bool record, double& t) {
    for (const auto& e : events) {
      if (const auto* p = std::get_if<PulseEvent>(&e.value)) {
        if (p->mode == PulseEvent::Mode::finite)
          t += p->duration_s;
        else if (opts.rabi_hz)
          t += p->area_rad / (kTwoPi * *opts.rabi_hz);
        if (record) sample_times.push_back(t);
      } else if (const auto* w = std::get_if<Wait>(&e.value)) {
        t += w->duration_s;
        if (record) sample_times.push_back(t);
      } else if (const auto* r = std::get_if<Repeat>(&e.value)) {
        for (std::size_t k = 0; k < r->count; ++k) walk(r->body, opts, record, t);
      } else {
        acquisitions.push_back({std::get<Acquire>(e.value).label, t, {}});
      }
    }
  }
};

}  // namespace detail

/// Ensemble members are processed in fixed blocks whose partial sums are
/// reduced in block order, so results are bit-identical for any thread count.
inline SimulationResult run_program(const PulseProgram& program, const EnsembleSpec& ensemble,
                                    const NoiseModel& noise, const RelaxationParams& relax,
                                    std::uint64_t master_seed, const RunOptions& opts = {}) {
  validate(program);
  noise.validate();
  relax.validate();
  if (opts.rabi_hz && !(*opts.rabi_hz > 0.0)) throw ConfigError("rabi frequency must be positive");
  const DetuningSample sample = sample_detunings(ensemble);
  const std::size_t members = sample.detunings_hz.size();

  SimulationResult result;
  result.members = members;
  {
    detail::Timeline tl;
    double t = 0.0;
    if (opts.record_trajectory) tl.sample_times.push_back(0.0);
    tl.walk(program.events, opts, opts.record_trajectory, t);
    result.duration_s = t;
    result.sample_times = std::move(tl.sample_times);
    result.acquisitions = std::move(tl.acquisitions);
  }
  if (result.acquisitions.size() != detail::count_acquires(program.events))
    throw SimulationError("internal: acquisition count mismatch");

  const double dt = noise.active() ? noise.resolved_dt() : 0.0;
  if (noise.active()) {
    const std::size_t steps = trajectory_steps(dt, result.duration_s);
    if (steps > opts.max_trajectory_steps)
      throw SimulationError("noise trajectory of " + std::to_string(steps) + " steps exceeds the configured limit");
    if (static_cast<double>(steps) * static_cast<double>(members) > opts.max_work)
      throw SimulationError("members x noise steps exceeds the configured work budget");
  }

  constexpr std::size_t kBlock = 16;
  constexpr std::size_t kWave = 32;
  const std::size_t n_blocks = (members + kBlock - 1) / kBlock;
  const std::size_t n_acq = result.acquisitions.size();
  const std::size_t n_samples = result.sample_times.size();

  std::vector<BlochState> acq_total(n_acq, {0, 0, 0});
  std::vector<BlochState> traj_total(n_samples, {0, 0, 0});
  BlochState final_total{0, 0, 0};

  for (std::size_t wave_start = 0; wave_start < n_blocks; wave_start += kWave) {
    const std::size_t wave_blocks = std::min(kWave, n_blocks - wave_start);
    std::vector<detail::Accumulator> partial(wave_blocks);
    parallel_for(wave_blocks, opts.threads, [&](std::size_t wb) {
      auto& acc = partial[wb];
      acc.acquisitions.assign(n_acq, {0, 0, 0});
      acc.trajectory.assign(n_samples, {0, 0, 0});
      const std::size_t first = (wave_start + wb) * kBlock;
      const std::size_t last = std::min(members, first + kBlock);
      for (std::size_t m = first; m < last; ++m) {
        const std::uint64_t seed = member_seed(master_seed, m);
        RelaxationParams member_relax = relax;
        if (ensemble.t2_log_spread > 0.0 && std::isfinite(relax.t2_s)) {
          std::mt19937_64 rng(mix64(seed ^ 0x7432AB1ULL));
          std::normal_distribution<double> normal;
          member_relax.t2_s = relax.t2_s * std::exp(ensemble.t2_log_spread * normal(rng));
        }
        detail::NoisePhase phase;
        if (noise.active()) phase = detail::NoisePhase(generate_noise_trajectory(noise, result.duration_s, seed), dt);
        detail::MemberRun run(opts, sample.detunings_hz[m], member_relax, phase, sample.weights[m], acc);
        run.run(program.events);
      }
    });
    for (const auto& acc : partial) {
      for (std::size_t i = 0; i < n_acq; ++i) acq_total[i] = acq_total[i] + acc.acquisitions[i];
      for (std::size_t i = 0; i < n_samples; ++i) traj_total[i] = traj_total[i] + acc.trajectory[i];
      final_total = final_total + acc.final_state;
    }
  }

  for (std::size_t i = 0; i < n_acq; ++i) result.acquisitions[i].mean = acq_total[i];
  result.mean_bloch = std::move(traj_total);
  result.final_mean = final_total;
  return result;
}

}  // namespace ddsim
