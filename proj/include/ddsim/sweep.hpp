#pragma once

// Decoherence-time sweeps: Bang-Bang T2 against tau_c, Hahn-echo decay curves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ddsim/analysis.hpp"
#include "ddsim/ensemble.hpp"
#include "ddsim/sequence.hpp"
#include "ddsim/tomography.hpp"

namespace ddsim {

/// Hahn-echo amplitude under OU noise at total echo time t = 2 tau.
inline double ou_echo_amplitude(double sigma_hz, double tau_b_s, double t_s) {
  const double u = t_s / tau_b_s;
  const double s = kTwoPi * sigma_hz * tau_b_s;
  return std::exp(-s * s * (u - 3.0 + 4.0 * std::exp(-u / 2.0) - std::exp(-u)));
}

/// OU sigma giving a Hahn-echo 1/e time (total echo time) of t_e.
inline double ou_sigma_for_echo_time(double tau_b_s, double t_e_s) {
  if (!(tau_b_s > 0.0) || !(t_e_s > 0.0)) throw ConfigError("echo calibration needs positive tau_b and target time");
  const double u = t_e_s / tau_b_s;
  const double shape = u - 3.0 + 4.0 * std::exp(-u / 2.0) - std::exp(-u);
  return 1.0 / (kTwoPi * tau_b_s * std::sqrt(shape));
}

struct SweepConfig {
  /// tau1 and the initial pulse area; tau_c and n_cycles are set per point.
  BangBangParams base;
  PulseSpec pulses;
  SimContext context;
  /// Each decay extends to roughly this much evolution time.
  double total_time_s = 10.0;
  std::size_t points_per_curve = 12;
};

struct SweepRow {
  double tau_c_s = 0.0;
  double tau1_s = 0.0;
  DecayCurve curve;
  double t2_s = INFINITY;
  double t2_sigma_s = INFINITY;
  double one_over_e_s = INFINITY;
  bool no_decay = false;
  /// Empty on success, otherwise the fit failure message.
  std::string status;
};

/// Cycle counts at which the decay is sampled: roughly evenly spread up to
/// total_time / (2 tau_c), strictly ascending, at least one.
inline std::vector<std::size_t> decay_sample_counts(double tau_c_s, double total_time_s, std::size_t points) {
  const auto n_max = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(total_time_s / (2.0 * tau_c_s))));
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k <= points; ++k) {
    const auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(n_max) /
                                                 static_cast<double>(points))));
    if (out.empty() || n > out.back()) out.push_back(n);
  }
  return out;
}

/// Echo magnitudes after each sampled cycle count of one Bang-Bang run.
inline DecayCurve bangbang_decay_curve(const BangBangParams& params, const std::vector<std::size_t>& counts,
                                       const SimContext& ctx, const PulseSpec& pulses = {}) {
  const auto program = build_bangbang_decay(params, counts, pulses);
  RunOptions opts = ctx.options;
  opts.record_trajectory = false;
  const auto sim = run_program(program, ctx.ensemble, ctx.noise, ctx.relax, ctx.seed, opts);
  DecayCurve c;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    c.times_s.push_back(2.0 * static_cast<double>(counts[i]) * params.tau_c_s);
    c.amplitudes.push_back(transverse_amplitude(sim.acquisitions[i].mean).magnitude);
  }
  return c;
}

/// Bang-Bang T2 for each tau_c, rows sorted by tau_c. tau1 is clamped to
/// tau_c / 2 where the configured value would not fit inside a cycle.
inline std::vector<SweepRow> sweep_t2_vs_tauc(std::vector<double> tau_c_list, const SweepConfig& cfg) {
  if (tau_c_list.empty()) throw ConfigError("sweep: tau_c list is empty");
  if (!(cfg.total_time_s > 0.0)) throw ConfigError("sweep: total time must be positive");
  if (cfg.points_per_curve < 4) throw ConfigError("sweep: need at least 4 points per decay curve");
  std::sort(tau_c_list.begin(), tau_c_list.end());
  std::vector<SweepRow> rows;
  for (double tau_c : tau_c_list) {
    if (!(tau_c > 0.0)) throw ConfigError("sweep: tau_c values must be positive");
    SweepRow row;
    row.tau_c_s = tau_c;
    BangBangParams p = cfg.base;
    p.tau_c_s = tau_c;
    p.tau1_s = std::min(cfg.base.tau1_s, tau_c / 2.0);
    p.readout = BangBangReadout::echo;
    p.trailing_wait = true;
    row.tau1_s = p.tau1_s;
    row.curve = bangbang_decay_curve(p, decay_sample_counts(tau_c, cfg.total_time_s, cfg.points_per_curve),
                                     cfg.context, cfg.pulses);
    try {
      const auto fit = fit_decay(row.curve, DecayModel::single_exp);
      row.no_decay = fit.no_decay;
      row.t2_s = fit.value("t2_s");
      row.t2_sigma_s = fit.sigma("t2_s");
      row.one_over_e_s = fit.one_over_e_time_s;
    } catch (const FitError& e) {
      row.status = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Hahn-echo magnitudes for a list of half-echo times tau (curve times are 2 tau).
inline DecayCurve hahn_echo_curve(const std::vector<double>& taus, const SimContext& ctx, const PulseSpec& pulses = {}) {
  DecayCurve c;
  RunOptions opts = ctx.options;
  opts.record_trajectory = false;
  for (double tau : taus) {
    const auto sim = run_program(build_hahn_echo(tau, pulses), ctx.ensemble, ctx.noise, ctx.relax, ctx.seed, opts);
    c.times_s.push_back(2.0 * tau);
    c.amplitudes.push_back(echo_amplitude(sim, "echo").magnitude);
  }
  return c;
}

}  // namespace ddsim
