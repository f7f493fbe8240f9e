#pragma once

// Process tomography of a simulated program viewed as a qubit channel,
// represented by its Pauli transfer matrix (rows/columns ordered I, X, Y, Z).

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ddsim/ensemble.hpp"
#include "ddsim/sequence.hpp"

namespace ddsim {

struct PauliTransferMatrix {
  std::array<std::array<double, 4>, 4> r{};

  static PauliTransferMatrix identity() {
    PauliTransferMatrix m;
    for (int i = 0; i < 4; ++i) m.r[i][i] = 1.0;
    return m;
  }
  static PauliTransferMatrix diagonal(double i, double x, double y, double z) {
    PauliTransferMatrix m;
    m.r[0][0] = i;
    m.r[1][1] = x;
    m.r[2][2] = y;
    m.r[3][3] = z;
    return m;
  }

  double operator()(int row, int col) const { return r[row][col]; }
  double xx() const { return r[1][1]; }
  double yy() const { return r[2][2]; }
  double zz() const { return r[3][3]; }
};

/// Process (entanglement) fidelity tr(ideal^T ptm) / 4.
inline double process_fidelity(const PauliTransferMatrix& ptm, const PauliTransferMatrix& ideal) {
  double tr = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) tr += ideal.r[k][i] * ptm.r[k][i];
  return tr / 4.0;
}

/// Average gate fidelity of a qubit channel with process fidelity f.
inline double average_gate_fidelity(double process_fidelity) { return (2.0 * process_fidelity + 1.0) / 3.0; }

enum class Preparation { plus_z, minus_z, plus_x, plus_y };

inline constexpr std::array<Preparation, 4> kPreparations{Preparation::plus_z, Preparation::minus_z,
                                                          Preparation::plus_x, Preparation::plus_y};

inline BlochState prepared_state(Preparation p) {
  switch (p) {
    case Preparation::plus_z: return {0, 0, 1};
    case Preparation::minus_z: return {0, 0, -1};
    case Preparation::plus_x: return {1, 0, 0};
    case Preparation::plus_y: return {0, 1, 0};
  }
  return {};
}

inline const char* preparation_name(Preparation p) {
  switch (p) {
    case Preparation::plus_z: return "+z";
    case Preparation::minus_z: return "-z";
    case Preparation::plus_x: return "+x";
    case Preparation::plus_y: return "+y";
  }
  return "?";
}

/// Everything run_program needs besides the program and the initial state.
struct SimContext {
  EnsembleSpec ensemble = EnsembleSpec::single();
  NoiseModel noise;
  RelaxationParams relax;
  std::uint64_t seed = 1;
  RunOptions options;
};

struct ProcessResult {
  PauliTransferMatrix ptm;
  PauliTransferMatrix ideal = PauliTransferMatrix::identity();
  double fidelity = 1.0;
  std::array<BlochState, 4> inputs{};
  std::array<BlochState, 4> outputs{};
};

/// Affine Bloch map v -> c + T v reconstructed from the four preparations.
inline PauliTransferMatrix reconstruct_ptm(const std::array<BlochState, 4>& out) {
  const BlochState& pz = out[0];
  const BlochState& mz = out[1];
  const BlochState c = 0.5 * (pz + mz);
  const BlochState tz = 0.5 * (pz - mz);
  const BlochState tx = out[2] - c;
  const BlochState ty = out[3] - c;
  PauliTransferMatrix m;
  m.r[0] = {1.0, 0.0, 0.0, 0.0};
  m.r[1] = {c.x, tx.x, ty.x, tz.x};
  m.r[2] = {c.y, tx.y, ty.y, tz.y};
  m.r[3] = {c.z, tx.z, ty.z, tz.z};
  return m;
}

/// Runs `process` (no preparation pulse) once per preparation. The channel
/// output is the mean Bloch vector at the last acquisition, or at the end of
/// the program when it has none.
inline ProcessResult run_process_tomography(const PulseProgram& process, const SimContext& ctx,
                                            const PauliTransferMatrix& ideal = PauliTransferMatrix::identity()) {
  ProcessResult res;
  res.ideal = ideal;
  for (std::size_t i = 0; i < kPreparations.size(); ++i) {
    RunOptions opts = ctx.options;
    opts.initial_state = prepared_state(kPreparations[i]);
    opts.record_trajectory = false;
    const auto sim = run_program(process, ctx.ensemble, ctx.noise, ctx.relax, ctx.seed, opts);
    res.inputs[i] = opts.initial_state;
    res.outputs[i] = sim.acquisitions.empty() ? sim.final_mean : sim.acquisitions.back().mean;
  }
  res.ptm = reconstruct_ptm(res.outputs);
  res.fidelity = process_fidelity(res.ptm, ideal);
  return res;
}

/// One tomography run per cycle count, all sharing the context's seeds.
inline std::vector<ProcessResult> tomography_series(const BangBangParams& params, const std::vector<std::size_t>& n_list,
                                                    const SimContext& ctx, const PulseSpec& spec = {}) {
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] < n_list[i - 1]) throw ConfigError("tomography n_list must be sorted ascending");
  std::vector<ProcessResult> out;
  out.reserve(n_list.size());
  for (std::size_t n : n_list) {
    BangBangParams p = params;
    p.n_cycles = n;
    out.push_back(run_process_tomography(strip_preparation(build_bangbang(p, spec)), ctx));
  }
  return out;
}

}  // namespace ddsim
