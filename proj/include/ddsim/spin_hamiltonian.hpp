#pragma once

// I = 5/2 ground-state hyperfine Hamiltonian
//
//   H = sum_kl Q_kl I_k I_l + sum_kl b_k M_kl I_l
//
// with Q in Hz and M in Hz/G. Spin operators use the standard angular
// momentum convention <m|I_z|m> = m, basis ordered m = +5/2 ... -5/2.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ddsim/error.hpp"
#include "ddsim/nelder_mead.hpp"
#include "ddsim/parallel.hpp"

namespace ddsim {

inline constexpr int kSpinDim = 6;
inline constexpr double kSpinI = 2.5;

using SpinMatrix = Eigen::Matrix<std::complex<double>, kSpinDim, kSpinDim>;

/// I_x, I_y, I_z for I = 5/2.
inline const std::array<SpinMatrix, 3>& spin_operators() {
  static const std::array<SpinMatrix, 3> ops = [] {
    SpinMatrix plus = SpinMatrix::Zero();
    SpinMatrix iz = SpinMatrix::Zero();
    for (int a = 0; a < kSpinDim; ++a) {
      const double m = kSpinI - a;
      iz(a, a) = m;
      if (a > 0) plus(a - 1, a) = std::sqrt(kSpinI * (kSpinI + 1.0) - m * (m + 1.0));
    }
    const SpinMatrix minus = plus.adjoint();
    const std::complex<double> i(0.0, 1.0);
    return std::array<SpinMatrix, 3>{0.5 * (plus + minus), (plus - minus) / (2.0 * i), iz};
  }();
  return ops;
}

struct SpinSystem {
  Eigen::Matrix3d q_tensor_hz = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d m_tensor_hz_per_g = Eigen::Matrix3d::Zero();

  void validate() const {
    if (!q_tensor_hz.allFinite() || !m_tensor_hz_per_g.allFinite())
      throw ConfigError("spin system tensors must be finite");
    const double scale = std::max(1.0, q_tensor_hz.cwiseAbs().maxCoeff());
    if ((q_tensor_hz - q_tensor_hz.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ConfigError("quadrupole tensor must be symmetric");
  }

  /// Axial quadrupole D (I_z^2 - I(I+1)/3) with optional rhombic E (I_x^2 - I_y^2).
  static SpinSystem axial(double d_hz, double e_hz, const Eigen::Matrix3d& m_tensor) {
    SpinSystem s;
    s.q_tensor_hz = Eigen::Vector3d(-d_hz / 3.0 + e_hz, -d_hz / 3.0 - e_hz, 2.0 * d_hz / 3.0).asDiagonal();
    s.m_tensor_hz_per_g = m_tensor;
    return s;
  }
};

using FieldPoint = Eigen::Vector3d;  // gauss, crystal frame

/// Operators (M.I)_k whose expectation gives dE/db_k.
inline std::array<SpinMatrix, 3> zeeman_operators(const SpinSystem& sys) {
  const auto& I = spin_operators();
  std::array<SpinMatrix, 3> out;
  for (int k = 0; k < 3; ++k) {
    out[k] = SpinMatrix::Zero();
    for (int l = 0; l < 3; ++l) out[k] += sys.m_tensor_hz_per_g(k, l) * I[l];
  }
  return out;
}

inline SpinMatrix quadrupole_hamiltonian(const SpinSystem& sys) {
  const auto& I = spin_operators();
  SpinMatrix h = SpinMatrix::Zero();
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) h += sys.q_tensor_hz(k, l) * (I[k] * I[l]);
  return h;
}

inline SpinMatrix hamiltonian(const SpinSystem& sys, const FieldPoint& b) {
  SpinMatrix h = quadrupole_hamiltonian(sys);
  const auto mi = zeeman_operators(sys);
  for (int k = 0; k < 3; ++k) h += b[k] * mi[k];
  return h;
}

struct LevelDiagram {
  std::array<double, kSpinDim> energies{};  // ascending, Hz
  SpinMatrix vectors;                       // column n is the eigenvector of energies[n]

  double transition(int i, int j) const { return energies[static_cast<std::size_t>(j)] - energies[static_cast<std::size_t>(i)]; }
};

/// Precomputed operators for repeated evaluation at many fields.
class HamiltonianModel {
 public:
  explicit HamiltonianModel(const SpinSystem& sys) : sys_(sys) {
    sys.validate();
    hq_ = quadrupole_hamiltonian(sys);
    mi_ = zeeman_operators(sys);
  }

  const SpinSystem& system() const { return sys_; }
  const std::array<SpinMatrix, 3>& zeeman() const { return mi_; }

  LevelDiagram eigensystem(const FieldPoint& b, bool vectors = true) const {
    SpinMatrix h = hq_;
    for (int k = 0; k < 3; ++k) h += b[k] * mi_[k];
    Eigen::SelfAdjointEigenSolver<SpinMatrix> solver(h, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    LevelDiagram out;
    for (int n = 0; n < kSpinDim; ++n) out.energies[static_cast<std::size_t>(n)] = solver.eigenvalues()[n];
    if (vectors) out.vectors = solver.eigenvectors();
    return out;
  }

 private:
  SpinSystem sys_;
  SpinMatrix hq_;
  std::array<SpinMatrix, 3> mi_;
};

inline LevelDiagram eigensystem(const SpinSystem& sys, const FieldPoint& b) {
  return HamiltonianModel(sys).eigensystem(b);
}

namespace detail {
inline void check_levels(int i, int j) {
  if (i < 0 || j >= kSpinDim || i >= j) throw ConfigError("transition levels must satisfy 0 <= i < j <= 5");
}

inline double level_gap(const LevelDiagram& d, int n) {
  double gap = std::numeric_limits<double>::infinity();
  if (n > 0) gap = std::min(gap, d.energies[static_cast<std::size_t>(n)] - d.energies[static_cast<std::size_t>(n - 1)]);
  if (n + 1 < kSpinDim)
    gap = std::min(gap, d.energies[static_cast<std::size_t>(n + 1)] - d.energies[static_cast<std::size_t>(n)]);
  return gap;
}
}  // namespace detail

inline double transition_frequency(const SpinSystem& sys, const FieldPoint& b, int i, int j) {
  detail::check_levels(i, j);
  return HamiltonianModel(sys).eigensystem(b, false).transition(i, j);
}

/// Hellmann-Feynman gradient of f_ij = e_j - e_i with respect to b, in Hz/G.
inline Eigen::Vector3d field_gradient(const HamiltonianModel& model, const FieldPoint& b, int i, int j,
                                      double degeneracy_threshold_hz = 1.0) {
  detail::check_levels(i, j);
  const auto d = model.eigensystem(b);
  if (detail::level_gap(d, i) < degeneracy_threshold_hz || detail::level_gap(d, j) < degeneracy_threshold_hz)
    throw DegeneracyError("levels " + std::to_string(i) + "/" + std::to_string(j) +
                          " are degenerate at this field; gradient undefined");
  Eigen::Vector3d g;
  const auto vi = d.vectors.col(i);
  const auto vj = d.vectors.col(j);
  for (int k = 0; k < 3; ++k) {
    const auto& op = model.zeeman()[static_cast<std::size_t>(k)];
    g[k] = (vj.adjoint() * op * vj)(0, 0).real() - (vi.adjoint() * op * vi)(0, 0).real();
  }
  return g;
}

inline Eigen::Vector3d field_gradient(const SpinSystem& sys, const FieldPoint& b, int i, int j,
                                      double degeneracy_threshold_hz = 1.0) {
  return field_gradient(HamiltonianModel(sys), b, i, j, degeneracy_threshold_hz);
}

/// Second derivatives of f_ij by central differences of the analytic gradient.
inline Eigen::Matrix3d frequency_hessian(const HamiltonianModel& model, const FieldPoint& b, int i, int j,
                                         double step_g = 1e-3, double degeneracy_threshold_hz = 1.0) {
  Eigen::Matrix3d h;
  for (int k = 0; k < 3; ++k) {
    FieldPoint up = b, down = b;
    up[k] += step_g;
    down[k] -= step_g;
    h.col(k) = (field_gradient(model, up, i, j, degeneracy_threshold_hz) -
                field_gradient(model, down, i, j, degeneracy_threshold_hz)) /
               (2.0 * step_g);
  }
  return 0.5 * (h + h.transpose());
}

struct CriticalPointOptions {
  std::size_t starts = 8;
  /// Extra starts are drawn uniformly from a cube of this half-width around b_init.
  double box_half_width_g = 50.0;
  /// Residual gradient norm accepted as critical; 0 selects 1e-3 x spectral norm of M.
  double tolerance_hz_per_g = 0.0;
  double initial_step_g = 5.0;
  std::size_t max_iterations = 4000;
  std::uint64_t seed = 1;
  double degeneracy_threshold_hz = 1.0;
  unsigned threads = 0;
};

struct CriticalPointResult {
  FieldPoint b_cp = FieldPoint::Zero();
  double residual_gradient_norm = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  Eigen::Matrix3d curvature = Eigen::Matrix3d::Zero();
  double frequency_hz = 0.0;
  double tolerance_hz_per_g = 0.0;
  bool converged = false;
  std::size_t best_start = 0;
  std::size_t iterations = 0;
};

inline double default_gradient_tolerance(const SpinSystem& sys) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sys.m_tensor_hz_per_g);
  return 1e-3 * svd.singularValues()[0];
}

/// Multi-start simplex minimization of |grad f_ij|^2. When no start reaches
/// the tolerance the best point is still returned with converged = false.
inline CriticalPointResult find_critical_point(const SpinSystem& sys, const FieldPoint& b_init, int i, int j,
                                               const CriticalPointOptions& opts = {}) {
  detail::check_levels(i, j);
  if (opts.starts < 1) throw ConfigError("critical point search needs at least one start");
  if (!b_init.allFinite()) throw ConfigError("initial field must be finite");
  const HamiltonianModel model(sys);
  const double tol = opts.tolerance_hz_per_g > 0.0 ? opts.tolerance_hz_per_g : default_gradient_tolerance(sys);

  std::vector<FieldPoint> starts{b_init};
  std::mt19937_64 rng(mix64(opts.seed));
  std::uniform_real_distribution<double> box(-opts.box_half_width_g, opts.box_half_width_g);
  while (starts.size() < opts.starts) starts.push_back(b_init + FieldPoint(box(rng), box(rng), box(rng)));

  auto objective = [&](const std::vector<double>& x) {
    try {
      return field_gradient(model, FieldPoint(x[0], x[1], x[2]), i, j, opts.degeneracy_threshold_hz).squaredNorm();
    } catch (const DegeneracyError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<NelderMeadResult> runs(starts.size());
  parallel_for(starts.size(), opts.threads, [&](std::size_t s) {
    NelderMeadOptions nm;
    nm.max_iterations = opts.max_iterations;
    nm.x_tolerance = 1e-9 * std::max(1.0, b_init.norm());
    std::vector<double> x{starts[s][0], starts[s][1], starts[s][2]};
    double step = opts.initial_step_g;
    std::size_t iters = 0;
    NelderMeadResult r;
    // restart from the incumbent with a fresh simplex to escape a collapsed one
    for (int round = 0; round < 3; ++round) {
      r = nelder_mead(objective, x, step, nm);
      iters += r.iterations;
      x = r.x;
      step = std::max(step * 0.1, 1e-3);
    }
    r.iterations = iters;
    runs[s] = std::move(r);
  });

  std::size_t best = 0;
  for (std::size_t s = 1; s < runs.size(); ++s)
    if (runs[s].value < runs[best].value) best = s;
  if (!std::isfinite(runs[best].value))
    throw DegeneracyError("critical point search: every start ended on degenerate levels");

  CriticalPointResult out;
  out.b_cp = FieldPoint(runs[best].x[0], runs[best].x[1], runs[best].x[2]);
  out.gradient = field_gradient(model, out.b_cp, i, j, opts.degeneracy_threshold_hz);
  out.residual_gradient_norm = out.gradient.norm();
  out.frequency_hz = model.eigensystem(out.b_cp, false).transition(i, j);
  out.tolerance_hz_per_g = tol;
  out.converged = out.residual_gradient_norm <= tol;
  out.best_start = best;
  out.iterations = runs[best].iterations;
  try {
    out.curvature = frequency_hessian(model, out.b_cp, i, j, 1e-3, opts.degeneracy_threshold_hz);
  } catch (const DegeneracyError&) {
    out.curvature.setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

}  // namespace ddsim
