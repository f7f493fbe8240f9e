#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ddsim/spin_hamiltonian.hpp"
#include "synthetic_system.hpp"

using namespace ddsim;

namespace {

Eigen::Matrix3d random_symmetric(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = n(rng);
  return 0.5 * (a + a.transpose());
}

Eigen::Matrix3d random_matrix(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = n(rng);
  return a;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

SpinSystem random_system(std::mt19937_64& rng) {
  SpinSystem s;
  s.q_tensor_hz = random_symmetric(rng, 1e6);
  s.m_tensor_hz_per_g = random_matrix(rng, 5e3);
  return s;
}

}  // namespace

TEST(SpinOperators, Commutators) {
  const auto& I = spin_operators();
  const std::complex<double> i(0, 1);
  EXPECT_LT((I[0] * I[1] - I[1] * I[0] - i * I[2]).cwiseAbs().maxCoeff(), 1e-14);
  const SpinMatrix casimir = I[0] * I[0] + I[1] * I[1] + I[2] * I[2];
  EXPECT_LT((casimir - 8.75 * SpinMatrix::Identity()).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_DOUBLE_EQ(I[2](0, 0).real(), 2.5);
}

TEST(Eigensystem, AxialQuadrupole) {
  const double d = 1.7e6;
  const auto sys = SpinSystem::axial(d, 0.0, Eigen::Matrix3d::Zero());
  const auto lv = eigensystem(sys, FieldPoint::Zero());
  const double expected[6] = {-8.0 / 3, -8.0 / 3, -2.0 / 3, -2.0 / 3, 10.0 / 3, 10.0 / 3};
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(lv.energies[k], d * expected[k], 1e-9 * d);
  EXPECT_NEAR(transition_frequency(sys, FieldPoint::Zero(), 1, 2), 2 * d, 1e-9 * d);
  EXPECT_NEAR(transition_frequency(sys, FieldPoint::Zero(), 3, 4), 4 * d, 1e-9 * d);
}

TEST(Eigensystem, PureZeeman) {
  const double gamma = 4e3;
  SpinSystem sys;
  sys.m_tensor_hz_per_g = gamma * Eigen::Matrix3d::Identity();
  const FieldPoint b(0, 0, 1e6 / gamma);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(transition_frequency(sys, b, k, k + 1), 1e6, 1e-6);
  const auto g = field_gradient(sys, b, 2, 3);
  EXPECT_NEAR(g[0], 0.0, 1e-9);
  EXPECT_NEAR(g[1], 0.0, 1e-9);
  EXPECT_NEAR(g[2], gamma, 1e-9);
}

TEST(Eigensystem, ZeroFieldDoublets) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    SpinSystem s;
    s.q_tensor_hz = random_symmetric(rng, 1e6);
    const auto lv = eigensystem(s, FieldPoint::Zero());
    const double scale = s.q_tensor_hz.norm();
    for (int k = 0; k < 6; k += 2) EXPECT_NEAR(lv.energies[k], lv.energies[k + 1], 1e-9 * scale);
    for (int k = 1; k < 6; ++k) EXPECT_LE(lv.energies[k - 1], lv.energies[k]);
  }
}

TEST(Eigensystem, IsotropicShiftInvariance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 30.0);
  for (int trial = 0; trial < 50; ++trial) {
    const SpinSystem s = random_system(rng);
    SpinSystem shifted = s;
    shifted.q_tensor_hz += 2.3e5 * Eigen::Matrix3d::Identity();
    const FieldPoint b(n(rng), n(rng), n(rng));
    const auto a = eigensystem(s, b), c = eigensystem(shifted, b);
    const double scale = std::max(1.0, std::abs(a.energies[5] - a.energies[0]));
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) EXPECT_NEAR(a.transition(i, j), c.transition(i, j), 1e-9 * scale);
    // uniform shift = lambda * I(I+1)
    EXPECT_NEAR(c.energies[0] - a.energies[0], 2.3e5 * 8.75, 1e-9 * scale);
  }
}

TEST(Eigensystem, FrameCovariance) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 30.0);
  for (int trial = 0; trial < 50; ++trial) {
    const SpinSystem s = random_system(rng);
    const Eigen::Matrix3d r = random_rotation(rng);
    SpinSystem rot;
    rot.q_tensor_hz = r * s.q_tensor_hz * r.transpose();
    rot.m_tensor_hz_per_g = r * s.m_tensor_hz_per_g * r.transpose();
    const FieldPoint b(n(rng), n(rng), n(rng));
    const auto a = eigensystem(s, b), c = eigensystem(rot, r * b);
    const double scale = std::max(1.0, std::abs(a.energies[5] - a.energies[0]));
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) EXPECT_NEAR(a.transition(i, j), c.transition(i, j), 1e-9 * scale);
  }
}

TEST(Gradient, HellmannFeynmanMatchesFiniteDifference) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 40.0);
  int checked = 0;
  while (checked < 100) {
    const SpinSystem s = random_system(rng);
    const FieldPoint b(n(rng), n(rng), n(rng));
    const HamiltonianModel model(s);
    const int i = static_cast<int>(rng() % 5);
    const int j = i + 1 + static_cast<int>(rng() % static_cast<unsigned>(5 - i));
    Eigen::Vector3d hf;
    try {
      hf = field_gradient(model, b, i, j, 1e3);
    } catch (const DegeneracyError&) {
      continue;
    }
    Eigen::Vector3d fd;
    for (int k = 0; k < 3; ++k) {
      FieldPoint up = b, down = b;
      up[k] += 0.01;
      down[k] -= 0.01;
      fd[k] = (model.eigensystem(up, false).transition(i, j) - model.eigensystem(down, false).transition(i, j)) / 0.02;
    }
    EXPECT_LE((hf - fd).norm(), 1e-5 * hf.norm()) << "trial " << checked;
    ++checked;
  }
}

TEST(Gradient, DegeneracyRaises) {
  const auto sys = SpinSystem::axial(1e6, 0.0, 1e3 * Eigen::Matrix3d::Identity());
  EXPECT_THROW(field_gradient(sys, FieldPoint::Zero(), 0, 2), DegeneracyError);
  EXPECT_THROW(transition_frequency(sys, FieldPoint::Zero(), 2, 2), ConfigError);
  EXPECT_THROW(transition_frequency(sys, FieldPoint::Zero(), 0, 6), ConfigError);
}

TEST(Gradient, LipschitzBound) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 40.0), small(0.0, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    const SpinSystem s = random_system(rng);
    const FieldPoint b(n(rng), n(rng), n(rng)), db(small(rng), small(rng), small(rng));
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(s.m_tensor_hz_per_g);
    const double bound = svd.singularValues()[0] * std::sqrt(8.75) * db.norm() * 2;
    for (int i = 0; i < 5; ++i)
      EXPECT_LE(std::abs(transition_frequency(s, b + db, i, i + 1) - transition_frequency(s, b, i, i + 1)),
                bound + 1e-6);
  }
}

TEST(CriticalPoint, SyntheticSystem) {
  const auto sys = synthetic::oracle_system();
  CriticalPointOptions opts;
  opts.threads = 1;
  const auto r = find_critical_point(sys, FieldPoint(10, 10, 20), synthetic::kLower, synthetic::kUpper, opts);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.residual_gradient_norm, r.tolerance_hz_per_g);
  EXPECT_LT((r.b_cp - synthetic::reference_point()).norm(), 1.0);
  // curvature is a genuine second-order sensitivity: symmetric and non-zero
  EXPECT_LT((r.curvature - r.curvature.transpose()).norm(), 1e-9 * r.curvature.norm());
  EXPECT_GT(r.curvature.norm(), 0.0);
  // |grad| at the reported point, by finite differences of the frequency
  const HamiltonianModel model(sys);
  Eigen::Vector3d fd;
  for (int k = 0; k < 3; ++k) {
    FieldPoint up = r.b_cp, down = r.b_cp;
    up[k] += 1e-3;
    down[k] -= 1e-3;
    fd[k] = (model.eigensystem(up, false).transition(0, 3) - model.eigensystem(down, false).transition(0, 3)) / 2e-3;
  }
  EXPECT_LT(fd.norm(), r.tolerance_hz_per_g);
}

TEST(CriticalPoint, PureZeemanHasNone) {
  const double gamma = 2e3;
  SpinSystem sys;
  sys.m_tensor_hz_per_g = gamma * Eigen::Matrix3d::Identity();
  CriticalPointOptions opts;
  opts.starts = 3;
  opts.threads = 1;
  opts.max_iterations = 300;
  const auto r = find_critical_point(sys, FieldPoint(0, 0, 30), 2, 3, opts);
  EXPECT_FALSE(r.converged);
  EXPECT_NEAR(r.residual_gradient_norm, gamma, 1e-6 * gamma);
}
