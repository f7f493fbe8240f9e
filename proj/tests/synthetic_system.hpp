#pragma once

// Spin system with a zero-gradient point of transition (0, 3) at exactly
// (0, 0, 36.5) G, on a node of the 0.5 G grid. Built in numpy from an axial
// system (D = 300 kHz, E = 60 kHz, M = [[3,0.5,0],[0.5,4,0.3],[0,0.3,8]] kHz/G)
// whose critical point was located by simplex on |grad|^2, then rotated and
// rescaled onto the node. The curvature there is very anisotropic
// (about -6300, 90, 1600 Hz/G^2), so an off-node point would put the grid's
// |grad| minimum several gauss away along the soft axis.
// f(B) = f(-B), so (0, 0, -36.5) G is critical as well.

#include <Eigen/Dense>

#include "ddsim/spin_hamiltonian.hpp"

namespace synthetic {

inline constexpr int kLower = 0;
inline constexpr int kUpper = 3;

inline ddsim::SpinSystem oracle_system() {
  ddsim::SpinSystem s;
  s.q_tensor_hz << -39961.15013692455, -291.5042601816624, -3041.005845646855,  //
      -291.5042601816624, -157900.5439485358, 27409.937354438338,                //
      -3041.005845646855, 27409.937354438338, 197861.69408546036;
  s.m_tensor_hz_per_g << 3036.0766943817353, 496.0117378093542, -102.39708287078705,  //
      496.01173780935426, 4116.661247560446, 614.3824972249788,                       //
      -102.39708287078703, 614.3824972249788, 8021.1048248817815;
  return s;
}

inline ddsim::FieldPoint reference_point() { return {0.0, 0.0, 36.5}; }

}  // namespace synthetic
