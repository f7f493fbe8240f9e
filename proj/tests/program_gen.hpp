#pragma once

// Random PulseProgram generator for round-trip property tests.

#include <cmath>
#include <random>
#include <string>

#include "ddsim/sequence.hpp"

namespace testgen {

inline double wide_positive(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mant(1.0, 10.0);
  std::uniform_int_distribution<int> exp10(-9, 3);
  return mant(rng) * std::pow(10.0, exp10(rng));
}

inline std::vector<ddsim::Event> random_body(std::mt19937_64& rng, int depth, int max_depth, std::size_t len) {
  std::uniform_real_distribution<double> angle(-10.0, 10.0);
  std::uniform_int_distribution<int> kind(0, 9);
  std::vector<ddsim::Event> out;
  for (std::size_t i = 0; i < len; ++i) {
    const int k = kind(rng);
    if (k < 3) {
      out.emplace_back(ddsim::PulseEvent::hard(std::abs(angle(rng)) + 1e-3, angle(rng)));
    } else if (k < 5) {
      out.emplace_back(ddsim::PulseEvent::finite(wide_positive(rng) * 1e6, wide_positive(rng), angle(rng)));
    } else if (k < 8) {
      out.emplace_back(ddsim::Wait{rng() % 17 == 0 ? 0.0 : wide_positive(rng)});
    } else if (k == 8 && depth < max_depth) {
      out.emplace_back(ddsim::Repeat{1 + rng() % 5000, random_body(rng, depth + 1, max_depth, 1 + rng() % 4)});
    } else if (depth <= 1) {
      out.emplace_back(ddsim::Acquire{"acq_" + std::to_string(rng() % 100)});
    } else {
      out.emplace_back(ddsim::Wait{wide_positive(rng)});
    }
  }
  return out;
}

inline ddsim::PulseProgram random_program(std::mt19937_64& rng, int max_depth = 3) {
  return {random_body(rng, 0, max_depth, 1 + rng() % 8)};
}

}  // namespace testgen
