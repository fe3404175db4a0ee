#pragma once

// Small deterministic sampling helpers over std::mt19937_64. The standard
// pins the engine's output stream but not the distributions, so the mapping
// from engine words to doubles is done here to keep artifacts byte-stable
// across standard libraries.

#include <cmath>
#include <cstdint>
#include <random>

namespace reactor::rng {

// [0, 1) from the top 53 bits
inline double unit(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * (1.0 / 9007199254740992.0);
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * unit(g);
}

// standard normal via Box-Muller (one sample per two draws)
inline double gaussian(std::mt19937_64& g) {
  double u1 = unit(g);
  while (u1 == 0.0) u1 = unit(g);
  const double u2 = unit(g);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace reactor::rng
