#include "avatar/rng.h"

#include <cmath>

#include "avatar/error.h"

namespace avatar {

uint64_t Rng::uniform_int(uint64_t n) {
  if (n == 0) throw ContractError("Rng::uniform_int: n must be positive");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::gaussian() {
  double u1 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::trunc_normal(double stddev) {
  double z = gaussian();
  while (std::fabs(z) > 2.0) z = gaussian();
  return z * stddev;
}

}  // namespace avatar
