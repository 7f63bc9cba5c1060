#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "avatar/parallel.h"
#include "avatar/rng.h"
#include "doctest.h"

using namespace avatar;

TEST_CASE("rng is reproducible from its seed") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("forks depend on the seed, not on consumption") {
  Rng a(5);
  a.uniform();
  a.gaussian();
  a.uniform_int(10);
  Rng b(5);
  CHECK(a.fork(7).next_u64() == b.fork(7).next_u64());
  CHECK(a.fork(7).next_u64() != b.fork(8).next_u64());
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
  Rng r(1);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("uniform_int covers every bucket") {
  Rng r(2);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) ++counts[r.uniform_int(7)];
  for (int c : counts) CHECK(c > 800);
}

TEST_CASE("gaussian has roughly standard moments") {
  Rng r(3);
  double sum = 0, sumsq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double z = r.gaussian();
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::fabs(sum / n) < 0.05);
  CHECK(std::fabs(sumsq / n - 1.0) < 0.05);
}

TEST_CASE("trunc_normal is clipped at two sigmas") {
  Rng r(4);
  for (int i = 0; i < 5000; ++i) {
    CHECK(std::fabs(r.trunc_normal(0.5)) <= 1.0);
  }
}

TEST_CASE("parallel_for touches each index exactly once") {
  for (int workers : {1, 4}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(1000, workers, [&](long i) { hits[i].fetch_add(1); });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_for propagates worker exceptions") {
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [&](long i) {
                                 if (i == 57) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("parallel_for handles empty and tiny ranges") {
  int calls = 0;
  parallel_for(0, 4, [&](long) { ++calls; });
  CHECK(calls == 0);
  parallel_for(2, 8, [&](long) { ++calls; });
  CHECK(calls == 2);
}
