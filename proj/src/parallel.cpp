#include "avatar/parallel.h"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace avatar {

void parallel_for(long n, int workers, const std::function<void(long)>& fn) {
  if (n <= 0) return;
  const int nthreads = static_cast<int>(std::min<long>(std::max(workers, 1), n));
  if (nthreads == 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(nthreads);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (long i = t; i < n; i += nthreads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace avatar
