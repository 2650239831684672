#include "alloy/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace alloy::par {

namespace {
std::atomic<int> configured{0};
}

int workers() {
  if (const int n = configured.load(); n > 0) return n;
  if (const char* env = std::getenv("ALLOY_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return omp_get_max_threads();
}

void set_workers(int n) { configured.store(n > 0 ? n : 0); }

}  // namespace alloy::par
