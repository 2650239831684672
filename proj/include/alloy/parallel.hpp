#pragma once

// Index-parallel map over realizations.
//
// Results land in a vector slot per index and every reduction runs serially
// in index order afterwards, so map() and map_serial() give bit-identical
// reductions regardless of the thread count.

#include <cstddef>
#include <exception>
#include <optional>
#include <type_traits>
#include <vector>

#include <omp.h>

namespace alloy::par {

/// Worker count: set_workers() if called, else $ALLOY_WORKERS, else OpenMP's default.
int workers();
void set_workers(int n);

template <class F>
auto map_serial(std::size_t n, F&& f) {
  using R = std::invoke_result_t<F&, std::size_t>;
  std::vector<R> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(f(i));
  return out;
}

template <class F>
auto map(std::size_t n, F&& f) {
  using R = std::invoke_result_t<F&, std::size_t>;
  const int w = workers();
  if (w <= 1 || n < 2) return map_serial(n, f);
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(w)
  for (long long i = 0; i < count; ++i) {
    try {
      slots[static_cast<std::size_t>(i)].emplace(f(static_cast<std::size_t>(i)));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace alloy::par
