#pragma once

#include <cstddef>

namespace rtomo {

// Every batch kernel is written once per item and driven either by a plain
// loop (the reference) or an OpenMP worksharing loop. Results are written to
// pre-sized slots and reduced in index order, so both policies produce
// bit-identical output.
enum class Exec { serial, parallel };

/// Runs body(i) for i in [0, count).
template <class Body>
void for_each_index(Exec exec, std::size_t count, Body&& body) {
  const auto n = static_cast<std::ptrdiff_t>(count);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
    return;
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
}

/// Caps OpenMP workers; 0 leaves the runtime default (all cores).
void set_thread_limit(int threads);

}  // namespace rtomo
