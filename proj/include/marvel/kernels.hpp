#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace marvel::kernels {

// Fixed number of partial sums used by the parallel reduction. Keeping it
// independent of the thread count makes results identical for any
// OMP_NUM_THREADS.
inline constexpr std::size_t kReductionChunks = 16;

// Reference: fn(i, acc) adds item i's contribution into acc, in item order.
template <class Fn>
void accumulate_serial(std::size_t n_items, std::span<double> out, Fn&& fn) {
  for (std::size_t i = 0; i < n_items; ++i) fn(i, out);
}

// Same sum split into contiguous chunks, one private buffer per chunk,
// merged in chunk order. fn must be safe to call concurrently.
template <class Fn>
void accumulate_parallel(std::size_t n_items, std::span<double> out, Fn&& fn) {
  if (n_items == 0) return;
  const std::size_t chunks = std::min(kReductionChunks, n_items);
  const std::size_t width = out.size();
  std::vector<double> partial(chunks * width, 0.0);
  const long long n_chunks = static_cast<long long>(chunks);
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < n_chunks; ++c) {
    const std::size_t lo = n_items * static_cast<std::size_t>(c) / chunks;
    const std::size_t hi = n_items * (static_cast<std::size_t>(c) + 1) / chunks;
    std::span<double> acc(partial.data() + static_cast<std::size_t>(c) * width, width);
    for (std::size_t i = lo; i < hi; ++i) fn(i, acc);
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    const double* p = partial.data() + c * width;
    for (std::size_t k = 0; k < width; ++k) out[k] += p[k];
  }
}

}  // namespace marvel::kernels
