#include "sdc/kernels/knn.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sdc::kernels {

void knn_mean_distance(std::span<const double> xyz, int k, std::span<double> out) {
  const long n = static_cast<long>(xyz.size() / 3);
#pragma omp parallel
  {
    // Max-heap of the k smallest squared distances seen so far.
    std::vector<double> heap;
    heap.reserve(k + 1);
#pragma omp for schedule(dynamic, 64)
    for (long i = 0; i < n; ++i) {
      heap.clear();
      const double xi = xyz[3 * i], yi = xyz[3 * i + 1], zi = xyz[3 * i + 2];
      for (long j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = xyz[3 * j] - xi, dy = xyz[3 * j + 1] - yi, dz = xyz[3 * j + 2] - zi;
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (static_cast<int>(heap.size()) < k) {
          heap.push_back(d2);
          std::push_heap(heap.begin(), heap.end());
        } else if (d2 < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = d2;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      std::sort_heap(heap.begin(), heap.end());
      double s = 0;
      for (double d2 : heap) s += std::sqrt(d2);
      out[i] = s / k;
    }
  }
}

}  // namespace sdc::kernels
