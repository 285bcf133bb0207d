#include <algorithm>
#include <cmath>
#include <vector>

#include "sdc/kernels/knn.hpp"

namespace sdc::kernels::reference {

void knn_mean_distance(std::span<const double> xyz, int k, std::span<double> out) {
  const std::size_t n = xyz.size() / 3;
  std::vector<double> d2;
  for (std::size_t i = 0; i < n; ++i) {
    d2.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = xyz[3 * j] - xyz[3 * i], dy = xyz[3 * j + 1] - xyz[3 * i + 1],
                   dz = xyz[3 * j + 2] - xyz[3 * i + 2];
      d2.push_back(dx * dx + dy * dy + dz * dz);
    }
    std::sort(d2.begin(), d2.end());
    double s = 0;
    for (int m = 0; m < k; ++m) s += std::sqrt(d2[m]);
    out[i] = s / k;
  }
}

}  // namespace sdc::kernels::reference
