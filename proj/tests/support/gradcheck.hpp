#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sdc/nn/autograd.hpp"

namespace sdc::testing {

struct GradCheckResult {
  double max_rel_error = 0;
  double worst_analytic = 0, worst_numeric = 0;
  std::string worst;  // "leaf[i]"
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients
// from being compared purely relatively.
inline double rel_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Central-difference check of d loss / d leaf. `loss` must rebuild the
/// graph from the current leaf values on every call. With `sample` > 0 only
/// that many (leaf, index) pairs are drawn at random; otherwise every entry
/// of every leaf is checked.
inline GradCheckResult gradcheck(const std::function<nn::Var<double>()>& loss,
                                 const std::vector<std::pair<std::string, nn::Var<double>>>& leaves,
                                 double eps = 1e-4, std::size_t sample = 0, std::uint64_t seed = 0) {
  for (const auto& [name, v] : leaves) v.node()->grad = nn::Tensor<double>();
  nn::backward(loss());
  std::vector<nn::Tensor<double>> analytic;
  for (const auto& [name, v] : leaves)
    analytic.push_back(v.has_grad() ? v.grad() : nn::Tensor<double>(v.shape()));

  std::vector<std::pair<std::size_t, std::size_t>> picks;
  if (sample == 0) {
    for (std::size_t l = 0; l < leaves.size(); ++l)
      for (std::size_t i = 0; i < leaves[l].second.value().size(); ++i) picks.emplace_back(l, i);
  } else {
    std::size_t total = 0;
    for (const auto& [name, v] : leaves) total += v.value().size();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t s = 0; s < sample; ++s) {
      std::size_t k = pick(rng), l = 0;
      while (k >= leaves[l].second.value().size()) k -= leaves[l++].second.value().size();
      picks.emplace_back(l, k);
    }
  }

  GradCheckResult r;
  nn::NoGradGuard guard;
  for (auto [l, i] : picks) {
    nn::Tensor<double>& w = leaves[l].second.node()->value;
    const double orig = w[i];
    w[i] = orig + eps;
    const double up = loss().value()[0];
    w[i] = orig - eps;
    const double down = loss().value()[0];
    w[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    const double e = rel_error(analytic[l][i], numeric);
    ++r.checked;
    if (r.worst.empty() || e > r.max_rel_error) {
      r.max_rel_error = e;
      r.worst = leaves[l].first + "[" + std::to_string(i) + "]";
      r.worst_analytic = analytic[l][i];
      r.worst_numeric = numeric;
    }
  }
  return r;
}

inline nn::Var<double> random_leaf(nn::Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  nn::Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.vec()) v = u(rng);
  return nn::Var<double>(std::move(t), true);
}

}  // namespace sdc::testing
