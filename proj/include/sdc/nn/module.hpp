#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdc/nn/autograd.hpp"

namespace sdc::nn {

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
std::size_t parameter_count(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

/// FNV-1a over names, shapes and raw bytes of every parameter.
template <typename T>
std::uint64_t parameter_hash(const ParamList<T>& params);

template <typename T>
void set_requires_grad(const ParamList<T>& params, bool on) {
  for (const auto& p : params) p.var.node()->requires_grad = on;
}

template <typename T>
void zero_grad(const ParamList<T>& params) {
  for (const auto& p : params) p.var.node()->grad = Tensor<T>();
}

/// Leaf tensor drawn from N(0, std^2).
template <typename T>
Var<T> normal_param(Shape shape, double std, Rng& rng);

/// Square convolution layer. He-normal weights, zero bias.
template <typename T>
struct Conv2d {
  Var<T> weight;
  Var<T> bias;
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, Rng& rng, bool with_bias = true);

  Var<T> operator()(const Var<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
  int in_channels() const { return weight.dim(1); }
  int out_channels() const { return weight.dim(0); }
  int kernel() const { return weight.dim(2); }
};

}  // namespace sdc::nn
