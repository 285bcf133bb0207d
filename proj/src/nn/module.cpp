#include "sdc/nn/module.hpp"

#include <cmath>
#include <cstring>

#include "sdc/nn/ops.hpp"

namespace sdc::nn {

template <typename T>
std::uint64_t parameter_hash(const ParamList<T>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params) {
    feed(p.name.data(), p.name.size());
    for (int d : p.var.shape()) feed(&d, sizeof d);
    feed(p.var.value().data(), p.var.value().size() * sizeof(T));
  }
  return h;
}

template <typename T>
Var<T> normal_param(Shape shape, double std, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> nd(0.0, std);
  for (T& v : t.vec()) v = static_cast<T>(nd(rng));
  return Var<T>(std::move(t), true);
}

template <typename T>
Conv2d<T>::Conv2d(int in, int out, int kernel, int stride_, Rng& rng, bool with_bias)
    : stride(stride_), pad(kernel / 2) {
  if (in <= 0 || out <= 0 || kernel <= 0 || kernel % 2 == 0 || stride_ <= 0)
    throw ConfigError("conv2d layer: invalid geometry");
  weight = normal_param<T>({out, in, kernel, kernel}, std::sqrt(2.0 / (in * kernel * kernel)), rng);
  if (with_bias) bias = Var<T>(Tensor<T>({out}), true);
}

template <typename T>
Var<T> Conv2d<T>::operator()(const Var<T>& x) const {
  return conv2d(x, weight, bias, stride, pad);
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias) out.push_back({prefix + ".bias", bias});
}

template std::uint64_t parameter_hash<float>(const ParamList<float>&);
template std::uint64_t parameter_hash<double>(const ParamList<double>&);
template Var<float> normal_param<float>(Shape, double, Rng&);
template Var<double> normal_param<double>(Shape, double, Rng&);
template struct Conv2d<float>;
template struct Conv2d<double>;

}  // namespace sdc::nn
