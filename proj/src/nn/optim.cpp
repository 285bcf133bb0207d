#include "sdc/nn/optim.hpp"

#include <cmath>

namespace sdc::nn {

template <typename T>
AdamW<T>::AdamW(ParamList<T> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr > 0) || cfg_.weight_decay < 0 || cfg_.beta1 < 0 || cfg_.beta1 >= 1 || cfg_.beta2 < 0 ||
      cfg_.beta2 >= 1 || !(cfg_.eps > 0))
    throw ConfigError("adamw: invalid hyperparameters");
  for (const auto& p : params_) {
    m_.emplace_back(p.var.value().size(), 0.0);
    v_.emplace_back(p.var.value().size(), 0.0);
  }
}

template <typename T>
void AdamW<T>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var<T>& p = params_[i].var;
    if (!p.has_grad()) continue;
    Tensor<T>& w = p.mutable_value();
    const Tensor<T>& g = p.grad();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      m[k] = cfg_.beta1 * m[k] + (1 - cfg_.beta1) * gk;
      v[k] = cfg_.beta2 * v[k] + (1 - cfg_.beta2) * gk * gk;
      double wk = w[k];
      wk -= cfg_.lr * cfg_.weight_decay * wk;
      wk -= cfg_.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps);
      w[k] = static_cast<T>(wk);
    }
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace sdc::nn
