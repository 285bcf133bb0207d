#pragma once

#include <vector>

#include "sdc/nn/module.hpp"

namespace sdc::nn {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;  // decoupled: w -= lr * wd * w
};

/// Adam with decoupled weight decay. Parameters without a gradient in a
/// step are left untouched.
template <typename T>
class AdamW {
 public:
  AdamW(ParamList<T> params, AdamWConfig cfg);

  void step();
  void zero_grad();
  long steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  ParamList<T> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace sdc::nn
