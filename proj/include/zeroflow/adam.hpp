#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "zeroflow/tensor.hpp"

namespace zf {

struct AdamState {
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  /// Zeroed moments shaped like `params`.
  static AdamState for_params(std::span<Tensor* const> params, double lr, double weight_decay = 0.0);
};

/// One Adam step with bias correction and decoupled weight decay
/// (p -= lr * wd * p before the moment update). Throws NumericError on a
/// non-finite gradient, leaving params and state untouched.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace zf
