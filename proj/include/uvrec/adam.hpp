#pragma once

#include <cstdint>
#include <vector>

#include "uvrec/params.hpp"
#include "uvrec/tensor.hpp"

namespace uvrec {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First and second moment buffers, one per parameter, plus the step count.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

// One bias-corrected adaptive-moment update over every parameter in the
// store, reading each parameter's gradient buffer. Throws before touching
// anything if a gradient is non-finite.
void adam_step(ModelParams& params, AdamState& state, const AdamConfig& config);

}  // namespace uvrec
