#pragma once

#include <cstddef>
#include <vector>

#include "dadapt/tensor.hpp"

namespace dadapt {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. step() consumes the
// gradients currently attached to the parameters and zeroes them afterwards.
class AdamState {
 public:
  AdamState(std::vector<Tensor> params, AdamConfig cfg = {});

  void step();
  std::size_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig cfg_;
  std::size_t step_ = 0;
};

}  // namespace dadapt
