#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dadapt/rng.hpp"
#include "dadapt/tensor.hpp"

namespace dadapt {

// Small fully-connected net: `depth` tanh hidden layers of `hidden` units,
// then a linear head. zero_init_head makes the net output exactly 0 at
// init, which is how the adapted system starts as the identity map.
struct MlpConfig {
  std::size_t in_dim = 0;
  std::size_t hidden = 128;
  std::size_t out_dim = 0;
  std::size_t depth = 2;
  bool zero_init_head = true;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(const MlpConfig& cfg, Rng& rng, const std::string& name_prefix);

  // x is 1-D of length in_dim; returns the linear head output (no squash)
  Tensor forward(const Tensor& x) const;
  // trunk output before the head (for models that attach extra heads)
  Tensor hidden_features(const Tensor& x) const;

  std::vector<Tensor> parameters() const;
  const MlpConfig& config() const { return cfg_; }
  std::size_t hidden_dim() const { return cfg_.depth == 0 ? cfg_.in_dim : cfg_.hidden; }

  // flat parameter I/O for checkpoints
  std::vector<std::vector<double>> export_params() const;
  void import_params(const std::vector<std::vector<double>>& arrays);

 private:
  MlpConfig cfg_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

// Standalone linear head (used for extra output heads on a shared trunk).
class LinearHead {
 public:
  LinearHead() = default;
  LinearHead(std::size_t in_dim, std::size_t out_dim, bool zero_init, Rng& rng,
             const std::string& name);
  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> parameters() const;
  std::vector<std::vector<double>> export_params() const;
  void import_params(const std::vector<std::vector<double>>& arrays);

 private:
  Tensor w_, b_;
};

Tensor xavier_init(std::size_t rows, std::size_t cols, Rng& rng,
                   const std::string& name);

}  // namespace dadapt
