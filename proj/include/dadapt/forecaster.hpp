#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dadapt/data.hpp"
#include "dadapt/tensor.hpp"

namespace dadapt {

enum class BackboneKind { linear_ar, seasonal_naive, tiny_mlp, blackbox };

BackboneKind backbone_kind_from_string(const std::string& s);
std::string backbone_kind_to_string(BackboneKind k);

struct FitConfig {
  double ridge_lambda = 1e-3;
  std::size_t period = 24;        // seasonal_naive
  std::size_t mlp_hidden = 32;    // tiny_mlp
  std::size_t mlp_epochs = 200;
  std::size_t mlp_batch = 32;
  double mlp_lr = 1e-2;
  std::uint64_t seed = 0;
};

// flattened X (L*d) -> flattened prediction (H*m)
using BlackboxFn = std::function<std::vector<double>(const std::vector<double>&)>;

// The frozen map F. Parameters are requires_grad=false tensors built once at
// construction and never mutated; differentiable kinds record tape nodes so
// gradients flow through F into the input, never into the parameters.
struct ForecasterSpec {
  BackboneKind kind = BackboneKind::linear_ar;
  std::size_t L = 0, d = 0, H = 0, m = 0;
  std::vector<std::size_t> target_cols;
  std::optional<double> lipschitz_hint;
  FitConfig fit_config;
  std::vector<Tensor> params;  // frozen
  BlackboxFn blackbox;

  std::vector<std::vector<double>> param_arrays() const;
  std::string checksum() const;
};

Tensor predict(const ForecasterSpec& spec, const Tensor& X);

ForecasterSpec fit_backbone(BackboneKind kind, std::span<const Window> train_windows,
                            const std::vector<std::size_t>& target_cols,
                            FitConfig cfg = {});

enum class JacobianMode { exact, finite_difference };

struct JacobianProduct {
  JacobianMode mode = JacobianMode::exact;
  double fd_step = 1e-5;
};

Tensor jvp(const ForecasterSpec& spec, const Tensor& X, const Tensor& v,
           JacobianProduct jp = {});

// vector-Jacobian product via one reverse pass (differentiable kinds only)
Tensor vjp(const ForecasterSpec& spec, const Tensor& X, const Tensor& u);

struct OperatorNorm {
  double value = 0.0;
  bool exact = true;  // false: max of sampled local Jacobian norms
};

OperatorNorm operator_norm(const ForecasterSpec& spec, std::uint64_t seed = 0);

// ---- direct constructors ----

ForecasterSpec make_linear_ar(std::size_t L, std::size_t d, std::size_t H,
                              const std::vector<std::size_t>& target_cols,
                              const std::vector<double>& W,  // (H*m) x (L*d)
                              const std::vector<double>& b); // H*m

ForecasterSpec make_seasonal_naive(std::size_t L, std::size_t d, std::size_t H,
                                   const std::vector<std::size_t>& target_cols,
                                   std::size_t period);

ForecasterSpec make_tiny_mlp(std::size_t L, std::size_t d, std::size_t H,
                             const std::vector<std::size_t>& target_cols,
                             std::size_t hidden, std::uint64_t seed);

ForecasterSpec make_blackbox(std::size_t L, std::size_t d, std::size_t H,
                             const std::vector<std::size_t>& target_cols,
                             BlackboxFn fn, double fd_step = 1e-5);

// Exact lag-`period` copy backbone plus a constant output offset. On an
// exactly periodic series its residual is -output_offset everywhere, which
// is what the bias-style synthetic oracles are built on.
ForecasterSpec periodic_selection_backbone(std::size_t L, std::size_t d,
                                           std::size_t H,
                                           const std::vector<std::size_t>& target_cols,
                                           std::size_t period,
                                           double output_offset = 0.0);

// input-independent backbone: predicts `value` everywhere (tiny_mlp with
// zero weights and constant head bias)
ForecasterSpec constant_backbone(std::size_t L, std::size_t d, std::size_t H,
                                 const std::vector<std::size_t>& target_cols,
                                 double value);

// ---- checkpoint I/O (single JSON document) ----

std::string backbone_to_json(const ForecasterSpec& spec);
ForecasterSpec backbone_from_json(const std::string& json_text);
void save_backbone(const ForecasterSpec& spec, const std::string& path);
ForecasterSpec load_backbone(const std::string& path);

}  // namespace dadapt
