#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dadapt/tensor.hpp"

namespace dadapt {

struct MetricReport {
  double mse = 0.0;
  double mae = 0.0;
  std::vector<double> per_horizon_mse;
  std::vector<double> per_horizon_mae;
  std::size_t n = 0;
  std::optional<double> picp;
  std::optional<double> mean_width;
};

// Relative improvement vs a named baseline, Table-1 style: positive means
// the adapted model is better. The headline number is ambiguous in the
// wild, so all three conventions are reported explicitly.
struct Improvement {
  std::optional<double> mse_pct;
  std::optional<double> mae_pct;
  std::optional<double> mean_pct;  // average of the two when both defined
  int display_pct = 0;             // mean_pct rounded for display
};

// horizon-weighted MSE/MAE; preds/targets are parallel lists of H x m tensors
MetricReport point_metrics(std::span<const Tensor> preds, std::span<const Tensor> targets,
                           const std::vector<double>& horizon_weights = {});

// lower/upper/target are parallel flat arrays (one entry per horizon/target
// cell across all windows)
MetricReport interval_metrics(const std::vector<double>& lower,
                              const std::vector<double>& upper,
                              const std::vector<double>& targets);

Improvement improvement(const MetricReport& report, const MetricReport& baseline);

}  // namespace dadapt
