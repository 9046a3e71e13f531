#include "dadapt/metrics.hpp"

#include <cmath>

namespace dadapt {

MetricReport point_metrics(std::span<const Tensor> preds, std::span<const Tensor> targets,
                           const std::vector<double>& horizon_weights) {
  if (preds.size() != targets.size()) {
    throw DimensionError("point_metrics: prediction/target count mismatch");
  }
  MetricReport rep;
  rep.n = preds.size();
  if (preds.empty()) return rep;
  const std::size_t H = preds[0].rows();
  const std::size_t m = preds[0].cols();
  std::vector<double> w = horizon_weights;
  if (w.empty()) w.assign(H, 1.0);
  if (w.size() != H) {
    throw DimensionError("point_metrics: horizon weight length " +
                         std::to_string(w.size()) + " != H=" + std::to_string(H));
  }
  rep.per_horizon_mse.assign(H, 0.0);
  rep.per_horizon_mae.assign(H, 0.0);
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].shape() != targets[i].shape()) {
      throw DimensionError("point_metrics: shape mismatch at window " + std::to_string(i));
    }
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t k = 0; k < m; ++k) {
        double e = preds[i](h, k) - targets[i](h, k);
        se += w[h] * e * e;
        ae += w[h] * std::fabs(e);
        rep.per_horizon_mse[h] += e * e;
        rep.per_horizon_mae[h] += std::fabs(e);
      }
    }
  }
  const double cells = static_cast<double>(preds.size() * H * m);
  rep.mse = se / cells;
  rep.mae = ae / cells;
  const double hn = static_cast<double>(preds.size() * m);
  for (std::size_t h = 0; h < H; ++h) {
    rep.per_horizon_mse[h] /= hn;
    rep.per_horizon_mae[h] /= hn;
  }
  return rep;
}

MetricReport interval_metrics(const std::vector<double>& lower,
                              const std::vector<double>& upper,
                              const std::vector<double>& targets) {
  if (lower.size() != upper.size() || lower.size() != targets.size()) {
    throw DimensionError("interval_metrics: array length mismatch");
  }
  if (lower.empty()) throw ContractError("interval_metrics: empty interval set");
  MetricReport rep;
  rep.n = targets.size();
  std::size_t inside = 0;
  double width = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (lower[i] > upper[i]) {
      throw ContractError("interval_metrics: lower > upper at entry " + std::to_string(i));
    }
    if (targets[i] >= lower[i] && targets[i] <= upper[i]) ++inside;
    width += upper[i] - lower[i];
  }
  rep.picp = static_cast<double>(inside) / static_cast<double>(targets.size());
  rep.mean_width = width / static_cast<double>(targets.size());
  return rep;
}

Improvement improvement(const MetricReport& report, const MetricReport& baseline) {
  Improvement imp;
  if (baseline.mse != 0.0) {
    imp.mse_pct = 100.0 * (baseline.mse - report.mse) / baseline.mse;
  }
  if (baseline.mae != 0.0) {
    imp.mae_pct = 100.0 * (baseline.mae - report.mae) / baseline.mae;
  }
  if (imp.mse_pct && imp.mae_pct) {
    imp.mean_pct = 0.5 * (*imp.mse_pct + *imp.mae_pct);
  } else if (imp.mse_pct) {
    imp.mean_pct = imp.mse_pct;
  } else if (imp.mae_pct) {
    imp.mean_pct = imp.mae_pct;
  }
  if (imp.mean_pct) imp.display_pct = static_cast<int>(std::lround(*imp.mean_pct));
  return imp;
}

}  // namespace dadapt
