#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dadapt/forecaster.hpp"
#include "dadapt/mlp.hpp"
#include "dadapt/rng.hpp"
#include "dadapt/tensor.hpp"

namespace dadapt {

enum class HardeningMode { soft, threshold, straight_through };
enum class MaskNoise { logistic, gumbel, none };

HardeningMode hardening_from_string(const std::string& s);
std::string hardening_to_string(HardeningMode h);

struct MaskNetConfig {
  double temp_start = 5.0;
  double temp_end = 0.1;
  HardeningMode hardening = HardeningMode::soft;
  // relaxation noise: logistic (binary-Concrete, default) or a single
  // Gumbel draw; `none` pins the noise at its median
  MaskNoise noise = MaskNoise::logistic;
  std::size_t hidden = 32;
};

// Input mask selector: a shared two-layer net maps each covariate's
// L-vector (plus a global mean/std summary) to L logits; the relaxed mask
// is sigma((logits + G)/tau).
class MaskNet {
 public:
  MaskNet() = default;
  MaskNet(const MaskNetConfig& cfg, std::size_t L, std::size_t d, std::uint64_t seed);

  Tensor logits(const Tensor& X) const;  // L x d
  double temperature() const { return temperature_; }
  void set_temperature(double tau);
  // geometric schedule from temp_start to temp_end over the epoch range
  void anneal(std::size_t epoch, std::size_t total_epochs);

  std::vector<Tensor> parameters() const { return net_.parameters(); }
  const MaskNetConfig& config() const { return cfg_; }
  std::size_t L() const { return L_; }
  std::size_t d() const { return d_; }

  std::vector<std::vector<double>> export_params() const { return net_.export_params(); }
  void import_params(const std::vector<std::vector<double>>& a) { net_.import_params(a); }

 private:
  MaskNetConfig cfg_;
  std::size_t L_ = 0, d_ = 0;
  Mlp net_;
  double temperature_ = 5.0;
};

struct MaskSample {
  Tensor soft;  // L x d, entries in (0,1)
  Tensor hard;  // L x d, entries in {0,1} (threshold at 0.5)
  double keep_rate = 0.0;  // mean of the soft mask
  std::uint64_t gumbel_seed = 0;
};

// stochastic relaxed mask (training); noise drawn from rng
MaskSample sample_mask(const MaskNet& net, const Tensor& X, Rng& rng);
// noise pinned at its median (deterministic inference)
MaskSample deterministic_mask(const MaskNet& net, const Tensor& X);

// forward threshold at 0.5; straight_through keeps the gradient path
Tensor harden(const MaskNet& net, const Tensor& soft_mask);

struct SelectorLossWeights {
  double l1 = 1e-3;
  double entropy = 1e-3;
  double tv = 1e-4;
  double budget = 0.0;  // set to ~1 when a keep-rate budget is active
  double group = 0.0;
  double kappa = 1.0;  // keep-rate budget target in (0, 1]
  std::vector<double> horizon_weights;
};

struct SelectorLossBreakdown {
  double pred = 0.0, sparsity = 0.0, entropy = 0.0, tv = 0.0, budget = 0.0,
         group = 0.0, total = 0.0;
};

// full mask objective: prediction loss plus the sparsity/entropy/smoothness
// /budget/group ledger. Returns the scalar loss tensor (on tape) and the
// per-term values before their lambda weights.
std::pair<Tensor, SelectorLossBreakdown> selector_loss(const Tensor& mask,
                                                       const Tensor& prediction,
                                                       const Tensor& target,
                                                       const SelectorLossWeights& w);

struct FeatureImportance {
  std::size_t time_offset = 0;  // row within the context window
  std::size_t covariate = 0;
  double importance = 0.0;
  bool selected = false;  // importance > 0.5
};

struct FeatureRanking {
  std::vector<FeatureImportance> entries;  // sorted by importance, descending
  std::vector<double> column_importance;   // mean over time offsets
  double mask_ratio = 0.0;                 // fraction of entries with importance > 0.5
  bool untrained_warning = false;          // everything still near 0.5
};

FeatureRanking rank_features(const MaskNet& net, std::span<const Window> windows);

void write_feature_report(const std::string& path, const FeatureRanking& ranking,
                          double kappa);

std::string selector_to_json(const MaskNet& net);
MaskNet selector_from_json(const std::string& text);
void save_selector(const MaskNet& net, const std::string& path);
MaskNet load_selector(const std::string& path);

}  // namespace dadapt
