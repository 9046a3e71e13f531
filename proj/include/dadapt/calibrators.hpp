#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dadapt/adapters.hpp"
#include "dadapt/forecaster.hpp"
#include "dadapt/mlp.hpp"
#include "dadapt/tensor.hpp"

namespace dadapt {

// pinball loss rho_tau(u) = u * (tau - 1{u < 0}), u = y - q
double pinball(double y, double q, double tau);
Tensor pinball_loss(const Tensor& y, const Tensor& q, double tau);

struct QuantileConfig {
  std::vector<double> levels{0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95};
  double epsilon_offset = 0.5;  // trust region of the anchor offset
  double epsilon_scale = 1e-3;  // floor under the learned scale s
  double lambda_cal = 0.1;      // reliability (soft-coverage) weight
  double lambda_mag = 1e-4;     // ||a||^2 weight
  double coverage_sharpness = 50.0;
  std::size_t hidden = 64;
  std::size_t depth = 2;
};

// Monotone quantile fan around the point forecast: the central level is a
// bounded offset from Yhat and neighbouring levels differ by softplus
// increments, so the fan is strictly increasing by construction.
class QuantileCalibrator {
 public:
  QuantileCalibrator() = default;
  QuantileCalibrator(const QuantileConfig& cfg, std::size_t L, std::size_t d,
                     std::size_t H, std::size_t m, std::uint64_t seed);

  struct Fan {
    std::vector<Tensor> q;  // J tensors of shape H x m, increasing in level
    Tensor anchor_offset;   // a_theta, for the magnitude penalty
  };
  Fan fan(const Tensor& X, const Tensor& Yhat) const;

  std::vector<Tensor> parameters() const;
  const QuantileConfig& config() const { return cfg_; }
  std::size_t anchor_index() const { return anchor_; }
  std::size_t levels() const { return cfg_.levels.size(); }
  std::size_t L() const { return L_; }
  std::size_t d() const { return d_; }
  std::size_t H() const { return H_; }
  std::size_t m() const { return m_; }

  std::vector<std::vector<double>> export_params() const;
  void import_params(const std::vector<std::vector<double>>& arrays);

 private:
  QuantileConfig cfg_;
  std::size_t L_ = 0, d_ = 0, H_ = 0, m_ = 0;
  std::size_t anchor_ = 0;
  Mlp trunk_;
  LinearHead head_a_, head_s_, head_d_;
};

enum class ResidualMode { per_horizon, joint };

ResidualMode residual_mode_from_string(const std::string& s);
std::string residual_mode_to_string(ResidualMode mode);

struct ConformalConfig {
  double alpha = 0.1;
  double epsilon_w = 1e-3;  // floor under w_theta
  double lambda_w = 0.1;    // keep-w-near-1 weight
  ResidualMode mode = ResidualMode::per_horizon;
  std::size_t hidden = 64;
  std::size_t depth = 2;
};

// Learned-scale split conformal: w_theta predicts residual magnitude, the
// calibration split turns normalized residuals into the radius kappa_alpha.
class ConformalCalibrator {
 public:
  ConformalCalibrator() = default;
  ConformalCalibrator(const ConformalConfig& cfg, std::size_t L, std::size_t d,
                      std::size_t H, std::size_t m, std::uint64_t seed);

  // positive scale; per_horizon: H values, joint: 1 value. Zero-initialized
  // nets give w = 1 exactly.
  Tensor scale(const Tensor& X, const Tensor& Yhat) const;

  // per-horizon residual norms (L2 over targets); joint: Frobenius norm
  static std::vector<double> residual_norms(const Tensor& Y, const Tensor& Yhat,
                                            ResidualMode mode);
  // normalized nonconformity score of one window (max over horizons in
  // per_horizon mode)
  double score(const Tensor& X, const Tensor& Y, const Tensor& Yhat) const;

  std::vector<Tensor> parameters() const;
  const ConformalConfig& config() const { return cfg_; }
  std::size_t L() const { return L_; }
  std::size_t d() const { return d_; }
  std::size_t H() const { return H_; }
  std::size_t m() const { return m_; }
  bool calibrated() const { return n_cal_ > 0; }
  double kappa() const;
  std::size_t n_cal() const { return n_cal_; }
  const std::vector<double>& calibration_scores() const { return scores_; }

  void set_calibration(double kappa, std::size_t n, std::vector<double> scores);

  std::vector<std::vector<double>> export_params() const;
  void import_params(const std::vector<std::vector<double>>& arrays);

 private:
  ConformalConfig cfg_;
  std::size_t L_ = 0, d_ = 0, H_ = 0, m_ = 0;
  Mlp trunk_;
  LinearHead head_w_;
  double softplus_shift_ = 0.0;
  double kappa_ = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_cal_ = 0;
  std::vector<double> scores_;
};

// kappa_alpha = ceil((1-alpha)(n+1))-th order statistic of the calibration
// scores (finite-sample valid rank convention)
double conformal_calibrate(ConformalCalibrator& cc, const ForecasterSpec& spec,
                           std::span<const Window> calibration_windows);

// Interval containers shared by both calibrators / the metrics layer.
struct IntervalSet {
  enum class Kind { quantile_fan, conformal_band };
  Kind kind = Kind::conformal_band;
  std::size_t H = 0, m = 0;
  std::vector<double> levels;  // quantile mode
  double alpha = std::numeric_limits<double>::quiet_NaN();
  bool calibrated = false;

  // flattened across windows: one entry per (window, horizon, target)
  std::vector<double> point, lower, upper, target;
  std::vector<std::size_t> window_id;
  // quantile mode only: per window, J * H * m values (level-major)
  std::vector<std::vector<double>> fan_values;
};

IntervalSet conformal_interval(const ConformalCalibrator& cc, const ForecasterSpec& spec,
                               std::span<const Window> windows);

// evaluates the fan; the reported band spans [levels.front(), levels.back()]
IntervalSet quantile_fan(const QuantileCalibrator& qc, const ForecasterSpec& spec,
                         std::span<const Window> windows);

void write_interval_csv(const std::string& path, const IntervalSet& set);

// {alpha, n_cal, kappa, rank_convention, residual_mode, seed}
std::string calibration_metadata_json(const ConformalCalibrator& cc, std::uint64_t seed);

std::string quantile_to_json(const QuantileCalibrator& qc);
QuantileCalibrator quantile_from_json(const std::string& text);
std::string conformal_to_json(const ConformalCalibrator& cc);
ConformalCalibrator conformal_from_json(const std::string& text);

}  // namespace dadapt
