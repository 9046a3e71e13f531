#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dadapt/adam.hpp"
#include "dadapt/adapters.hpp"
#include "dadapt/calibrators.hpp"
#include "dadapt/data.hpp"
#include "dadapt/forecaster.hpp"
#include "dadapt/metrics.hpp"
#include "dadapt/selector.hpp"
#include "dadapt/tensor.hpp"

namespace dadapt {

enum class LossKind { mse, mae };
enum class TrainMode { batch, online };

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  std::size_t early_stop_patience = 5;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::batch;
  bool joint = false;
  LossKind loss = LossKind::mse;
  bool diagnostics = false;
  bool shuffle = true;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-indexed
  double train_loss = 0.0;
  double val_loss = 0.0;
  double mse = 0.0;
  double mae = 0.0;
  double wall_ms = 0.0;
};

// One per diagnostic batch: the output-edit descent witness for MSE. With
// l = 1/2 ||.||^2 the realized change is delta<g,d> + (delta^2/2)||d||^2,
// so alignment < 0 and delta below the step threshold force descent.
struct DescentRecord {
  double inner_gd = 0.0;   // <g, d> over the batch
  double norm_g = 0.0;
  double norm_d = 0.0;
  double alpha = 0.0;      // measured -<g,d>/(|g||d|) when <g,d> < 0
  double delta = 0.0;
  double step_threshold = 0.0;  // 2|<g,d>|/||d||^2
  double realized_change = 0.0;
  bool applicable = false;
  bool holds = true;
};

struct TrainTrace {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-indexed; 0 if no epochs ran
  bool aborted = false;
  bool early_stopping_disabled = false;
  std::vector<DescentRecord> descent;
  std::vector<std::string> warnings;
  std::string backbone_checksum_before;
  std::string backbone_checksum_after;
};

// returns the 1-indexed epoch with minimal validation loss; optionally the
// epoch at which patience ran out
std::size_t early_stop_best_epoch(const std::vector<double>& val_losses,
                                  std::size_t patience,
                                  std::size_t* stopped_after = nullptr);

// Anything the generic Adam loop can train. Parameter groups get one
// optimizer each, all stepped after a single backward pass.
class TrainableModel {
 public:
  virtual ~TrainableModel() = default;
  virtual std::vector<std::vector<Tensor>> parameter_groups() = 0;
  // builds the scalar loss on the active tape
  virtual Tensor batch_loss(std::span<const Window> batch) = 0;
  // off-tape loss used for validation / early stopping
  virtual double eval_loss(std::span<const Window> windows);
  virtual void on_epoch_begin(std::size_t, std::size_t) {}
  virtual bool has_point_predictions() const { return false; }
  virtual Tensor predict_point(const Tensor&) {
    throw ContractError("model does not produce point predictions");
  }
  virtual void collect_descent(std::span<const Window>, std::vector<DescentRecord>&) {}

  std::vector<std::vector<double>> snapshot_params();
  void restore_params(const std::vector<std::vector<double>>& snap);
};

// ---- model wrappers ----

class AdapterModel : public TrainableModel {
 public:
  AdapterModel(AdapterNet& net, const ForecasterSpec& spec, LossKind loss);
  std::vector<std::vector<Tensor>> parameter_groups() override;
  Tensor batch_loss(std::span<const Window> batch) override;
  bool has_point_predictions() const override { return true; }
  Tensor predict_point(const Tensor& X) override;
  void collect_descent(std::span<const Window> batch,
                       std::vector<DescentRecord>& out) override;

 private:
  AdapterNet& net_;
  const ForecasterSpec& spec_;
  LossKind loss_;
};

class CompositeModel : public TrainableModel {
 public:
  CompositeModel(CompositeAdapter& composite, const ForecasterSpec& spec, LossKind loss);
  std::vector<std::vector<Tensor>> parameter_groups() override;
  Tensor batch_loss(std::span<const Window> batch) override;
  bool has_point_predictions() const override { return true; }
  Tensor predict_point(const Tensor& X) override;

 private:
  CompositeAdapter& composite_;
  const ForecasterSpec& spec_;
  LossKind loss_;
};

class SelectorModel : public TrainableModel {
 public:
  SelectorModel(MaskNet& net, const ForecasterSpec& spec, SelectorLossWeights weights,
                std::uint64_t seed);
  std::vector<std::vector<Tensor>> parameter_groups() override;
  Tensor batch_loss(std::span<const Window> batch) override;
  double eval_loss(std::span<const Window> windows) override;
  void on_epoch_begin(std::size_t epoch, std::size_t total) override;
  bool has_point_predictions() const override { return true; }
  Tensor predict_point(const Tensor& X) override;
  const SelectorLossBreakdown& last_breakdown() const { return last_breakdown_; }

 private:
  MaskNet& net_;
  const ForecasterSpec& spec_;
  SelectorLossWeights weights_;
  std::uint64_t seed_ = 0;
  std::size_t epoch_ = 0;
  SelectorLossBreakdown last_breakdown_;
};

class QuantileModel : public TrainableModel {
 public:
  QuantileModel(QuantileCalibrator& qc, const ForecasterSpec& spec);
  std::vector<std::vector<Tensor>> parameter_groups() override;
  Tensor batch_loss(std::span<const Window> batch) override;

 private:
  QuantileCalibrator& qc_;
  const ForecasterSpec& spec_;
};

class ConformalScaleModel : public TrainableModel {
 public:
  ConformalScaleModel(ConformalCalibrator& cc, const ForecasterSpec& spec);
  std::vector<std::vector<Tensor>> parameter_groups() override;
  Tensor batch_loss(std::span<const Window> batch) override;
  // fraction of scale values sitting on the epsilon_w floor (last epoch)
  double floor_fraction() const;

 private:
  ConformalCalibrator& cc_;
  const ForecasterSpec& spec_;
  std::size_t floor_hits_ = 0;
  std::size_t scale_evals_ = 0;
};

// ---- batch drivers ----

TrainTrace train_batch(TrainableModel& model, const ForecasterSpec& spec,
                       std::span<const Window> train, std::span<const Window> val,
                       const TrainConfig& cfg);

TrainTrace train_adapter(AdapterNet& net, const ForecasterSpec& spec,
                         std::span<const Window> train, std::span<const Window> val,
                         const TrainConfig& cfg);

// joint Ada-X + Ada-Y: one forward/backward, two optimizers stepped together
TrainTrace train_joint(CompositeAdapter& composite, const ForecasterSpec& spec,
                       std::span<const Window> train, std::span<const Window> val,
                       const TrainConfig& cfg);

TrainTrace train_selector(MaskNet& net, const ForecasterSpec& spec,
                          std::span<const Window> train, std::span<const Window> val,
                          const SelectorLossWeights& weights, const TrainConfig& cfg);

TrainTrace train_quantile(QuantileCalibrator& qc, const ForecasterSpec& spec,
                          std::span<const Window> train, std::span<const Window> val,
                          const TrainConfig& cfg);

TrainTrace fit_conformal_scale(ConformalCalibrator& cc, const ForecasterSpec& spec,
                               std::span<const Window> proper_train,
                               std::span<const Window> val, const TrainConfig& cfg);

// ---- online protocol ----

// Holds only the most recent L+H standardized rows. The lagged sample it
// emits has its label window ending exactly at the newest observed row, so
// nothing newer than the clock can be read through it.
class StreamingBuffer {
 public:
  StreamingBuffer(std::size_t L, std::size_t H, std::size_t d);
  void push(const std::vector<double>& row);
  long clock() const { return clock_; }
  bool prediction_ready() const { return ring_.size() >= L_; }
  bool sample_ready() const { return ring_.size() >= L_ + H_; }
  Tensor prediction_input() const;  // last L rows
  // X = rows [clock-H-L+1, clock-H], Y = rows [clock-H+1, clock]
  Window lagged_sample(const std::vector<std::size_t>& target_cols) const;

 private:
  std::size_t L_, H_, d_;
  long clock_ = -1;
  std::deque<std::vector<double>> ring_;
};

struct OnlineStep {
  long t = 0;                 // clock at this step
  double update_loss = 0.0;   // loss on the lagged sample before the update
  long max_read_index = -1;   // highest raw index read during this step
  bool attested = false;      // max_read_index == t
  double realized_mse = 0.0;  // filled after the future arrives; NaN if not
};

struct OnlineTrace {
  std::vector<OnlineStep> steps;
  bool attestation = true;  // every step attested
  MetricReport realized;    // over steps whose future was observed
  std::vector<std::vector<double>> predictions;  // per step, flattened H x m
};

// Leakage-free online run: at each clock t the model predicts the next H
// rows from the freshest L rows, then takes one Adam step on the lagged,
// fully-labeled sample from the buffer. Violating the buffer invariant
// aborts the run.
OnlineTrace run_online(TrainableModel& model, const ForecasterSpec& spec,
                       const SeriesFrame& frame, const Scaler& scaler,
                       const std::vector<std::size_t>& target_cols,
                       const TrainConfig& cfg, std::size_t max_steps);

void write_trace_csv(const std::string& path, const TrainTrace& trace,
                     bool canonical = false);
void write_online_trace_csv(const std::string& path, const OnlineTrace& trace);

}  // namespace dadapt
