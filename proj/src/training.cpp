#include "dadapt/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "dadapt/ops.hpp"
#include "dadapt/serialize.hpp"

namespace dadapt {

namespace {

Tensor point_loss(const Tensor& pred, const Tensor& target, LossKind kind) {
  Tensor err = sub(pred, target);
  return kind == LossKind::mse ? mean(mul(err, err)) : mean(abs(err));
}

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

std::size_t early_stop_best_epoch(const std::vector<double>& val_losses,
                                  std::size_t patience, std::size_t* stopped_after) {
  if (val_losses.empty()) throw ContractError("early_stop: empty trace");
  std::size_t best = 1;
  double best_val = val_losses[0];
  if (stopped_after) *stopped_after = val_losses.size();
  for (std::size_t e = 2; e <= val_losses.size(); ++e) {
    if (val_losses[e - 1] < best_val) {
      best_val = val_losses[e - 1];
      best = e;
    } else if (patience > 0 && e - best >= patience) {
      if (stopped_after) *stopped_after = e;
      return best;
    }
  }
  return best;
}

double TrainableModel::eval_loss(std::span<const Window> windows) {
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
  Tensor loss = batch_loss(windows);  // no active tape: forward only
  return loss.item();
}

std::vector<std::vector<double>> TrainableModel::snapshot_params() {
  std::vector<std::vector<double>> snap;
  for (auto& group : parameter_groups()) {
    for (auto& p : group) snap.push_back(p.values());
  }
  return snap;
}

void TrainableModel::restore_params(const std::vector<std::vector<double>>& snap) {
  std::size_t i = 0;
  for (auto& group : parameter_groups()) {
    for (auto& p : group) {
      if (i >= snap.size() || snap[i].size() != p.size()) {
        throw ContractError("restore_params: snapshot mismatch");
      }
      p.mutable_values() = snap[i];
      p.zero_grad();
      ++i;
    }
  }
}

// ---- AdapterModel ----

AdapterModel::AdapterModel(AdapterNet& net, const ForecasterSpec& spec, LossKind loss)
    : net_(net), spec_(spec), loss_(loss) {}

std::vector<std::vector<Tensor>> AdapterModel::parameter_groups() {
  return {net_.parameters()};
}

Tensor AdapterModel::predict_point(const Tensor& X) {
  if (net_.config().placement == Placement::input) {
    auto [x_tilde, rec] = nudge_input(net_, X);
    return predict(spec_, x_tilde);
  }
  Tensor yhat = predict(spec_, X);
  auto [y_tilde, rec] = correct_output(net_, yhat, X);
  return y_tilde;
}

Tensor AdapterModel::batch_loss(std::span<const Window> batch) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  Tensor total = Tensor::scalar(0.0);
  for (const auto& w : batch) {
    total = add(total, point_loss(predict_point(w.X), w.Y, loss_));
  }
  return mul_scalar(total, 1.0 / static_cast<double>(batch.size()));
}

void AdapterModel::collect_descent(std::span<const Window> batch,
                                   std::vector<DescentRecord>& out) {
  // the witness is defined for the output-additive adapter under MSE
  if (net_.config().placement != Placement::output ||
      net_.config().form != EditForm::additive || loss_ != LossKind::mse) {
    return;
  }
  DescentRecord rec;
  rec.delta = net_.delta();
  double inner = 0.0, gg = 0.0, dd = 0.0;
  double loss_before = 0.0, loss_after = 0.0;
  for (const auto& w : batch) {
    Tensor yhat = predict(spec_, w.X);
    Tensor edit = net_.raw_edit_output(yhat, w.X);
    for (std::size_t i = 0; i < yhat.size(); ++i) {
      double g = yhat.value_at(i) - w.Y.value_at(i);  // grad of 1/2||.||^2
      double d = edit.value_at(i);
      inner += g * d;
      gg += g * g;
      dd += d * d;
      double after = g + rec.delta * d;
      loss_before += 0.5 * g * g;
      loss_after += 0.5 * after * after;
    }
  }
  rec.inner_gd = inner;
  rec.norm_g = std::sqrt(gg);
  rec.norm_d = std::sqrt(dd);
  rec.realized_change = loss_after - loss_before;
  if (inner < 0.0 && rec.norm_g > 0.0 && rec.norm_d > 0.0) {
    rec.alpha = -inner / (rec.norm_g * rec.norm_d);
    rec.step_threshold = 2.0 * (-inner) / (rec.norm_d * rec.norm_d);
    rec.applicable = rec.delta < rec.step_threshold;
  }
  rec.holds = !rec.applicable || rec.realized_change < 0.0;
  out.push_back(rec);
}

// ---- CompositeModel ----

CompositeModel::CompositeModel(CompositeAdapter& composite, const ForecasterSpec& spec,
                               LossKind loss)
    : composite_(composite), spec_(spec), loss_(loss) {}

std::vector<std::vector<Tensor>> CompositeModel::parameter_groups() {
  std::vector<Tensor> output_group = composite_.output_adapter.parameters();
  if (composite_.gate_logits) output_group.push_back(*composite_.gate_logits);
  return {composite_.input_adapter.parameters(), output_group};
}

Tensor CompositeModel::predict_point(const Tensor& X) {
  return apply_composite(composite_, spec_, X).prediction;
}

Tensor CompositeModel::batch_loss(std::span<const Window> batch) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  Tensor total = Tensor::scalar(0.0);
  for (const auto& w : batch) {
    total = add(total, point_loss(predict_point(w.X), w.Y, loss_));
  }
  return mul_scalar(total, 1.0 / static_cast<double>(batch.size()));
}

// ---- SelectorModel ----

SelectorModel::SelectorModel(MaskNet& net, const ForecasterSpec& spec,
                             SelectorLossWeights weights, std::uint64_t seed)
    : net_(net), spec_(spec), weights_(std::move(weights)), seed_(seed) {}

std::vector<std::vector<Tensor>> SelectorModel::parameter_groups() {
  return {net_.parameters()};
}

void SelectorModel::on_epoch_begin(std::size_t epoch, std::size_t total) {
  epoch_ = epoch;
  net_.anneal(epoch, total);
}

Tensor SelectorModel::batch_loss(std::span<const Window> batch) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  Tensor total = Tensor::scalar(0.0);
  for (const auto& w : batch) {
    // per-window noise stream: reproducible across runs and epochs
    Rng rng(Rng::mix(Rng::mix(seed_, w.origin), epoch_));
    MaskSample ms = sample_mask(net_, w.X, rng);
    Tensor applied = ms.soft;
    if (net_.config().hardening == HardeningMode::straight_through) {
      applied = harden(net_, ms.soft);
    } else if (net_.config().hardening == HardeningMode::threshold) {
      applied = ms.hard;
    }
    Tensor pred = predict(spec_, mul(w.X, applied));
    auto [loss, bd] = selector_loss(ms.soft, pred, w.Y, weights_);
    last_breakdown_ = bd;
    total = add(total, loss);
  }
  return mul_scalar(total, 1.0 / static_cast<double>(batch.size()));
}

double SelectorModel::eval_loss(std::span<const Window> windows) {
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& w : windows) {
    MaskSample ms = deterministic_mask(net_, w.X);
    Tensor pred = predict(spec_, mul(w.X, ms.soft));
    auto [loss, bd] = selector_loss(ms.soft, pred, w.Y, weights_);
    total += loss.item();
  }
  return total / static_cast<double>(windows.size());
}

Tensor SelectorModel::predict_point(const Tensor& X) {
  MaskSample ms = deterministic_mask(net_, X);
  return predict(spec_, mul(X, ms.soft));
}

// ---- QuantileModel ----

QuantileModel::QuantileModel(QuantileCalibrator& qc, const ForecasterSpec& spec)
    : qc_(qc), spec_(spec) {}

std::vector<std::vector<Tensor>> QuantileModel::parameter_groups() {
  return {qc_.parameters()};
}

Tensor QuantileModel::batch_loss(std::span<const Window> batch) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  const auto& levels = qc_.config().levels;
  const std::size_t J = levels.size();
  const double k = qc_.config().coverage_sharpness;

  Tensor pin_total = Tensor::scalar(0.0);
  Tensor mag_total = Tensor::scalar(0.0);
  std::vector<Tensor> exceed(J, Tensor::scalar(0.0));  // sum of sigma(k(y-q))
  for (const auto& w : batch) {
    Tensor yhat = predict(spec_, w.X);
    auto fan = qc_.fan(w.X, yhat);
    for (std::size_t j = 0; j < J; ++j) {
      pin_total = add(pin_total, mean(pinball_loss(w.Y, fan.q[j], levels[j])));
      exceed[j] = add(exceed[j],
                      mean(sigmoid(mul_scalar(sub(w.Y, fan.q[j]), k))));
    }
    mag_total = add(mag_total, mean(mul(fan.anchor_offset, fan.anchor_offset)));
  }
  const double n = static_cast<double>(batch.size());
  Tensor loss = mul_scalar(pin_total, 1.0 / (n * static_cast<double>(J)));
  // soft-coverage reliability: exceedance rate of level j should be 1 - tau_j
  Tensor cal = Tensor::scalar(0.0);
  for (std::size_t j = 0; j < J; ++j) {
    Tensor gap = add_scalar(mul_scalar(exceed[j], 1.0 / n), -(1.0 - levels[j]));
    cal = add(cal, mul(gap, gap));
  }
  loss = add(loss, mul_scalar(cal, qc_.config().lambda_cal));
  loss = add(loss, mul_scalar(mag_total, qc_.config().lambda_mag / n));
  return loss;
}

// ---- ConformalScaleModel ----

ConformalScaleModel::ConformalScaleModel(ConformalCalibrator& cc,
                                         const ForecasterSpec& spec)
    : cc_(cc), spec_(spec) {}

std::vector<std::vector<Tensor>> ConformalScaleModel::parameter_groups() {
  return {cc_.parameters()};
}

Tensor ConformalScaleModel::batch_loss(std::span<const Window> batch) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  Tensor total = Tensor::scalar(0.0);
  const double floor = cc_.config().epsilon_w;
  for (const auto& w : batch) {
    Tensor yhat = predict(spec_, w.X);
    Tensor scale = cc_.scale(w.X, yhat);
    auto rho = ConformalCalibrator::residual_norms(w.Y, yhat, cc_.config().mode);
    Tensor rho_t = Tensor::from_values(rho, scale.shape());
    Tensor fit_term = mean(div(rho_t, scale));
    Tensor near_one = add_scalar(scale, -1.0);
    Tensor reg = mean(mul(near_one, near_one));
    total = add(total, add(fit_term, mul_scalar(reg, cc_.config().lambda_w)));
    for (std::size_t i = 0; i < scale.size(); ++i) {
      ++scale_evals_;
      if (scale.value_at(i) <= floor * 1.01) ++floor_hits_;
    }
  }
  return mul_scalar(total, 1.0 / static_cast<double>(batch.size()));
}

double ConformalScaleModel::floor_fraction() const {
  return scale_evals_ == 0
             ? 0.0
             : static_cast<double>(floor_hits_) / static_cast<double>(scale_evals_);
}

// ---- generic batch driver ----

TrainTrace train_batch(TrainableModel& model, const ForecasterSpec& spec,
                       std::span<const Window> train, std::span<const Window> val,
                       const TrainConfig& cfg) {
  if (train.empty()) throw DataError("train_batch: no training windows");
  TrainTrace trace;
  trace.backbone_checksum_before = spec.checksum();

  std::vector<AdamConfig> acs;
  AdamConfig ac;
  ac.lr = cfg.lr;
  std::vector<AdamState> opts;
  for (auto& group : model.parameter_groups()) opts.emplace_back(group, ac);

  const bool have_val = !val.empty();
  if (!have_val) {
    trace.early_stopping_disabled = true;
    trace.warnings.push_back("no validation split: early stopping disabled");
  }

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_snap = model.snapshot_params();
  std::size_t best_epoch = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double t0 = now_ms();
    model.on_epoch_begin(epoch - 1, cfg.epochs);
    if (cfg.shuffle) {
      Rng rng(Rng::mix(cfg.seed, 0xE90C + epoch));
      for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = rng.below(i);
        std::swap(order[i - 1], order[j]);
      }
    }
    double train_loss_sum = 0.0;
    std::size_t seen = 0;
    bool nan_abort = false;
    const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
    std::vector<Window> batch;
    for (std::size_t start = 0; start < order.size() && !nan_abort; start += bs) {
      std::size_t stop = std::min(order.size(), start + bs);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train[order[i]]);
      if (cfg.diagnostics) {
        model.collect_descent(std::span<const Window>(batch), trace.descent);
      }
      double loss_value;
      {
        Tape tape;
        Tensor loss = model.batch_loss(std::span<const Window>(batch));
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
          nan_abort = true;
          break;
        }
        tape.backward(loss);
      }
      for (auto& opt : opts) opt.step();
      train_loss_sum += loss_value * static_cast<double>(batch.size());
      seen += batch.size();
    }
    if (nan_abort) {
      trace.aborted = true;
      trace.warnings.push_back("NaN loss at epoch " + std::to_string(epoch) +
                               "; restored last good parameters");
      model.restore_params(best_snap);
      break;
    }

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = seen ? train_loss_sum / static_cast<double>(seen) : 0.0;
    es.val_loss = have_val ? model.eval_loss(val)
                           : std::numeric_limits<double>::quiet_NaN();
    if (model.has_point_predictions() && have_val) {
      std::vector<Tensor> preds, targets;
      preds.reserve(val.size());
      for (const auto& w : val) {
        preds.push_back(model.predict_point(w.X));
        targets.push_back(w.Y);
      }
      MetricReport rep = point_metrics(preds, targets);
      es.mse = rep.mse;
      es.mae = rep.mae;
    }
    es.wall_ms = now_ms() - t0;
    trace.epochs.push_back(es);

    if (have_val) {
      if (es.val_loss < best_val) {
        best_val = es.val_loss;
        best_epoch = epoch;
        best_snap = model.snapshot_params();
      } else if (cfg.early_stop_patience > 0 &&
                 epoch - best_epoch >= cfg.early_stop_patience) {
        break;
      }
    } else {
      best_epoch = epoch;
    }
  }

  if (have_val && best_epoch > 0 && !trace.aborted) {
    model.restore_params(best_snap);
  }
  trace.best_epoch = best_epoch;
  trace.backbone_checksum_after = spec.checksum();
  if (trace.backbone_checksum_before != trace.backbone_checksum_after) {
    throw TrainingError("frozen backbone parameters changed during training");
  }
  return trace;
}

TrainTrace train_adapter(AdapterNet& net, const ForecasterSpec& spec,
                         std::span<const Window> train, std::span<const Window> val,
                         const TrainConfig& cfg) {
  AdapterModel model(net, spec, cfg.loss);
  return train_batch(model, spec, train, val, cfg);
}

TrainTrace train_joint(CompositeAdapter& composite, const ForecasterSpec& spec,
                       std::span<const Window> train, std::span<const Window> val,
                       const TrainConfig& cfg) {
  if (!cfg.joint) {
    throw ConfigError("train_joint: cfg.joint must be set");
  }
  CompositeModel model(composite, spec, cfg.loss);
  return train_batch(model, spec, train, val, cfg);
}

TrainTrace train_selector(MaskNet& net, const ForecasterSpec& spec,
                          std::span<const Window> train, std::span<const Window> val,
                          const SelectorLossWeights& weights, const TrainConfig& cfg) {
  SelectorModel model(net, spec, weights, cfg.seed);
  return train_batch(model, spec, train, val, cfg);
}

TrainTrace train_quantile(QuantileCalibrator& qc, const ForecasterSpec& spec,
                          std::span<const Window> train, std::span<const Window> val,
                          const TrainConfig& cfg) {
  QuantileModel model(qc, spec);
  return train_batch(model, spec, train, val, cfg);
}

TrainTrace fit_conformal_scale(ConformalCalibrator& cc, const ForecasterSpec& spec,
                               std::span<const Window> proper_train,
                               std::span<const Window> val, const TrainConfig& cfg) {
  ConformalScaleModel model(cc, spec);
  TrainTrace trace = train_batch(model, spec, proper_train, val, cfg);
  if (model.floor_fraction() > 0.5) {
    trace.warnings.push_back(
        "learned scale collapsed to the epsilon_w floor on most samples; "
        "lambda_w may be too small");
  }
  return trace;
}

// ---- online ----

StreamingBuffer::StreamingBuffer(std::size_t L, std::size_t H, std::size_t d)
    : L_(L), H_(H), d_(d) {
  if (L == 0 || H == 0 || d == 0) {
    throw ConfigError("streaming buffer: L, H, d must be positive");
  }
}

void StreamingBuffer::push(const std::vector<double>& row) {
  if (row.size() != d_) {
    throw DimensionError("streaming buffer: row width mismatch");
  }
  ring_.push_back(row);
  if (ring_.size() > L_ + H_) ring_.pop_front();
  ++clock_;
}

Tensor StreamingBuffer::prediction_input() const {
  if (!prediction_ready()) {
    throw StateError("streaming buffer: not enough rows for a prediction input");
  }
  std::vector<double> xv(L_ * d_);
  const std::size_t start = ring_.size() - L_;
  for (std::size_t r = 0; r < L_; ++r) {
    for (std::size_t j = 0; j < d_; ++j) xv[r * d_ + j] = ring_[start + r][j];
  }
  return Tensor::from_values(std::move(xv), Shape{L_, d_});
}

Window StreamingBuffer::lagged_sample(const std::vector<std::size_t>& target_cols) const {
  if (!sample_ready()) {
    throw StateError("streaming buffer: not enough rows for a labeled sample");
  }
  // ring back() is row `clock`; the label is the last H rows, the input the
  // L rows before them
  const std::size_t base = ring_.size() - L_ - H_;
  std::vector<double> xv(L_ * d_);
  for (std::size_t r = 0; r < L_; ++r) {
    for (std::size_t j = 0; j < d_; ++j) xv[r * d_ + j] = ring_[base + r][j];
  }
  const std::size_t m = target_cols.size();
  std::vector<double> yv(H_ * m);
  for (std::size_t r = 0; r < H_; ++r) {
    for (std::size_t k = 0; k < m; ++k) {
      yv[r * m + k] = ring_[base + L_ + r][target_cols[k]];
    }
  }
  Window w;
  w.X = Tensor::from_values(std::move(xv), Shape{L_, d_});
  w.Y = Tensor::from_values(std::move(yv), Shape{H_, m});
  w.origin = static_cast<std::size_t>(clock_ - static_cast<long>(L_ + H_) + 1);
  return w;
}

namespace {

// instrumented stream access: records the highest raw index handed out
class StreamReader {
 public:
  StreamReader(const SeriesFrame& frame, const Scaler& scaler)
      : frame_(frame), scaler_(scaler) {}

  std::vector<double> read_row(long t) {
    max_read_ = std::max(max_read_, t);
    std::vector<double> row(frame_.d());
    for (std::size_t j = 0; j < frame_.d(); ++j) {
      row[j] = scaler_.apply(frame_.at(static_cast<std::size_t>(t), j), j);
    }
    return row;
  }

  long max_read() const { return max_read_; }

 private:
  const SeriesFrame& frame_;
  const Scaler& scaler_;
  long max_read_ = -1;
};

}  // namespace

OnlineTrace run_online(TrainableModel& model, const ForecasterSpec& spec,
                       const SeriesFrame& frame, const Scaler& scaler,
                       const std::vector<std::size_t>& target_cols,
                       const TrainConfig& cfg, std::size_t max_steps) {
  const std::size_t L = spec.L, H = spec.H;
  if (frame.T() <= L + H) {
    throw DataError("run_online: stream length must exceed L + H");
  }
  if (!model.has_point_predictions()) {
    throw ContractError("run_online: model has no point predictions");
  }
  const std::string backbone_before = spec.checksum();

  // online protocol fixes batch size 1
  AdamConfig ac;
  ac.lr = cfg.lr;
  std::vector<AdamState> opts;
  for (auto& group : model.parameter_groups()) opts.emplace_back(group, ac);

  StreamingBuffer buffer(L, H, frame.d());
  StreamReader reader(frame, scaler);
  OnlineTrace trace;

  const long T = static_cast<long>(frame.T());
  for (long t = 0; t < T; ++t) {
    buffer.push(reader.read_row(t));
    if (!buffer.sample_ready()) continue;
    if (trace.steps.size() >= max_steps) break;

    OnlineStep step;
    step.t = t;

    // 1) predict the upcoming H rows from the freshest L rows
    Tensor pred = model.predict_point(buffer.prediction_input());
    trace.predictions.push_back(pred.values());

    // 2) lagged, fully labeled sample; 3) one optimizer step on it
    Window sample = buffer.lagged_sample(target_cols);
    {
      Tape tape;
      Tensor loss = model.batch_loss(std::span<const Window>(&sample, 1));
      step.update_loss = loss.item();
      if (!std::isfinite(step.update_loss)) {
        throw TrainingError("run_online: NaN loss at clock " + std::to_string(t));
      }
      tape.backward(loss);
    }
    for (auto& opt : opts) opt.step();

    step.max_read_index = reader.max_read();
    step.attested = step.max_read_index == t;
    if (step.max_read_index > t) {
      throw TrainingError("run_online: leakage detected at clock " + std::to_string(t) +
                          " (read index " + std::to_string(step.max_read_index) + ")");
    }
    trace.attestation = trace.attestation && step.attested;
    step.realized_mse = std::numeric_limits<double>::quiet_NaN();
    trace.steps.push_back(step);
  }

  // realized errors once the future is observed (evaluation only; the model
  // never saw these rows during its updates)
  const std::size_t m = target_cols.size();
  std::vector<Tensor> preds, targets;
  for (std::size_t si = 0; si < trace.steps.size(); ++si) {
    long t = trace.steps[si].t;
    if (t + static_cast<long>(H) >= T) continue;
    std::vector<double> truth(H * m);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t k = 0; k < m; ++k) {
        truth[r * m + k] = scaler.apply(
            frame.at(static_cast<std::size_t>(t) + 1 + r, target_cols[k]),
            target_cols[k]);
      }
    }
    Tensor pred = Tensor::from_values(trace.predictions[si], Shape{H, m});
    Tensor target = Tensor::from_values(std::move(truth), Shape{H, m});
    double se = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      double e = pred.value_at(i) - target.value_at(i);
      se += e * e;
    }
    trace.steps[si].realized_mse = se / static_cast<double>(pred.size());
    preds.push_back(pred);
    targets.push_back(target);
  }
  if (!preds.empty()) trace.realized = point_metrics(preds, targets);

  if (spec.checksum() != backbone_before) {
    throw TrainingError("frozen backbone parameters changed during online run");
  }
  return trace;
}

void write_trace_csv(const std::string& path, const TrainTrace& trace, bool canonical) {
  std::ostringstream os;
  os << "epoch,split,loss,mse,mae,wall_ms\n";
  for (const auto& e : trace.epochs) {
    double ms = canonical ? 0.0 : e.wall_ms;
    os << e.epoch << ",train," << format_double(e.train_loss) << ",,,"
       << format_double(ms) << "\n";
    os << e.epoch << ",val," << format_double(e.val_loss) << ","
       << format_double(e.mse) << "," << format_double(e.mae) << ","
       << format_double(ms) << "\n";
  }
  write_text_file(path, os.str());
}

void write_online_trace_csv(const std::string& path, const OnlineTrace& trace) {
  std::ostringstream os;
  os << "step,clock,update_loss,realized_mse,max_read_index,attested\n";
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    os << i << "," << s.t << "," << format_double(s.update_loss) << ","
       << format_double(s.realized_mse) << "," << s.max_read_index << ","
       << (s.attested ? 1 : 0) << "\n";
  }
  os << "# attestation: max_read_index == clock at every step: "
     << (trace.attestation ? "PASS" : "FAIL") << "\n";
  write_text_file(path, os.str());
}

}  // namespace dadapt
