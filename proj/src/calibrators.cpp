#include "dadapt/calibrators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dadapt/ops.hpp"
#include "dadapt/serialize.hpp"

#include "json.hpp"

namespace dadapt {

double pinball(double y, double q, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("pinball: tau must lie in (0, 1), got " + std::to_string(tau));
  }
  double u = y - q;
  return u >= 0 ? u * tau : u * (tau - 1.0);
}

Tensor pinball_loss(const Tensor& y, const Tensor& q, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("pinball: tau must lie in (0, 1), got " + std::to_string(tau));
  }
  Tensor u = sub(y, q);
  return add(mul_scalar(relu(u), tau), mul_scalar(relu(neg(u)), 1.0 - tau));
}

QuantileCalibrator::QuantileCalibrator(const QuantileConfig& cfg, std::size_t L,
                                       std::size_t d, std::size_t H, std::size_t m,
                                       std::uint64_t seed)
    : cfg_(cfg), L_(L), d_(d), H_(H), m_(m) {
  const std::size_t J = cfg.levels.size();
  if (J < 2) throw ConfigError("quantile calibrator needs at least 2 levels");
  for (std::size_t j = 0; j < J; ++j) {
    if (!(cfg.levels[j] > 0.0 && cfg.levels[j] < 1.0)) {
      throw ConfigError("quantile levels must lie in (0, 1)");
    }
    if (j > 0 && cfg.levels[j] <= cfg.levels[j - 1]) {
      throw ConfigError("quantile levels must be strictly increasing");
    }
  }
  anchor_ = J / 2;
  Rng rng(seed);
  MlpConfig mc;
  mc.in_dim = H * m + 2 * d;
  mc.out_dim = 1;  // unused head; three real heads below
  mc.hidden = cfg.hidden;
  mc.depth = cfg.depth;
  trunk_ = Mlp(mc, rng, "qc");
  const std::size_t z = trunk_.hidden_dim();
  head_a_ = LinearHead(z, H * m, true, rng, "qc.a");
  head_s_ = LinearHead(z, H * m, true, rng, "qc.s");
  head_d_ = LinearHead(z, (J - 1) * H * m, true, rng, "qc.d");
}

QuantileCalibrator::Fan QuantileCalibrator::fan(const Tensor& X,
                                                const Tensor& Yhat) const {
  const std::size_t J = cfg_.levels.size();
  const std::size_t hm = H_ * m_;
  Tensor yf = reshape(Yhat, Shape{hm});
  Tensor cond = concat({yf, pooled_context(X)});
  Tensor z = trunk_.hidden_features(cond);

  Tensor a = tanh(head_a_.forward(z));
  Tensor s = add_scalar(softplus(head_s_.forward(z)), cfg_.epsilon_scale);
  Tensor d_raw = head_d_.forward(z);  // (J-1) * hm

  Fan out;
  out.anchor_offset = a;
  out.q.resize(J);
  Tensor anchor_q = add(yf, mul_scalar(mul(a, s), cfg_.epsilon_offset));
  out.q[anchor_] = anchor_q;

  auto increment = [&](std::size_t j) {
    std::vector<std::size_t> idx(hm);
    for (std::size_t i = 0; i < hm; ++i) idx[i] = j * hm + i;
    return softplus(gather(d_raw, idx, Shape{hm}));
  };
  for (std::size_t j = anchor_; j + 1 < J; ++j) {
    out.q[j + 1] = add(out.q[j], increment(j));
  }
  for (std::size_t j = anchor_; j > 0; --j) {
    out.q[j - 1] = sub(out.q[j], increment(j - 1));
  }
  for (auto& q : out.q) q = reshape(q, Shape{H_, m_});
  return out;
}

std::vector<Tensor> QuantileCalibrator::parameters() const {
  auto ps = trunk_.parameters();
  ps.resize(ps.size() - 2);  // drop the unused trunk head
  for (const auto& p : head_a_.parameters()) ps.push_back(p);
  for (const auto& p : head_s_.parameters()) ps.push_back(p);
  for (const auto& p : head_d_.parameters()) ps.push_back(p);
  return ps;
}

std::vector<std::vector<double>> QuantileCalibrator::export_params() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : parameters()) out.push_back(p.values());
  return out;
}

void QuantileCalibrator::import_params(const std::vector<std::vector<double>>& arrays) {
  auto ps = parameters();
  if (arrays.size() != ps.size()) {
    throw CheckpointError("quantile calibrator: parameter count mismatch");
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (arrays[i].size() != ps[i].size()) {
      throw CheckpointError("quantile calibrator: parameter size mismatch");
    }
    ps[i].mutable_values() = arrays[i];
  }
}

ResidualMode residual_mode_from_string(const std::string& s) {
  if (s == "per_horizon") return ResidualMode::per_horizon;
  if (s == "joint") return ResidualMode::joint;
  throw ConfigError("unknown residual mode: '" + s + "'");
}

std::string residual_mode_to_string(ResidualMode mode) {
  return mode == ResidualMode::per_horizon ? "per_horizon" : "joint";
}

ConformalCalibrator::ConformalCalibrator(const ConformalConfig& cfg, std::size_t L,
                                         std::size_t d, std::size_t H, std::size_t m,
                                         std::uint64_t seed)
    : cfg_(cfg), L_(L), d_(d), H_(H), m_(m) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw ConfigError("conformal alpha must lie in (0, 1)");
  }
  Rng rng(seed);
  MlpConfig mc;
  mc.in_dim = H * m + 2 * d;
  mc.out_dim = 1;
  mc.hidden = cfg.hidden;
  mc.depth = cfg.depth;
  trunk_ = Mlp(mc, rng, "cc");
  const std::size_t out = cfg.mode == ResidualMode::per_horizon ? H : 1;
  head_w_ = LinearHead(trunk_.hidden_dim(), out, true, rng, "cc.w");
  // softplus(shift) + eps_w == 1, so the zero-initialized net starts at w = 1
  softplus_shift_ = std::log(std::exp(1.0 - cfg.epsilon_w) - 1.0);
}

Tensor ConformalCalibrator::scale(const Tensor& X, const Tensor& Yhat) const {
  Tensor cond = concat({reshape(Yhat, Shape{H_ * m_}), pooled_context(X)});
  Tensor z = trunk_.hidden_features(cond);
  return add_scalar(softplus(add_scalar(head_w_.forward(z), softplus_shift_)),
                    cfg_.epsilon_w);
}

std::vector<double> ConformalCalibrator::residual_norms(const Tensor& Y,
                                                        const Tensor& Yhat,
                                                        ResidualMode mode) {
  if (Y.shape() != Yhat.shape()) {
    throw DimensionError("residual_norms: shape mismatch");
  }
  const std::size_t H = Y.rows(), m = Y.cols();
  if (mode == ResidualMode::joint) {
    double s = 0.0;
    for (std::size_t i = 0; i < Y.size(); ++i) {
      double e = Y.value_at(i) - Yhat.value_at(i);
      s += e * e;
    }
    return {std::sqrt(s)};
  }
  std::vector<double> out(H, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      double e = Y(h, k) - Yhat(h, k);
      s += e * e;
    }
    out[h] = std::sqrt(s);
  }
  return out;
}

double ConformalCalibrator::score(const Tensor& X, const Tensor& Y,
                                  const Tensor& Yhat) const {
  Tensor w = scale(X, Yhat);
  auto rho = residual_norms(Y, Yhat, cfg_.mode);
  double worst = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    worst = std::max(worst, rho[i] / w.value_at(i));
  }
  return worst;
}

std::vector<Tensor> ConformalCalibrator::parameters() const {
  auto ps = trunk_.parameters();
  ps.resize(ps.size() - 2);
  for (const auto& p : head_w_.parameters()) ps.push_back(p);
  return ps;
}

double ConformalCalibrator::kappa() const {
  if (!calibrated()) {
    throw StateError("conformal calibrator: kappa requested before calibration");
  }
  return kappa_;
}

void ConformalCalibrator::set_calibration(double kappa, std::size_t n,
                                          std::vector<double> scores) {
  kappa_ = kappa;
  n_cal_ = n;
  scores_ = std::move(scores);
}

std::vector<std::vector<double>> ConformalCalibrator::export_params() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : parameters()) out.push_back(p.values());
  return out;
}

void ConformalCalibrator::import_params(const std::vector<std::vector<double>>& arrays) {
  auto ps = parameters();
  if (arrays.size() != ps.size()) {
    throw CheckpointError("conformal calibrator: parameter count mismatch");
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (arrays[i].size() != ps[i].size()) {
      throw CheckpointError("conformal calibrator: parameter size mismatch");
    }
    ps[i].mutable_values() = arrays[i];
  }
}

namespace {

std::size_t min_calibration_n(double alpha) {
  for (std::size_t n = 1; n < 1000000; ++n) {
    auto rank = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(n + 1)));
    if (rank <= n) return n;
  }
  return 1000000;
}

}  // namespace

double conformal_calibrate(ConformalCalibrator& cc, const ForecasterSpec& spec,
                           std::span<const Window> calibration_windows) {
  const std::size_t n = calibration_windows.size();
  const double alpha = cc.config().alpha;
  auto rank = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(n + 1)));
  if (n == 0 || rank > n) {
    throw DataError("conformal_calibrate: need at least " +
                    std::to_string(min_calibration_n(alpha)) +
                    " calibration windows for alpha=" + std::to_string(alpha) +
                    ", got " + std::to_string(n));
  }
  std::vector<double> scores;
  scores.reserve(n);
  for (const auto& w : calibration_windows) {
    Tensor yhat = predict(spec, w.X);
    scores.push_back(cc.score(w.X, w.Y, yhat));
  }
  std::sort(scores.begin(), scores.end());
  double kappa = scores[rank - 1];
  cc.set_calibration(kappa, n, std::move(scores));
  return kappa;
}

IntervalSet conformal_interval(const ConformalCalibrator& cc, const ForecasterSpec& spec,
                               std::span<const Window> windows) {
  if (!cc.calibrated()) {
    throw StateError("conformal_interval: calibrator has no kappa yet");
  }
  IntervalSet set;
  set.kind = IntervalSet::Kind::conformal_band;
  set.H = spec.H;
  set.m = spec.m;
  set.alpha = cc.config().alpha;
  set.calibrated = true;
  const double kappa = cc.kappa();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    Tensor yhat = predict(spec, w.X);
    Tensor scale = cc.scale(w.X, yhat);
    for (std::size_t h = 0; h < spec.H; ++h) {
      double radius =
          kappa * (cc.config().mode == ResidualMode::per_horizon ? scale.value_at(h)
                                                                 : scale.value_at(0));
      for (std::size_t k = 0; k < spec.m; ++k) {
        set.window_id.push_back(i);
        set.point.push_back(yhat(h, k));
        set.lower.push_back(yhat(h, k) - radius);
        set.upper.push_back(yhat(h, k) + radius);
        set.target.push_back(w.Y(h, k));
      }
    }
  }
  return set;
}

IntervalSet quantile_fan(const QuantileCalibrator& qc, const ForecasterSpec& spec,
                         std::span<const Window> windows) {
  IntervalSet set;
  set.kind = IntervalSet::Kind::quantile_fan;
  set.H = spec.H;
  set.m = spec.m;
  set.levels = qc.config().levels;
  set.calibrated = true;  // structural; no kappa involved
  const std::size_t J = set.levels.size();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    Tensor yhat = predict(spec, w.X);
    auto fan = qc.fan(w.X, yhat);
    std::vector<double> flat;
    flat.reserve(J * spec.H * spec.m);
    for (const auto& q : fan.q) {
      flat.insert(flat.end(), q.values().begin(), q.values().end());
    }
    set.fan_values.push_back(std::move(flat));
    for (std::size_t h = 0; h < spec.H; ++h) {
      for (std::size_t k = 0; k < spec.m; ++k) {
        set.window_id.push_back(i);
        set.point.push_back(yhat(h, k));
        set.lower.push_back(fan.q.front()(h, k));
        set.upper.push_back(fan.q.back()(h, k));
        set.target.push_back(w.Y(h, k));
      }
    }
  }
  return set;
}

void write_interval_csv(const std::string& path, const IntervalSet& set) {
  std::ostringstream os;
  os << "window_id,horizon,target,point,lower,upper,level_or_alpha\n";
  const double tag = set.kind == IntervalSet::Kind::conformal_band
                         ? set.alpha
                         : set.levels.back() - set.levels.front();
  const std::size_t per_window = set.H * set.m;
  for (std::size_t i = 0; i < set.point.size(); ++i) {
    std::size_t within = i % per_window;
    os << set.window_id[i] << "," << within / set.m << "," << within % set.m << ","
       << format_double(set.point[i]) << "," << format_double(set.lower[i]) << ","
       << format_double(set.upper[i]) << "," << format_double(tag) << "\n";
  }
  write_text_file(path, os.str());
}

std::string calibration_metadata_json(const ConformalCalibrator& cc, std::uint64_t seed) {
  nlohmann::json j;
  j["alpha"] = cc.config().alpha;
  j["n_cal"] = cc.n_cal();
  j["kappa"] = cc.calibrated() ? cc.kappa() : 0.0;
  j["rank_convention"] = "ceil((1-alpha)(n+1))";
  j["residual_mode"] = residual_mode_to_string(cc.config().mode);
  j["seed"] = seed;
  return j.dump(2);
}

// ---- checkpoints ----

std::string quantile_to_json(const QuantileCalibrator& qc) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["levels"] = qc.config().levels;
  j["epsilon_offset"] = qc.config().epsilon_offset;
  j["epsilon_scale"] = qc.config().epsilon_scale;
  j["lambda_cal"] = qc.config().lambda_cal;
  j["lambda_mag"] = qc.config().lambda_mag;
  j["coverage_sharpness"] = qc.config().coverage_sharpness;
  j["hidden"] = qc.config().hidden;
  j["depth"] = qc.config().depth;
  j["shapes"] = {{"L", qc.L()}, {"d", qc.d()}, {"H", qc.H()}, {"m", qc.m()}};
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& arr : qc.export_params()) arrays.push_back(base64_encode_f64(arr));
  j["theta"] = arrays;
  j["checksum"] = params_checksum(qc.export_params());
  return j.dump(2);
}

QuantileCalibrator quantile_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("quantile checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw CheckpointError("unsupported quantile checkpoint format_version");
    }
    QuantileConfig cfg;
    cfg.levels = j.at("levels").get<std::vector<double>>();
    cfg.epsilon_offset = j.at("epsilon_offset").get<double>();
    cfg.epsilon_scale = j.at("epsilon_scale").get<double>();
    cfg.lambda_cal = j.at("lambda_cal").get<double>();
    cfg.lambda_mag = j.at("lambda_mag").get<double>();
    cfg.coverage_sharpness = j.at("coverage_sharpness").get<double>();
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.depth = j.at("depth").get<std::size_t>();
    const auto& sh = j.at("shapes");
    QuantileCalibrator qc(cfg, sh.at("L").get<std::size_t>(), sh.at("d").get<std::size_t>(),
                          sh.at("H").get<std::size_t>(), sh.at("m").get<std::size_t>(), 0);
    std::vector<std::vector<double>> arrays;
    for (const auto& a : j.at("theta")) arrays.push_back(base64_decode_f64(a.get<std::string>()));
    qc.import_params(arrays);
    if (j.contains("checksum") &&
        j["checksum"].get<std::string>() != params_checksum(qc.export_params())) {
      throw CheckpointError("quantile checkpoint checksum mismatch");
    }
    return qc;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed quantile checkpoint: ") + e.what());
  }
}

std::string conformal_to_json(const ConformalCalibrator& cc) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["alpha"] = cc.config().alpha;
  j["epsilon_w"] = cc.config().epsilon_w;
  j["lambda_w"] = cc.config().lambda_w;
  j["residual_mode"] = residual_mode_to_string(cc.config().mode);
  j["hidden"] = cc.config().hidden;
  j["depth"] = cc.config().depth;
  j["shapes"] = {{"L", cc.L()}, {"d", cc.d()}, {"H", cc.H()}, {"m", cc.m()}};
  if (cc.calibrated()) {
    j["kappa"] = cc.kappa();
    j["n_cal"] = cc.n_cal();
  }
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& arr : cc.export_params()) arrays.push_back(base64_encode_f64(arr));
  j["theta"] = arrays;
  j["checksum"] = params_checksum(cc.export_params());
  return j.dump(2);
}

ConformalCalibrator conformal_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("conformal checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw CheckpointError("unsupported conformal checkpoint format_version");
    }
    ConformalConfig cfg;
    cfg.alpha = j.at("alpha").get<double>();
    cfg.epsilon_w = j.at("epsilon_w").get<double>();
    cfg.lambda_w = j.at("lambda_w").get<double>();
    cfg.mode = residual_mode_from_string(j.at("residual_mode").get<std::string>());
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.depth = j.at("depth").get<std::size_t>();
    const auto& sh = j.at("shapes");
    ConformalCalibrator cc(cfg, sh.at("L").get<std::size_t>(), sh.at("d").get<std::size_t>(),
                           sh.at("H").get<std::size_t>(), sh.at("m").get<std::size_t>(), 0);
    std::vector<std::vector<double>> arrays;
    for (const auto& a : j.at("theta")) arrays.push_back(base64_decode_f64(a.get<std::string>()));
    cc.import_params(arrays);
    if (j.contains("kappa")) {
      cc.set_calibration(j["kappa"].get<double>(), j.at("n_cal").get<std::size_t>(), {});
    }
    if (j.contains("checksum") &&
        j["checksum"].get<std::string>() != params_checksum(cc.export_params())) {
      throw CheckpointError("conformal checkpoint checksum mismatch");
    }
    return cc;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed conformal checkpoint: ") + e.what());
  }
}

}  // namespace dadapt
