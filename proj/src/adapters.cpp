#include "dadapt/adapters.hpp"

#include <cmath>
#include <limits>

#include "dadapt/ops.hpp"
#include "dadapt/serialize.hpp"

#include "json.hpp"

namespace dadapt {

Placement placement_from_string(const std::string& s) {
  if (s == "input" || s == "in") return Placement::input;
  if (s == "output" || s == "out") return Placement::output;
  throw ConfigError("unknown placement: '" + s + "'");
}

std::string placement_to_string(Placement p) {
  return p == Placement::input ? "input" : "output";
}

EditForm edit_form_from_string(const std::string& s) {
  if (s == "additive" || s == "add") return EditForm::additive;
  if (s == "multiplicative" || s == "mul") return EditForm::multiplicative;
  if (s == "exponential" || s == "exp") return EditForm::exponential;
  throw ConfigError("unknown edit form: '" + s + "'");
}

std::string edit_form_to_string(EditForm f) {
  switch (f) {
    case EditForm::additive: return "additive";
    case EditForm::multiplicative: return "multiplicative";
    case EditForm::exponential: return "exponential";
  }
  throw ConfigError("unknown edit form");
}

namespace {

void validate_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw ConfigError("delta must lie in (0, 1], got " + std::to_string(delta));
  }
}

}  // namespace

// per-covariate mean and last row: keeps the conditioning input small at
// large L
Tensor pooled_context(const Tensor& X) {
  const std::size_t L = X.rows(), d = X.cols();
  Tensor ones = Tensor::full(Shape{1, L}, 1.0 / static_cast<double>(L));
  Tensor col_mean = reshape(matmul(ones, X), Shape{d});
  std::vector<std::size_t> idx(d);
  for (std::size_t j = 0; j < d; ++j) idx[j] = (L - 1) * d + j;
  Tensor last_row = gather(reshape(X, Shape{L * d}), idx, Shape{d});
  return concat({col_mean, last_row});
}

AdapterNet::AdapterNet(const AdapterConfig& cfg, std::size_t L, std::size_t d,
                       std::size_t H, std::size_t m, std::uint64_t seed)
    : cfg_(cfg), L_(L), d_(d), H_(H), m_(m) {
  validate_delta(cfg.delta);
  Rng rng(seed);
  if (cfg.placement == Placement::input) {
    MlpConfig mc;
    mc.in_dim = L * d;
    mc.out_dim = L * d;
    mc.hidden = cfg.hidden_width;
    mc.depth = cfg.depth;
    mc.zero_init_head = true;
    trunk_ = Mlp(mc, rng, "ada_in");
  } else {
    MlpConfig mc;
    mc.in_dim = H * m + 2 * d;
    mc.out_dim = 1;  // head unused; the per-horizon head below reads hidden features
    mc.hidden = cfg.hidden_width;
    mc.depth = cfg.depth;
    mc.zero_init_head = true;
    trunk_ = Mlp(mc, rng, "ada_out");
    const std::size_t e = cfg.horizon_embed_dim;
    horizon_head_ = LinearHead(trunk_.hidden_dim() + e, m, /*zero_init=*/true,
                               rng, "ada_out.head");
    if (e > 0) {
      std::vector<double> emb(H * e);
      for (auto& x : emb) x = 0.1 * rng.gaussian();
      horizon_embedding_ = Tensor::from_values(std::move(emb), Shape{H, e}, true);
      horizon_embedding_.set_name("ada_out.horizon_embedding");
    }
  }
}

Tensor AdapterNet::raw_edit_input(const Tensor& X) const {
  if (cfg_.placement != Placement::input) {
    throw ContractError("raw_edit_input called on an output-placement adapter");
  }
  Tensor out = trunk_.forward(reshape(X, Shape{L_ * d_}));
  return tanh(reshape(out, Shape{L_, d_}));
}

Tensor AdapterNet::raw_edit_output(const Tensor& Yhat, const Tensor& X) const {
  if (cfg_.placement != Placement::output) {
    throw ContractError("raw_edit_output called on an input-placement adapter");
  }
  Tensor cond = concat({reshape(Yhat, Shape{H_ * m_}), pooled_context(X)});
  Tensor z = trunk_.hidden_features(cond);
  const std::size_t e = cfg_.horizon_embed_dim;
  std::vector<Tensor> rows;
  rows.reserve(H_);
  for (std::size_t h = 0; h < H_; ++h) {
    Tensor zh = z;
    if (e > 0) {
      std::vector<std::size_t> idx(e);
      for (std::size_t i = 0; i < e; ++i) idx[i] = h * e + i;
      Tensor emb_h = gather(reshape(horizon_embedding_, Shape{H_ * e}), idx, Shape{e});
      zh = concat({z, emb_h});
    }
    rows.push_back(horizon_head_.forward(zh));
  }
  return tanh(reshape(concat(rows), Shape{H_, m_}));
}

std::vector<Tensor> AdapterNet::parameters() const {
  std::vector<Tensor> ps;
  if (cfg_.placement == Placement::input) {
    ps = trunk_.parameters();
  } else {
    ps = trunk_.parameters();
    // trunk head is unused for output placement; drop its two tensors
    ps.resize(ps.size() - 2);
    auto hp = horizon_head_.parameters();
    ps.insert(ps.end(), hp.begin(), hp.end());
    if (cfg_.horizon_embed_dim > 0) ps.push_back(horizon_embedding_);
  }
  return ps;
}

std::vector<std::vector<double>> AdapterNet::export_params() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : parameters()) out.push_back(p.values());
  return out;
}

void AdapterNet::import_params(const std::vector<std::vector<double>>& arrays) {
  auto ps = parameters();
  if (arrays.size() != ps.size()) {
    throw CheckpointError("adapter: parameter count mismatch on import");
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (arrays[i].size() != ps[i].size()) {
      throw CheckpointError("adapter: parameter size mismatch on import");
    }
    ps[i].mutable_values() = arrays[i];
  }
}

CompositeAdapter CompositeAdapter::make(const AdapterConfig& input_cfg,
                                        const AdapterConfig& output_cfg,
                                        std::size_t L, std::size_t d, std::size_t H,
                                        std::size_t m, std::uint64_t seed,
                                        bool with_gate) {
  CompositeAdapter c;
  AdapterConfig ic = input_cfg;
  ic.placement = Placement::input;
  AdapterConfig oc = output_cfg;
  oc.placement = Placement::output;
  c.input_adapter = AdapterNet(ic, L, d, H, m, Rng::mix(seed, 1));
  c.output_adapter = AdapterNet(oc, L, d, H, m, Rng::mix(seed, 2));
  if (with_gate) {
    Tensor g = Tensor::zeros(Shape{H}, true);  // sigmoid(0) = 0.5 blend
    g.set_name("composite.gate");
    c.gate_logits = g;
  }
  return c;
}

std::pair<Tensor, EditRecord> nudge_input(const AdapterNet& net, const Tensor& X) {
  Tensor A = net.raw_edit_input(X);
  const double delta = net.delta();
  Tensor post;
  switch (net.config().form) {
    case EditForm::additive:
      post = add(X, mul_scalar(A, delta));
      break;
    case EditForm::multiplicative:
      post = mul(X, add_scalar(mul_scalar(A, delta), 1.0));
      break;
    case EditForm::exponential:
      post = mul(X, exp(mul_scalar(A, delta)));
      break;
  }
  EditRecord rec;
  rec.placement = Placement::input;
  rec.form = net.config().form;
  rec.delta = delta;
  rec.raw_edit = A;
  rec.pre = X;
  rec.post = post;
  rec.drift_norm = std::numeric_limits<double>::quiet_NaN();
  return {post, rec};
}

std::pair<Tensor, EditRecord> correct_output(const AdapterNet& net, const Tensor& Yhat,
                                             const Tensor& X) {
  Tensor A = net.raw_edit_output(Yhat, X);
  const double delta = net.delta();
  Tensor post;
  switch (net.config().form) {
    case EditForm::additive:
      post = add(Yhat, mul_scalar(A, delta));
      break;
    case EditForm::multiplicative:
      post = mul(Yhat, add_scalar(mul_scalar(A, delta), 1.0));
      break;
    case EditForm::exponential:
      post = mul(Yhat, exp(mul_scalar(A, delta)));
      break;
  }
  EditRecord rec;
  rec.placement = Placement::output;
  rec.form = net.config().form;
  rec.delta = delta;
  rec.raw_edit = A;
  rec.pre = Yhat;
  rec.post = post;
  double s = 0.0;
  for (std::size_t i = 0; i < Yhat.size(); ++i) {
    double e = post.value_at(i) - Yhat.value_at(i);
    s += e * e;
  }
  rec.drift_norm = std::sqrt(s);
  return {post, rec};
}

CompositeResult apply_composite(const CompositeAdapter& c, const ForecasterSpec& spec,
                                const Tensor& X) {
  auto [x_tilde, in_rec] = nudge_input(c.input_adapter, X);
  Tensor y_mid = predict(spec, x_tilde);
  auto [y_tilde, out_rec] = correct_output(c.output_adapter, y_mid, X);
  CompositeResult res;
  if (c.gate_logits) {
    // per-horizon blend of the realized input step and the output edit
    Tensor y_base = predict(spec, X);
    Tensor gamma = sigmoid(*c.gate_logits);  // H
    std::vector<std::size_t> idx(spec.H * spec.m);
    for (std::size_t h = 0; h < spec.H; ++h)
      for (std::size_t k = 0; k < spec.m; ++k) idx[h * spec.m + k] = h;
    Tensor gamma_full = gather(gamma, idx, Shape{spec.H, spec.m});
    Tensor one_minus = add_scalar(neg(gamma_full), 1.0);
    Tensor input_step = sub(y_mid, y_base);
    Tensor output_step = sub(y_tilde, y_mid);
    res.prediction = add(y_base, add(mul(gamma_full, input_step),
                                     mul(one_minus, output_step)));
  } else {
    res.prediction = y_tilde;
  }
  res.input_record = in_rec;
  res.output_record = out_rec;
  return res;
}

void measure_prediction_drift(const ForecasterSpec& spec, EditRecord& record) {
  if (record.placement != Placement::input) return;  // already set at creation
  Tensor y_pre = predict(spec, record.pre.detached_copy());
  Tensor y_post = predict(spec, record.post.detached_copy());
  double s = 0.0;
  for (std::size_t i = 0; i < y_pre.size(); ++i) {
    double e = y_post.value_at(i) - y_pre.value_at(i);
    s += e * e;
  }
  record.drift_norm = std::sqrt(s);
}

OptimalDelta optimal_delta_closed_form(const std::vector<std::vector<double>>& residuals,
                                       const std::vector<std::vector<double>>& corrections) {
  if (residuals.size() != corrections.size() || residuals.empty()) {
    throw ContractError("optimal_delta: need matched, non-empty r/g datasets");
  }
  double mean_rg = 0.0, mean_gg = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const auto& r = residuals[i];
    const auto& g = corrections[i];
    if (r.size() != g.size()) {
      throw DimensionError("optimal_delta: r/g size mismatch at sample " +
                           std::to_string(i));
    }
    for (std::size_t j = 0; j < r.size(); ++j) {
      mean_rg += r[j] * g[j];
      mean_gg += g[j] * g[j];
    }
  }
  mean_rg /= static_cast<double>(residuals.size());
  mean_gg /= static_cast<double>(residuals.size());
  if (mean_gg == 0.0) {
    throw UndefinedStepError("optimal_delta: corrections are identically zero");
  }
  if (mean_rg <= 0.0) return {0.0, true};
  return {mean_rg / mean_gg, false};
}

DriftCheck drift_bound_check(const EditRecord& record, double lipschitz,
                             std::size_t L, std::size_t d) {
  if (record.placement != Placement::input) {
    throw ContractError("drift_bound_check: input-placement records only");
  }
  if (!std::isfinite(record.drift_norm)) {
    throw ContractError("drift_bound_check: call measure_prediction_drift first");
  }
  const double delta = record.delta;
  const double a_norm = l2_norm(record.raw_edit.values());
  const double sqrt_ld = std::sqrt(static_cast<double>(L * d));
  DriftCheck chk;
  chk.lhs = record.drift_norm;
  switch (record.form) {
    case EditForm::additive:
      chk.rhs = delta * lipschitz * a_norm;
      chk.rhs_cap = delta * lipschitz * sqrt_ld;
      break;
    case EditForm::exponential: {
      const double bx = linf_norm(record.pre.values());
      chk.rhs = delta * std::exp(delta) * lipschitz * bx * a_norm;
      chk.rhs_cap = delta * std::exp(delta) * lipschitz * bx * sqrt_ld;
      break;
    }
    case EditForm::multiplicative: {
      // (1 + delta*A) edits: additive bound with the effective edit A (.) X
      std::vector<double> eff(record.raw_edit.size());
      for (std::size_t i = 0; i < eff.size(); ++i) {
        eff[i] = record.raw_edit.value_at(i) * record.pre.value_at(i);
      }
      const double bx = linf_norm(record.pre.values());
      chk.rhs = delta * lipschitz * l2_norm(eff);
      chk.rhs_cap = delta * lipschitz * bx * sqrt_ld;
      break;
    }
  }
  chk.holds = chk.lhs <= chk.rhs + 1e-9;
  return chk;
}

// ---- checkpoint I/O ----

namespace {

nlohmann::json adapter_json(const AdapterNet& net) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["placement"] = placement_to_string(net.config().placement);
  j["form"] = edit_form_to_string(net.config().form);
  j["delta"] = net.config().delta;
  j["hidden_width"] = net.config().hidden_width;
  j["depth"] = net.config().depth;
  j["horizon_embed_dim"] = net.config().horizon_embed_dim;
  j["shapes"] = {{"L", net.L()}, {"d", net.d()}, {"H", net.H()}, {"m", net.m()}};
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& arr : net.export_params()) arrays.push_back(base64_encode_f64(arr));
  j["theta"] = arrays;
  j["checksum"] = params_checksum(net.export_params());
  return j;
}

AdapterNet adapter_from(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw CheckpointError("unsupported adapter checkpoint format_version");
    }
    AdapterConfig cfg;
    cfg.placement = placement_from_string(j.at("placement").get<std::string>());
    cfg.form = edit_form_from_string(j.at("form").get<std::string>());
    cfg.delta = j.at("delta").get<double>();
    cfg.hidden_width = j.at("hidden_width").get<std::size_t>();
    cfg.depth = j.at("depth").get<std::size_t>();
    cfg.horizon_embed_dim = j.at("horizon_embed_dim").get<std::size_t>();
    const auto& sh = j.at("shapes");
    AdapterNet net(cfg, sh.at("L").get<std::size_t>(), sh.at("d").get<std::size_t>(),
                   sh.at("H").get<std::size_t>(), sh.at("m").get<std::size_t>(), 0);
    std::vector<std::vector<double>> arrays;
    for (const auto& a : j.at("theta")) arrays.push_back(base64_decode_f64(a.get<std::string>()));
    net.import_params(arrays);
    if (j.contains("checksum") &&
        j["checksum"].get<std::string>() != params_checksum(net.export_params())) {
      throw CheckpointError("adapter checkpoint checksum mismatch");
    }
    return net;
  } catch (const CheckpointError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed adapter checkpoint: ") + e.what());
  }
}

}  // namespace

std::string adapter_to_json(const AdapterNet& net) { return adapter_json(net).dump(2); }

AdapterNet adapter_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("adapter checkpoint is not valid JSON: ") + e.what());
  }
  return adapter_from(j);
}

void save_adapter(const AdapterNet& net, const std::string& path) {
  write_text_file(path, adapter_to_json(net));
}

AdapterNet load_adapter(const std::string& path) {
  return adapter_from_json(read_text_file(path));
}

std::string composite_to_json(const CompositeAdapter& c) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["input"] = adapter_json(c.input_adapter);
  j["output"] = adapter_json(c.output_adapter);
  if (c.gate_logits) j["gate_logits"] = base64_encode_f64(c.gate_logits->values());
  return j.dump(2);
}

CompositeAdapter composite_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("composite checkpoint is not valid JSON: ") + e.what());
  }
  try {
    CompositeAdapter c;
    c.input_adapter = adapter_from(j.at("input"));
    c.output_adapter = adapter_from(j.at("output"));
    if (j.contains("gate_logits")) {
      auto g = base64_decode_f64(j["gate_logits"].get<std::string>());
      Tensor t = Tensor::from_values(g, Shape{g.size()}, true);
      t.set_name("composite.gate");
      c.gate_logits = t;
    }
    return c;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed composite checkpoint: ") + e.what());
  }
}

void save_composite(const CompositeAdapter& c, const std::string& path) {
  write_text_file(path, composite_to_json(c));
}

CompositeAdapter load_composite(const std::string& path) {
  return composite_from_json(read_text_file(path));
}

std::string adapter_checksum(const AdapterNet& net) {
  return params_checksum(net.export_params());
}

}  // namespace dadapt
