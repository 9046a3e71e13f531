#include "dadapt/selector.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dadapt/ops.hpp"
#include "dadapt/serialize.hpp"

#include "json.hpp"

namespace dadapt {

namespace {
constexpr double kEntropyEps = 1e-8;
}

HardeningMode hardening_from_string(const std::string& s) {
  if (s == "soft") return HardeningMode::soft;
  if (s == "threshold") return HardeningMode::threshold;
  if (s == "straight_through" || s == "st") return HardeningMode::straight_through;
  throw ConfigError("unknown hardening mode: '" + s + "'");
}

std::string hardening_to_string(HardeningMode h) {
  switch (h) {
    case HardeningMode::soft: return "soft";
    case HardeningMode::threshold: return "threshold";
    case HardeningMode::straight_through: return "straight_through";
  }
  throw ConfigError("unknown hardening mode");
}

MaskNet::MaskNet(const MaskNetConfig& cfg, std::size_t L, std::size_t d,
                 std::uint64_t seed)
    : cfg_(cfg), L_(L), d_(d), temperature_(cfg.temp_start) {
  if (cfg.temp_start <= 0 || cfg.temp_end <= 0) {
    throw ConfigError("mask temperatures must be positive");
  }
  Rng rng(seed);
  MlpConfig mc;
  mc.in_dim = L + 2;
  mc.out_dim = L;
  mc.hidden = cfg.hidden;
  mc.depth = 1;
  mc.zero_init_head = true;  // logits 0 => mask 0.5 before training
  net_ = Mlp(mc, rng, "mask");
}

void MaskNet::set_temperature(double tau) {
  if (tau <= 0) throw ConfigError("mask temperature must be positive");
  temperature_ = tau;
}

void MaskNet::anneal(std::size_t epoch, std::size_t total_epochs) {
  if (total_epochs <= 1) {
    temperature_ = cfg_.temp_end;
    return;
  }
  double f = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  temperature_ = cfg_.temp_start * std::pow(cfg_.temp_end / cfg_.temp_start, f);
}

Tensor MaskNet::logits(const Tensor& X) const {
  if (X.rank() != 2 || X.rows() != L_ || X.cols() != d_) {
    throw DimensionError("mask logits: X is " + shape_str(X.shape()));
  }
  Tensor flat = reshape(X, Shape{L_ * d_});
  Tensor mu = mean(X);
  Tensor centered = sub(flat, mu);
  Tensor sd = sqrt(add_scalar(mean(mul(centered, centered)), 1e-12));
  std::vector<Tensor> cols;
  cols.reserve(d_);
  for (std::size_t j = 0; j < d_; ++j) {
    std::vector<std::size_t> idx(L_);
    for (std::size_t t = 0; t < L_; ++t) idx[t] = t * d_ + j;
    Tensor col = gather(flat, idx, Shape{L_});
    cols.push_back(net_.forward(concat({col, mu, sd})));
  }
  // column-major stack back to row-major L x d
  Tensor stacked = concat(cols);
  std::vector<std::size_t> perm(L_ * d_);
  for (std::size_t t = 0; t < L_; ++t)
    for (std::size_t j = 0; j < d_; ++j) perm[t * d_ + j] = j * L_ + t;
  return gather(stacked, perm, Shape{L_, d_});
}

namespace {

double noise_median(MaskNoise noise) {
  switch (noise) {
    case MaskNoise::logistic: return 0.0;
    case MaskNoise::gumbel: return -std::log(std::log(2.0));
    case MaskNoise::none: return 0.0;
  }
  return 0.0;
}

MaskSample build_sample(const MaskNet& net, const Tensor& X,
                        const std::vector<double>& noise, std::uint64_t seed) {
  Tensor ell = net.logits(X);
  Tensor noise_t = Tensor::from_values(noise, ell.shape());
  Tensor soft = sigmoid(mul_scalar(add(ell, noise_t), 1.0 / net.temperature()));
  MaskSample s;
  s.soft = soft;
  std::vector<double> hard(soft.size());
  double keep = 0.0;
  for (std::size_t i = 0; i < soft.size(); ++i) {
    hard[i] = soft.value_at(i) > 0.5 ? 1.0 : 0.0;
    keep += soft.value_at(i);
  }
  s.hard = Tensor::from_values(std::move(hard), soft.shape());
  s.keep_rate = keep / static_cast<double>(soft.size());
  s.gumbel_seed = seed;
  return s;
}

}  // namespace

MaskSample sample_mask(const MaskNet& net, const Tensor& X, Rng& rng) {
  std::vector<double> noise(net.L() * net.d());
  switch (net.config().noise) {
    case MaskNoise::logistic:
      for (auto& g : noise) g = rng.logistic();
      break;
    case MaskNoise::gumbel:
      for (auto& g : noise) g = rng.gumbel();
      break;
    case MaskNoise::none: {
      double med = noise_median(net.config().noise);
      for (auto& g : noise) g = med;
      break;
    }
  }
  return build_sample(net, X, noise, 0);
}

MaskSample deterministic_mask(const MaskNet& net, const Tensor& X) {
  std::vector<double> noise(net.L() * net.d(), noise_median(net.config().noise));
  return build_sample(net, X, noise, 0);
}

Tensor harden(const MaskNet& net, const Tensor& soft_mask) {
  switch (net.config().hardening) {
    case HardeningMode::straight_through:
      return straight_through_threshold(soft_mask, 0.5);
    case HardeningMode::threshold: {
      std::vector<double> hard(soft_mask.size());
      for (std::size_t i = 0; i < soft_mask.size(); ++i) {
        hard[i] = soft_mask.value_at(i) > 0.5 ? 1.0 : 0.0;
      }
      return Tensor::from_values(std::move(hard), soft_mask.shape());
    }
    case HardeningMode::soft:
      throw ContractError("harden: hardening mode is 'soft'");
  }
  throw ContractError("harden: bad mode");
}

std::pair<Tensor, SelectorLossBreakdown> selector_loss(const Tensor& mask,
                                                       const Tensor& prediction,
                                                       const Tensor& target,
                                                       const SelectorLossWeights& w) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("selector_loss: prediction/target shape mismatch");
  }
  const std::size_t L = mask.rows(), d = mask.cols();
  SelectorLossBreakdown bd;

  // prediction term: horizon-weighted MSE
  Tensor err = sub(prediction, target);
  Tensor sq = mul(err, err);
  Tensor pred_term;
  if (!w.horizon_weights.empty()) {
    const std::size_t H = prediction.rows(), m = prediction.cols();
    if (w.horizon_weights.size() != H) {
      throw DimensionError("selector_loss: horizon weight length mismatch");
    }
    std::vector<double> wh(H * m);
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t k = 0; k < m; ++k) wh[h * m + k] = w.horizon_weights[h];
    pred_term = mean(mul(sq, Tensor::from_values(std::move(wh), prediction.shape())));
  } else {
    pred_term = mean(sq);
  }
  bd.pred = pred_term.item();

  Tensor sparsity = mean(mask);
  bd.sparsity = sparsity.item();

  // binary entropy with a small epsilon inside the logs
  Tensor ent = neg(add(mul(mask, log(add_scalar(mask, kEntropyEps))),
                       mul(add_scalar(neg(mask), 1.0),
                           log(add_scalar(add_scalar(neg(mask), 1.0), kEntropyEps)))));
  Tensor entropy = mean(ent);
  bd.entropy = entropy.item();

  // temporal smoothness: mean |M_t - M_{t-1}| over consecutive rows
  Tensor tv;
  if (L >= 2) {
    Tensor flat = reshape(mask, Shape{L * d});
    std::vector<std::size_t> hi((L - 1) * d), lo((L - 1) * d);
    for (std::size_t t = 1; t < L; ++t)
      for (std::size_t j = 0; j < d; ++j) {
        hi[(t - 1) * d + j] = t * d + j;
        lo[(t - 1) * d + j] = (t - 1) * d + j;
      }
    Tensor diff = sub(gather(flat, hi, Shape{(L - 1) * d}),
                      gather(flat, lo, Shape{(L - 1) * d}));
    tv = mean(abs(diff));
  } else {
    tv = Tensor::scalar(0.0);
  }
  bd.tv = tv.item();

  if (w.kappa <= 0.0 || w.kappa > 1.0) {
    throw ConfigError("selector budget kappa must lie in (0, 1]");
  }
  Tensor budget = relu(add_scalar(sparsity, -w.kappa));
  bd.budget = budget.item();

  // group sparsity: mean over columns of the column L2 norm
  Tensor group;
  {
    Tensor flat = reshape(mask, Shape{L * d});
    std::vector<Tensor> col_norms;
    col_norms.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<std::size_t> idx(L);
      for (std::size_t t = 0; t < L; ++t) idx[t] = t * d + j;
      Tensor col = gather(flat, idx, Shape{L});
      col_norms.push_back(sqrt(add_scalar(sum(mul(col, col)), kEntropyEps)));
    }
    group = mean(concat(col_norms));
  }
  bd.group = group.item();

  Tensor total = pred_term;
  total = add(total, mul_scalar(sparsity, w.l1));
  total = add(total, mul_scalar(entropy, w.entropy));
  total = add(total, mul_scalar(tv, w.tv));
  total = add(total, mul_scalar(budget, w.budget));
  total = add(total, mul_scalar(group, w.group));
  bd.total = total.item();
  return {total, bd};
}

FeatureRanking rank_features(const MaskNet& net, std::span<const Window> windows) {
  if (windows.empty()) throw DataError("rank_features: no windows");
  const std::size_t L = net.L(), d = net.d();
  std::vector<double> acc(L * d, 0.0);
  for (const auto& w : windows) {
    MaskSample s = deterministic_mask(net, w.X);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s.soft.value_at(i);
  }
  const double n = static_cast<double>(windows.size());
  FeatureRanking out;
  out.entries.reserve(L * d);
  out.column_importance.assign(d, 0.0);
  std::size_t selected = 0;
  bool any_far_from_half = false;
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      double imp = acc[t * d + j] / n;
      FeatureImportance fi;
      fi.time_offset = t;
      fi.covariate = j;
      fi.importance = imp;
      fi.selected = imp > 0.5;
      if (fi.selected) ++selected;
      if (std::fabs(imp - 0.5) > 0.05) any_far_from_half = true;
      out.entries.push_back(fi);
      out.column_importance[j] += imp / static_cast<double>(L);
    }
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) {
                     return a.importance > b.importance;
                   });
  out.mask_ratio = static_cast<double>(selected) / static_cast<double>(L * d);
  out.untrained_warning = !any_far_from_half;
  return out;
}

void write_feature_report(const std::string& path, const FeatureRanking& ranking,
                          double kappa) {
  std::ostringstream os;
  os << "# mask_ratio=" << format_double(ranking.mask_ratio)
     << " kappa=" << format_double(kappa) << "\n";
  os << "covariate,time_offset,importance,selected\n";
  for (const auto& e : ranking.entries) {
    os << e.covariate << "," << e.time_offset << "," << format_double(e.importance)
       << "," << (e.selected ? 1 : 0) << "\n";
  }
  write_text_file(path, os.str());
}

std::string selector_to_json(const MaskNet& net) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["temp_start"] = net.config().temp_start;
  j["temp_end"] = net.config().temp_end;
  j["temperature"] = net.temperature();
  j["hardening"] = hardening_to_string(net.config().hardening);
  j["noise"] = net.config().noise == MaskNoise::logistic
                   ? "logistic"
                   : (net.config().noise == MaskNoise::gumbel ? "gumbel" : "none");
  j["hidden"] = net.config().hidden;
  j["shapes"] = {{"L", net.L()}, {"d", net.d()}};
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& arr : net.export_params()) arrays.push_back(base64_encode_f64(arr));
  j["theta"] = arrays;
  j["checksum"] = params_checksum(net.export_params());
  return j.dump(2);
}

MaskNet selector_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("selector checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw CheckpointError("unsupported selector checkpoint format_version");
    }
    MaskNetConfig cfg;
    cfg.temp_start = j.at("temp_start").get<double>();
    cfg.temp_end = j.at("temp_end").get<double>();
    cfg.hardening = hardening_from_string(j.at("hardening").get<std::string>());
    std::string noise = j.at("noise").get<std::string>();
    cfg.noise = noise == "logistic" ? MaskNoise::logistic
                                    : (noise == "gumbel" ? MaskNoise::gumbel : MaskNoise::none);
    cfg.hidden = j.at("hidden").get<std::size_t>();
    MaskNet net(cfg, j.at("shapes").at("L").get<std::size_t>(),
                j.at("shapes").at("d").get<std::size_t>(), 0);
    std::vector<std::vector<double>> arrays;
    for (const auto& a : j.at("theta")) arrays.push_back(base64_decode_f64(a.get<std::string>()));
    net.import_params(arrays);
    net.set_temperature(j.at("temperature").get<double>());
    if (j.contains("checksum") &&
        j["checksum"].get<std::string>() != params_checksum(net.export_params())) {
      throw CheckpointError("selector checkpoint checksum mismatch");
    }
    return net;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed selector checkpoint: ") + e.what());
  }
}

void save_selector(const MaskNet& net, const std::string& path) {
  write_text_file(path, selector_to_json(net));
}

MaskNet load_selector(const std::string& path) {
  return selector_from_json(read_text_file(path));
}

}  // namespace dadapt
