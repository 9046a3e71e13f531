#include "dadapt/forecaster.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>

#include "dadapt/adam.hpp"
#include "dadapt/mlp.hpp"
#include "dadapt/ops.hpp"
#include "dadapt/rng.hpp"
#include "dadapt/serialize.hpp"

#include "json.hpp"

namespace dadapt {

BackboneKind backbone_kind_from_string(const std::string& s) {
  if (s == "linear_ar") return BackboneKind::linear_ar;
  if (s == "seasonal_naive") return BackboneKind::seasonal_naive;
  if (s == "tiny_mlp") return BackboneKind::tiny_mlp;
  if (s == "blackbox") return BackboneKind::blackbox;
  throw ConfigError("unknown backbone kind: '" + s + "'");
}

std::string backbone_kind_to_string(BackboneKind k) {
  switch (k) {
    case BackboneKind::linear_ar: return "linear_ar";
    case BackboneKind::seasonal_naive: return "seasonal_naive";
    case BackboneKind::tiny_mlp: return "tiny_mlp";
    case BackboneKind::blackbox: return "blackbox";
  }
  throw ConfigError("unknown backbone kind");
}

std::vector<std::vector<double>> ForecasterSpec::param_arrays() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.push_back(p.values());
  return out;
}

std::string ForecasterSpec::checksum() const {
  return params_checksum(param_arrays());
}

namespace {

void check_input_shape(const ForecasterSpec& spec, const Tensor& X) {
  if (X.rank() != 2 || X.rows() != spec.L || X.cols() != spec.d) {
    throw DimensionError("predict: X is " + shape_str(X.shape()) +
                         ", backbone expects [" + std::to_string(spec.L) + "x" +
                         std::to_string(spec.d) + "]");
  }
}

std::vector<std::size_t> seasonal_gather_indices(const ForecasterSpec& spec) {
  const std::size_t p = spec.fit_config.period;
  std::vector<std::size_t> idx;
  idx.reserve(spec.H * spec.m);
  for (std::size_t h = 0; h < spec.H; ++h) {
    std::size_t row = spec.L - p + (h % p);
    for (std::size_t k = 0; k < spec.m; ++k) {
      idx.push_back(row * spec.d + spec.target_cols[k]);
    }
  }
  return idx;
}

}  // namespace

Tensor predict(const ForecasterSpec& spec, const Tensor& X) {
  check_input_shape(spec, X);
  const Shape out_shape{spec.H, spec.m};
  switch (spec.kind) {
    case BackboneKind::linear_ar: {
      Tensor x = reshape(X, Shape{spec.L * spec.d});
      return reshape(add(matvec(spec.params[0], x), spec.params[1]), out_shape);
    }
    case BackboneKind::seasonal_naive: {
      if (spec.fit_config.period > spec.L) {
        throw BackboneError("seasonal_naive: period exceeds context length");
      }
      Tensor x = reshape(X, Shape{spec.L * spec.d});
      return gather(x, seasonal_gather_indices(spec), out_shape);
    }
    case BackboneKind::tiny_mlp: {
      Tensor x = reshape(X, Shape{spec.L * spec.d});
      Tensor h = tanh(add(matvec(spec.params[0], x), spec.params[1]));
      return reshape(add(matvec(spec.params[2], h), spec.params[3]), out_shape);
    }
    case BackboneKind::blackbox: {
      if (X.requires_grad() && Tape::active() != nullptr) {
        throw BackboneError("blackbox backbone cannot propagate gradients to its input");
      }
      std::vector<double> y;
      try {
        y = spec.blackbox(X.values());
      } catch (const std::exception& e) {
        throw BackboneError(std::string("blackbox callable failed: ") + e.what());
      }
      if (y.size() != spec.H * spec.m) {
        throw BackboneError("blackbox returned " + std::to_string(y.size()) +
                            " values, expected " + std::to_string(spec.H * spec.m));
      }
      return Tensor::from_values(std::move(y), out_shape);
    }
  }
  throw BackboneError("unhandled backbone kind");
}

ForecasterSpec fit_backbone(BackboneKind kind, std::span<const Window> train_windows,
                            const std::vector<std::size_t>& target_cols,
                            FitConfig cfg) {
  if (kind == BackboneKind::blackbox) {
    throw ConfigError("fit_backbone: blackbox backbones are wrapped, not fit");
  }
  if (train_windows.empty()) {
    throw DataError("fit_backbone: need at least one training window");
  }
  const Tensor& x0 = train_windows[0].X;
  const Tensor& y0 = train_windows[0].Y;
  const std::size_t L = x0.rows(), d = x0.cols();
  const std::size_t H = y0.rows(), m = y0.cols();

  ForecasterSpec spec;
  spec.kind = kind;
  spec.L = L;
  spec.d = d;
  spec.H = H;
  spec.m = m;
  spec.target_cols = target_cols;
  spec.fit_config = cfg;

  switch (kind) {
    case BackboneKind::seasonal_naive: {
      if (cfg.period == 0 || cfg.period > L) {
        throw ConfigError("seasonal_naive: period must be in [1, L]");
      }
      spec.lipschitz_hint = operator_norm(spec).value;
      break;
    }
    case BackboneKind::linear_ar: {
      // ridge on [vec(X), 1] with an unpenalized intercept
      const std::size_t n = train_windows.size();
      const std::size_t in_dim = L * d;
      const std::size_t out_dim = H * m;
      Eigen::MatrixXd A(n, in_dim + 1);
      Eigen::MatrixXd B(n, out_dim);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& xv = train_windows[i].X.values();
        for (std::size_t j = 0; j < in_dim; ++j) A(i, j) = xv[j];
        A(i, in_dim) = 1.0;
        const auto& yv = train_windows[i].Y.values();
        for (std::size_t j = 0; j < out_dim; ++j) B(i, j) = yv[j];
      }
      Eigen::MatrixXd normal = A.transpose() * A;
      for (std::size_t j = 0; j < in_dim; ++j) normal(j, j) += cfg.ridge_lambda;
      Eigen::MatrixXd rhs = A.transpose() * B;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
      Eigen::MatrixXd theta;
      if (ldlt.info() == Eigen::Success) {
        theta = ldlt.solve(rhs);
      }
      if (ldlt.info() != Eigen::Success || !theta.allFinite()) {
        std::fprintf(stderr,
                     "fit_backbone: singular normal equations, falling back to "
                     "pseudo-inverse\n");
        theta = normal.completeOrthogonalDecomposition().solve(rhs);
      }
      std::vector<double> W(out_dim * in_dim);
      std::vector<double> b(out_dim);
      for (std::size_t o = 0; o < out_dim; ++o) {
        for (std::size_t j = 0; j < in_dim; ++j) W[o * in_dim + j] = theta(j, o);
        b[o] = theta(in_dim, o);
      }
      spec.params.push_back(Tensor::from_values(std::move(W), Shape{out_dim, in_dim}));
      spec.params.push_back(Tensor::from_values(std::move(b), Shape{out_dim}));
      spec.lipschitz_hint = operator_norm(spec).value;
      break;
    }
    case BackboneKind::tiny_mlp: {
      Rng rng(cfg.seed);
      const std::size_t in_dim = L * d;
      const std::size_t out_dim = H * m;
      Tensor W1 = xavier_init(cfg.mlp_hidden, in_dim, rng, "backbone.w1");
      Tensor b1 = Tensor::zeros(Shape{cfg.mlp_hidden}, true);
      b1.set_name("backbone.b1");
      Tensor W2 = xavier_init(out_dim, cfg.mlp_hidden, rng, "backbone.w2");
      Tensor b2 = Tensor::zeros(Shape{out_dim}, true);
      b2.set_name("backbone.b2");
      AdamConfig ac;
      ac.lr = cfg.mlp_lr;
      AdamState opt({W1, b1, W2, b2}, ac);
      const std::size_t n = train_windows.size();
      for (std::size_t epoch = 0; epoch < cfg.mlp_epochs; ++epoch) {
        for (std::size_t start = 0; start < n; start += cfg.mlp_batch) {
          std::size_t stop = std::min(n, start + cfg.mlp_batch);
          Tape tape;
          Tensor loss = Tensor::scalar(0.0);
          for (std::size_t i = start; i < stop; ++i) {
            Tensor x = reshape(train_windows[i].X, Shape{in_dim});
            Tensor h = tanh(add(matvec(W1, x), b1));
            Tensor out = add(matvec(W2, h), b2);
            Tensor err = sub(out, reshape(train_windows[i].Y, Shape{out_dim}));
            loss = add(loss, mean(mul(err, err)));
          }
          loss = mul_scalar(loss, 1.0 / static_cast<double>(stop - start));
          tape.backward(loss);
          opt.step();
        }
      }
      // freeze
      spec.params.push_back(W1.detached_copy());
      spec.params.push_back(b1.detached_copy());
      spec.params.push_back(W2.detached_copy());
      spec.params.push_back(b2.detached_copy());
      spec.lipschitz_hint = operator_norm(spec).value;
      break;
    }
    case BackboneKind::blackbox:
      break;
  }
  return spec;
}

Tensor jvp(const ForecasterSpec& spec, const Tensor& X, const Tensor& v,
           JacobianProduct jp) {
  check_input_shape(spec, X);
  if (v.shape() != X.shape()) {
    throw DimensionError("jvp: direction shape " + shape_str(v.shape()) +
                         " does not match input " + shape_str(X.shape()));
  }
  const Shape out_shape{spec.H, spec.m};
  if (jp.mode == JacobianMode::finite_difference || spec.kind == BackboneKind::blackbox) {
    const double h = jp.fd_step;
    std::vector<double> xp = X.values(), xm = X.values();
    for (std::size_t i = 0; i < xp.size(); ++i) {
      xp[i] += h * v.value_at(i);
      xm[i] -= h * v.value_at(i);
    }
    Tensor yp = predict(spec, Tensor::from_values(std::move(xp), X.shape()));
    Tensor ym = predict(spec, Tensor::from_values(std::move(xm), X.shape()));
    std::vector<double> out(yp.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = (yp.value_at(i) - ym.value_at(i)) / (2.0 * h);
    }
    return Tensor::from_values(std::move(out), out_shape);
  }
  switch (spec.kind) {
    case BackboneKind::linear_ar: {
      Tensor vec_v = reshape(v, Shape{spec.L * spec.d});
      return reshape(matvec(spec.params[0], vec_v), out_shape);
    }
    case BackboneKind::seasonal_naive: {
      Tensor vec_v = reshape(v, Shape{spec.L * spec.d});
      return gather(vec_v, seasonal_gather_indices(spec), out_shape);
    }
    case BackboneKind::tiny_mlp: {
      // forward-mode by hand: J v = W2 diag(1 - h^2) W1 v
      const auto& W1 = spec.params[0].values();
      const auto& b1 = spec.params[1].values();
      const auto& W2 = spec.params[2].values();
      const std::size_t in_dim = spec.L * spec.d;
      const std::size_t hid = spec.params[1].size();
      const std::size_t out_dim = spec.H * spec.m;
      std::vector<double> z(hid, 0.0), dz(hid, 0.0);
      for (std::size_t i = 0; i < hid; ++i) {
        double acc = b1[i], dacc = 0.0;
        for (std::size_t j = 0; j < in_dim; ++j) {
          acc += W1[i * in_dim + j] * X.value_at(j);
          dacc += W1[i * in_dim + j] * v.value_at(j);
        }
        double th = std::tanh(acc);
        z[i] = th;
        dz[i] = (1.0 - th * th) * dacc;
      }
      std::vector<double> out(out_dim, 0.0);
      for (std::size_t o = 0; o < out_dim; ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < hid; ++i) acc += W2[o * hid + i] * dz[i];
        out[o] = acc;
      }
      return Tensor::from_values(std::move(out), out_shape);
    }
    case BackboneKind::blackbox:
      break;
  }
  throw BackboneError("jvp: unsupported backbone kind");
}

Tensor vjp(const ForecasterSpec& spec, const Tensor& X, const Tensor& u) {
  if (spec.kind == BackboneKind::blackbox) {
    throw BackboneError("vjp: blackbox backbones have no reverse pass");
  }
  Tensor x = X.detached_copy(true);
  Tape tape;
  Tensor y = predict(spec, x);
  Tensor s = dot(y, u);
  tape.backward(s);
  return Tensor::from_values(x.grad(), X.shape());
}

OperatorNorm operator_norm(const ForecasterSpec& spec, std::uint64_t seed) {
  OperatorNorm result;
  switch (spec.kind) {
    case BackboneKind::linear_ar: {
      const std::size_t rows = spec.H * spec.m;
      const std::size_t cols = spec.L * spec.d;
      Eigen::MatrixXd W(rows, cols);
      const auto& wv = spec.params[0].values();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) W(i, j) = wv[i * cols + j];
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(W);
      result.value = svd.singularValues()(0);
      result.exact = true;
      return result;
    }
    case BackboneKind::seasonal_naive: {
      // selection matrix: spectral norm is sqrt of the max number of outputs
      // reading the same input entry
      auto idx = seasonal_gather_indices(spec);
      std::vector<std::size_t> count(spec.L * spec.d, 0);
      std::size_t maxc = 0;
      for (auto i : idx) maxc = std::max(maxc, ++count[i]);
      result.value = std::sqrt(static_cast<double>(maxc));
      result.exact = true;
      return result;
    }
    case BackboneKind::tiny_mlp: {
      // max over sampled inputs of the local spectral norm (power iteration
      // with jvp/vjp)
      Rng rng(Rng::mix(seed, 0x5eed));
      const std::size_t n_samples = 32;
      const std::size_t iters = 30;
      double best = 0.0;
      for (std::size_t s = 0; s < n_samples; ++s) {
        std::vector<double> xv(spec.L * spec.d);
        for (auto& x : xv) x = rng.gaussian();
        Tensor X = Tensor::from_values(std::move(xv), Shape{spec.L, spec.d});
        std::vector<double> vv(spec.L * spec.d);
        for (auto& x : vv) x = rng.gaussian();
        Tensor v = Tensor::from_values(std::move(vv), Shape{spec.L, spec.d});
        for (std::size_t it = 0; it < iters; ++it) {
          Tensor u = jvp(spec, X, v);
          if (l2_norm(u.values()) == 0.0) break;
          Tensor w = vjp(spec, X, u);
          double wn = l2_norm(w.values());
          if (wn == 0.0) break;
          std::vector<double> nv = w.values();
          for (auto& x : nv) x /= wn;
          v = Tensor::from_values(std::move(nv), Shape{spec.L, spec.d});
        }
        double sigma = l2_norm(jvp(spec, X, v).values()) /
                       std::max(l2_norm(v.values()), 1e-300);
        best = std::max(best, sigma);
      }
      result.value = best;
      result.exact = false;
      return result;
    }
    case BackboneKind::blackbox:
      throw BackboneError("operator_norm: unsupported for blackbox backbones");
  }
  throw BackboneError("operator_norm: unhandled kind");
}

ForecasterSpec make_linear_ar(std::size_t L, std::size_t d, std::size_t H,
                              const std::vector<std::size_t>& target_cols,
                              const std::vector<double>& W,
                              const std::vector<double>& b) {
  ForecasterSpec spec;
  spec.kind = BackboneKind::linear_ar;
  spec.L = L;
  spec.d = d;
  spec.H = H;
  spec.m = target_cols.size();
  spec.target_cols = target_cols;
  const std::size_t out_dim = H * spec.m;
  if (W.size() != out_dim * L * d || b.size() != out_dim) {
    throw DimensionError("make_linear_ar: parameter sizes do not match shapes");
  }
  spec.params.push_back(Tensor::from_values(W, Shape{out_dim, L * d}));
  spec.params.push_back(Tensor::from_values(b, Shape{out_dim}));
  spec.lipschitz_hint = operator_norm(spec).value;
  return spec;
}

ForecasterSpec make_seasonal_naive(std::size_t L, std::size_t d, std::size_t H,
                                   const std::vector<std::size_t>& target_cols,
                                   std::size_t period) {
  ForecasterSpec spec;
  spec.kind = BackboneKind::seasonal_naive;
  spec.L = L;
  spec.d = d;
  spec.H = H;
  spec.m = target_cols.size();
  spec.target_cols = target_cols;
  spec.fit_config.period = period;
  if (period == 0 || period > L) {
    throw ConfigError("seasonal_naive: period must be in [1, L]");
  }
  spec.lipschitz_hint = operator_norm(spec).value;
  return spec;
}

ForecasterSpec make_tiny_mlp(std::size_t L, std::size_t d, std::size_t H,
                             const std::vector<std::size_t>& target_cols,
                             std::size_t hidden, std::uint64_t seed) {
  ForecasterSpec spec;
  spec.kind = BackboneKind::tiny_mlp;
  spec.L = L;
  spec.d = d;
  spec.H = H;
  spec.m = target_cols.size();
  spec.target_cols = target_cols;
  spec.fit_config.mlp_hidden = hidden;
  Rng rng(seed);
  const std::size_t in_dim = L * d;
  const std::size_t out_dim = H * spec.m;
  spec.params.push_back(xavier_init(hidden, in_dim, rng, "w1").detached_copy());
  spec.params.push_back(Tensor::zeros(Shape{hidden}));
  spec.params.push_back(xavier_init(out_dim, hidden, rng, "w2").detached_copy());
  spec.params.push_back(Tensor::zeros(Shape{out_dim}));
  spec.lipschitz_hint = operator_norm(spec, seed).value;
  return spec;
}

ForecasterSpec make_blackbox(std::size_t L, std::size_t d, std::size_t H,
                             const std::vector<std::size_t>& target_cols,
                             BlackboxFn fn, double fd_step) {
  ForecasterSpec spec;
  spec.kind = BackboneKind::blackbox;
  spec.L = L;
  spec.d = d;
  spec.H = H;
  spec.m = target_cols.size();
  spec.target_cols = target_cols;
  spec.blackbox = std::move(fn);
  (void)fd_step;
  return spec;
}

ForecasterSpec periodic_selection_backbone(std::size_t L, std::size_t d,
                                           std::size_t H,
                                           const std::vector<std::size_t>& target_cols,
                                           std::size_t period,
                                           double output_offset) {
  const std::size_t m = target_cols.size();
  const std::size_t out_dim = H * m;
  const std::size_t in_dim = L * d;
  if (period == 0 || period > L) {
    throw ConfigError("periodic_selection_backbone: period must be in [1, L]");
  }
  std::vector<double> W(out_dim * in_dim, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    std::size_t row = L - period + (h % period);
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t o = h * m + k;
      W[o * in_dim + row * d + target_cols[k]] = 1.0;
    }
  }
  std::vector<double> b(out_dim, output_offset);
  return make_linear_ar(L, d, H, target_cols, W, b);
}

ForecasterSpec constant_backbone(std::size_t L, std::size_t d, std::size_t H,
                                 const std::vector<std::size_t>& target_cols,
                                 double value) {
  ForecasterSpec spec;
  spec.kind = BackboneKind::tiny_mlp;
  spec.L = L;
  spec.d = d;
  spec.H = H;
  spec.m = target_cols.size();
  spec.target_cols = target_cols;
  spec.fit_config.mlp_hidden = 1;
  const std::size_t out_dim = H * spec.m;
  spec.params.push_back(Tensor::zeros(Shape{1, L * d}));
  spec.params.push_back(Tensor::zeros(Shape{1}));
  spec.params.push_back(Tensor::zeros(Shape{out_dim, 1}));
  spec.params.push_back(Tensor::full(Shape{out_dim}, value));
  spec.lipschitz_hint = 0.0;
  return spec;
}

// ---- checkpoint I/O ----

std::string backbone_to_json(const ForecasterSpec& spec) {
  if (spec.kind == BackboneKind::blackbox) {
    throw CheckpointError("blackbox backbones cannot be checkpointed");
  }
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = backbone_kind_to_string(spec.kind);
  j["shapes"] = {{"L", spec.L}, {"d", spec.d}, {"H", spec.H}, {"m", spec.m},
                 {"target_cols", spec.target_cols}};
  if (spec.lipschitz_hint) j["lipschitz_hint"] = *spec.lipschitz_hint;
  j["fit_config"] = {{"ridge_lambda", spec.fit_config.ridge_lambda},
                     {"period", spec.fit_config.period},
                     {"mlp_hidden", spec.fit_config.mlp_hidden},
                     {"mlp_epochs", spec.fit_config.mlp_epochs},
                     {"mlp_batch", spec.fit_config.mlp_batch},
                     {"mlp_lr", spec.fit_config.mlp_lr},
                     {"seed", spec.fit_config.seed}};
  nlohmann::json arrays = nlohmann::json::array();
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& p : spec.params) {
    arrays.push_back(base64_encode_f64(p.values()));
    shapes.push_back(p.shape());
  }
  j["params"] = arrays;
  j["param_shapes"] = shapes;
  j["checksum"] = spec.checksum();
  return j.dump(2);
}

ForecasterSpec backbone_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("backbone checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw CheckpointError("unsupported backbone checkpoint format_version");
    }
    ForecasterSpec spec;
    spec.kind = backbone_kind_from_string(j.at("kind").get<std::string>());
    const auto& sh = j.at("shapes");
    spec.L = sh.at("L").get<std::size_t>();
    spec.d = sh.at("d").get<std::size_t>();
    spec.H = sh.at("H").get<std::size_t>();
    spec.m = sh.at("m").get<std::size_t>();
    spec.target_cols = sh.at("target_cols").get<std::vector<std::size_t>>();
    if (j.contains("lipschitz_hint")) spec.lipschitz_hint = j["lipschitz_hint"].get<double>();
    const auto& fc = j.at("fit_config");
    spec.fit_config.ridge_lambda = fc.at("ridge_lambda").get<double>();
    spec.fit_config.period = fc.at("period").get<std::size_t>();
    spec.fit_config.mlp_hidden = fc.at("mlp_hidden").get<std::size_t>();
    spec.fit_config.mlp_epochs = fc.at("mlp_epochs").get<std::size_t>();
    spec.fit_config.mlp_batch = fc.at("mlp_batch").get<std::size_t>();
    spec.fit_config.mlp_lr = fc.at("mlp_lr").get<double>();
    spec.fit_config.seed = fc.at("seed").get<std::uint64_t>();
    const auto& arrays = j.at("params");
    const auto& shapes = j.at("param_shapes");
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      auto values = base64_decode_f64(arrays[i].get<std::string>());
      auto shape = shapes[i].get<Shape>();
      spec.params.push_back(Tensor::from_values(std::move(values), std::move(shape)));
    }
    if (j.contains("checksum") &&
        j["checksum"].get<std::string>() != spec.checksum()) {
      throw CheckpointError("backbone checkpoint checksum mismatch");
    }
    return spec;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed backbone checkpoint: ") + e.what());
  }
}

void save_backbone(const ForecasterSpec& spec, const std::string& path) {
  write_text_file(path, backbone_to_json(spec));
}

ForecasterSpec load_backbone(const std::string& path) {
  return backbone_from_json(read_text_file(path));
}

}  // namespace dadapt
