#include "dadapt/mlp.hpp"

#include <cmath>

#include "dadapt/errors.hpp"
#include "dadapt/ops.hpp"

namespace dadapt {

Tensor xavier_init(std::size_t rows, std::size_t cols, Rng& rng,
                   const std::string& name) {
  double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-a, a);
  Tensor t = Tensor::from_values(std::move(v), Shape{rows, cols}, true);
  t.set_name(name);
  return t;
}

Mlp::Mlp(const MlpConfig& cfg, Rng& rng, const std::string& prefix) : cfg_(cfg) {
  if (cfg.in_dim == 0 || cfg.out_dim == 0) {
    throw ConfigError("mlp: in_dim and out_dim must be positive");
  }
  std::size_t in = cfg.in_dim;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    weights_.push_back(
        xavier_init(cfg.hidden, in, rng, prefix + ".w" + std::to_string(l)));
    Tensor b = Tensor::zeros(Shape{cfg.hidden}, true);
    b.set_name(prefix + ".b" + std::to_string(l));
    biases_.push_back(b);
    in = cfg.hidden;
  }
  Tensor wh = cfg.zero_init_head
                  ? Tensor::zeros(Shape{cfg.out_dim, in}, true)
                  : xavier_init(cfg.out_dim, in, rng, prefix + ".w_head");
  wh.set_name(prefix + ".w_head");
  weights_.push_back(wh);
  Tensor bh = Tensor::zeros(Shape{cfg.out_dim}, true);
  bh.set_name(prefix + ".b_head");
  biases_.push_back(bh);
}

Tensor Mlp::hidden_features(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    h = tanh(add(matvec(weights_[l], h), biases_[l]));
  }
  return h;
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = hidden_features(x);
  return add(matvec(weights_.back(), h), biases_.back());
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> ps;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    ps.push_back(weights_[i]);
    ps.push_back(biases_[i]);
  }
  return ps;
}

std::vector<std::vector<double>> Mlp::export_params() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : parameters()) out.push_back(p.values());
  return out;
}

void Mlp::import_params(const std::vector<std::vector<double>>& arrays) {
  auto ps = parameters();
  if (arrays.size() != ps.size()) {
    throw CheckpointError("mlp: parameter count mismatch on import");
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (arrays[i].size() != ps[i].size()) {
      throw CheckpointError("mlp: parameter size mismatch on import");
    }
    ps[i].mutable_values() = arrays[i];
  }
}

LinearHead::LinearHead(std::size_t in_dim, std::size_t out_dim, bool zero_init,
                       Rng& rng, const std::string& name) {
  w_ = zero_init ? Tensor::zeros(Shape{out_dim, in_dim}, true)
                 : xavier_init(out_dim, in_dim, rng, name + ".w");
  w_.set_name(name + ".w");
  b_ = Tensor::zeros(Shape{out_dim}, true);
  b_.set_name(name + ".b");
}

Tensor LinearHead::forward(const Tensor& x) const {
  return add(matvec(w_, x), b_);
}

std::vector<Tensor> LinearHead::parameters() const { return {w_, b_}; }

std::vector<std::vector<double>> LinearHead::export_params() const {
  return {w_.values(), b_.values()};
}

void LinearHead::import_params(const std::vector<std::vector<double>>& arrays) {
  if (arrays.size() != 2 || arrays[0].size() != w_.size() ||
      arrays[1].size() != b_.size()) {
    throw CheckpointError("linear head: parameter mismatch on import");
  }
  w_.mutable_values() = arrays[0];
  b_.mutable_values() = arrays[1];
}

}  // namespace dadapt
