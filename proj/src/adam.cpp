#include "dadapt/adam.hpp"

#include <cmath>

#include "dadapt/errors.hpp"

namespace dadapt {

AdamState::AdamState(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamState::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    if (!p.has_grad()) continue;  // no gradient reached this parameter
    auto& g = p.mutable_grad();
    auto& val = p.mutable_values();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < val.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw TrainingError("adam: NaN/Inf gradient in parameter '" +
                            (p.name().empty() ? std::string("<unnamed>") : p.name()) +
                            "'");
      }
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      val[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.zero_grad();
  }
}

}  // namespace dadapt
