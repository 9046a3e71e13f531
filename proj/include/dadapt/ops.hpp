#pragma once

#include <vector>

#include "dadapt/tensor.hpp"

namespace dadapt {

// Differentiable ops. Each records its backward closure on the active tape
// when some input requires grad. Binary ops broadcast scalar-vs-tensor and
// equal shapes only.

Tensor matmul(const Tensor& a, const Tensor& b);     // [p x q] * [q x s]
Tensor matvec(const Tensor& w, const Tensor& x);     // [p x q] * [q]

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);  // overflow-safe: max(x,0) + log1p(exp(-|x|))
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
Tensor dot(const Tensor& a, const Tensor& b);

Tensor concat(const std::vector<Tensor>& parts);  // 1-D concatenation
Tensor reshape(const Tensor& a, Shape shape);
// out[i] = a[idx[i]]; backward scatter-adds
Tensor gather(const Tensor& a, const std::vector<std::size_t>& idx, Shape out_shape);

// Forward: 1{a > thresh}. Backward: identity pass-through (straight-through
// estimator), so upstream gradient reaches the soft input unchanged.
Tensor straight_through_threshold(const Tensor& a, double thresh = 0.5);

// scalar helpers on raw values
double l2_norm(const std::vector<double>& v);
double linf_norm(const std::vector<double>& v);

}  // namespace dadapt
