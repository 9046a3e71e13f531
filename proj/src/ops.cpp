#include "dadapt/ops.hpp"

#include <cmath>
#include <cstddef>

namespace dadapt {

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

Tensor make_result(std::vector<double> values, Shape shape, bool requires_grad,
                   const char* op_name) {
  Tensor out = Tensor::from_values(std::move(values), std::move(shape), requires_grad);
  check_finite(out.values(), op_name);
  return out;
}

bool tape_on(bool any_rg) { return any_rg && Tape::active() != nullptr; }

// elementwise unary with local derivative computed from (x, y)
template <typename Fwd, typename Dfn>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Dfn dfn) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  bool rg = a.requires_grad();
  Tensor out = make_result(std::move(y), a.shape(), rg, name);
  if (tape_on(rg)) {
    NodePtr an = a.node(), on = out.node();
    Tape::active()->record([an, on, dfn]() {
      if (on->grad.empty()) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < an->value.size(); ++i) {
        an->grad[i] += on->grad[i] * dfn(an->value[i], on->value[i]);
      }
    });
  }
  return out;
}

enum class BinKind { equal, a_scalar, b_scalar };

BinKind bin_kind(const Tensor& a, const Tensor& b, const char* name) {
  if (a.shape() == b.shape()) return BinKind::equal;
  if (a.size() == 1) return BinKind::a_scalar;
  if (b.size() == 1) return BinKind::b_scalar;
  throw DimensionError(std::string(name) + ": incompatible shapes " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double linf_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::fabs(x));
  return s;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  }
  const std::size_t p = a.rows(), q = a.cols(), s = b.cols();
  std::vector<double> y(p * s, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < q; ++k) {
      double aik = av[i * q + k];
      for (std::size_t j = 0; j < s; ++j) y[i * s + j] += aik * bv[k * s + j];
    }
  }
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = make_result(std::move(y), Shape{p, s}, rg, "matmul");
  if (tape_on(rg)) {
    NodePtr an = a.node(), bn = b.node(), on = out.node();
    Tape::active()->record([an, bn, on, p, q, s]() {
      if (on->grad.empty()) return;
      const auto& g = on->grad;
      if (an->requires_grad) {
        an->ensure_grad();
        // dA += G * B^T
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < s; ++j)
              acc += g[i * s + j] * bn->value[k * s + j];
            an->grad[i * q + k] += acc;
          }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        // dB += A^T * G
        for (std::size_t k = 0; k < q; ++k)
          for (std::size_t j = 0; j < s; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < p; ++i)
              acc += an->value[i * q + k] * g[i * s + j];
            bn->grad[k * s + j] += acc;
          }
      }
    });
  }
  return out;
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.cols() != x.size()) {
    throw DimensionError("matvec: " + shape_str(w.shape()) + " * " +
                         shape_str(x.shape()));
  }
  const std::size_t p = w.rows(), q = w.cols();
  std::vector<double> y(p, 0.0);
  const auto& wv = w.values();
  const auto& xv = x.values();
  for (std::size_t i = 0; i < p; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < q; ++k) acc += wv[i * q + k] * xv[k];
    y[i] = acc;
  }
  bool rg = w.requires_grad() || x.requires_grad();
  Tensor out = make_result(std::move(y), Shape{p}, rg, "matvec");
  if (tape_on(rg)) {
    NodePtr wn = w.node(), xn = x.node(), on = out.node();
    Tape::active()->record([wn, xn, on, p, q]() {
      if (on->grad.empty()) return;
      const auto& g = on->grad;
      if (wn->requires_grad) {
        wn->ensure_grad();
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k)
            wn->grad[i * q + k] += g[i] * xn->value[k];
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (std::size_t k = 0; k < q; ++k) {
          double acc = 0.0;
          for (std::size_t i = 0; i < p; ++i) acc += wn->value[i * q + k] * g[i];
          xn->grad[k] += acc;
        }
      }
    });
  }
  return out;
}

namespace {

// shared implementation for add/sub/mul/div with the two broadcast cases
template <typename Fwd, typename DaFn, typename DbFn>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 DaFn da_fn, DbFn db_fn) {
  BinKind kind = bin_kind(a, b, name);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::size_t n = std::max(av.size(), bv.size());
  Shape out_shape = (kind == BinKind::a_scalar) ? b.shape() : a.shape();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double xa = (kind == BinKind::a_scalar) ? av[0] : av[i];
    double xb = (kind == BinKind::b_scalar) ? bv[0] : bv[i];
    y[i] = fwd(xa, xb);
  }
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = make_result(std::move(y), out_shape, rg, name);
  if (tape_on(rg)) {
    NodePtr an = a.node(), bn = b.node(), on = out.node();
    Tape::active()->record([an, bn, on, kind, n, da_fn, db_fn]() {
      if (on->grad.empty()) return;
      const auto& g = on->grad;
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          double xa = (kind == BinKind::a_scalar) ? an->value[0] : an->value[i];
          double xb = (kind == BinKind::b_scalar) ? bn->value[0] : bn->value[i];
          double d = g[i] * da_fn(xa, xb);
          an->grad[(kind == BinKind::a_scalar) ? 0 : i] += d;
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          double xa = (kind == BinKind::a_scalar) ? an->value[0] : an->value[i];
          double xb = (kind == BinKind::b_scalar) ? bn->value[0] : bn->value[i];
          double d = g[i] * db_fn(xa, xb);
          bn->grad[(kind == BinKind::b_scalar) ? 0 : i] += d;
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op(
      a, "add_scalar", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return unary_op(
      a, "mul_scalar", [c](double x) { return x * c; },
      [c](double, double) { return c; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, "sigmoid",
      [](double x) {
        return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a, "softplus",
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); },
      [](double x, double) {
        return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
      });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      a, "abs", [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  bool rg = a.requires_grad();
  Tensor out = make_result({s}, Shape{1}, rg, "sum");
  if (tape_on(rg)) {
    NodePtr an = a.node(), on = out.node();
    Tape::active()->record([an, on]() {
      if (on->grad.empty()) return;
      an->ensure_grad();
      for (auto& g : an->grad) g += on->grad[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean: empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: size mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  return sum(mul(a, b));
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  std::vector<double> y;
  bool rg = false;
  for (const auto& p : parts) {
    y.insert(y.end(), p.values().begin(), p.values().end());
    rg = rg || p.requires_grad();
  }
  Shape out_shape{y.size()};
  Tensor out = make_result(std::move(y), std::move(out_shape), rg, "concat");
  if (tape_on(rg)) {
    std::vector<NodePtr> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) nodes.push_back(p.node());
    NodePtr on = out.node();
    Tape::active()->record([nodes, on]() {
      if (on->grad.empty()) return;
      std::size_t off = 0;
      for (const auto& pn : nodes) {
        if (pn->requires_grad) {
          pn->ensure_grad();
          for (std::size_t i = 0; i < pn->value.size(); ++i)
            pn->grad[i] += on->grad[off + i];
        }
        off += pn->value.size();
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " +
                         shape_str(shape));
  }
  bool rg = a.requires_grad();
  Tensor out = make_result(a.values(), std::move(shape), rg, "reshape");
  if (tape_on(rg)) {
    NodePtr an = a.node(), on = out.node();
    Tape::active()->record([an, on]() {
      if (on->grad.empty()) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < an->value.size(); ++i)
        an->grad[i] += on->grad[i];
    });
  }
  return out;
}

Tensor gather(const Tensor& a, const std::vector<std::size_t>& idx,
              Shape out_shape) {
  if (shape_numel(out_shape) != idx.size()) {
    throw DimensionError("gather: index count does not match output shape");
  }
  std::vector<double> y(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= a.size()) throw DimensionError("gather: index out of range");
    y[i] = a.values()[idx[i]];
  }
  bool rg = a.requires_grad();
  Tensor out = make_result(std::move(y), std::move(out_shape), rg, "gather");
  if (tape_on(rg)) {
    NodePtr an = a.node(), on = out.node();
    auto indices = idx;
    Tape::active()->record([an, on, indices]() {
      if (on->grad.empty()) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < indices.size(); ++i)
        an->grad[indices[i]] += on->grad[i];
    });
  }
  return out;
}

Tensor straight_through_threshold(const Tensor& a, double thresh) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > thresh ? 1.0 : 0.0;
  bool rg = a.requires_grad();
  Tensor out = make_result(std::move(y), a.shape(), rg, "straight_through");
  if (tape_on(rg)) {
    NodePtr an = a.node(), on = out.node();
    Tape::active()->record([an, on]() {
      if (on->grad.empty()) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < an->value.size(); ++i)
        an->grad[i] += on->grad[i];
    });
  }
  return out;
}

}  // namespace dadapt
