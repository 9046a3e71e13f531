#include "dadapt/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace dadapt {

namespace {
std::atomic<bool> g_checked{true};
thread_local Tape* t_active_tape = nullptr;
}  // namespace

void set_checked_mode(bool on) { g_checked.store(on); }
bool checked_mode() { return g_checked.load(); }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void check_finite(const std::vector<double>& v, const char* what) {
  if (!checked_mode()) return;
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value in ") + what);
    }
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value.assign(shape_numel(n->shape), 0.0);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value.assign(shape_numel(n->shape), fill);
  n->requires_grad = requires_grad;
  check_finite(n->value, "tensor creation");
  return Tensor(std::move(n));
}

Tensor Tensor::from_values(std::vector<double> values, Shape shape,
                           bool requires_grad) {
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
  }
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  check_finite(n->value, "tensor creation");
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_values({v}, Shape{1}, requires_grad);
}

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows,
                      bool requires_grad) {
  if (rows.empty()) throw DimensionError("matrix: no rows");
  std::size_t c = rows[0].size();
  std::vector<double> flat;
  flat.reserve(rows.size() * c);
  for (const auto& r : rows) {
    if (r.size() != c) throw DimensionError("matrix: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return from_values(std::move(flat), Shape{rows.size(), c}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::size_t Tensor::rank() const { return node_->shape.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is not 2-D");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is not 2-D");
  return node_->shape[1];
}

double Tensor::operator()(std::size_t r, std::size_t c) const {
  return node_->value[r * cols() + c];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item(): tensor has " + std::to_string(size()) +
                        " elements, expected a scalar");
  }
  return node_->value[0];
}

double Tensor::value_at(std::size_t i) const { return node_->value[i]; }
const std::vector<double>& Tensor::values() const { return node_->value; }
std::vector<double>& Tensor::mutable_values() { return node_->value; }

bool Tensor::has_grad() const {
  return node_ && node_->grad.size() == node_->value.size();
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    throw ContractError("grad(): no gradient available for tensor '" +
                        node_->name + "'");
  }
  return node_->grad;
}

std::vector<double>& Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::set_name(std::string n) { node_->name = std::move(n); }
const std::string& Tensor::name() const { return node_->name; }

Tensor Tensor::detached_copy(bool requires_grad) const {
  return from_values(node_->value, node_->shape, requires_grad);
}

Tape::Tape() {
  prev_ = t_active_tape;
  t_active_tape = this;
}

Tape::~Tape() { t_active_tape = prev_; }

Tape* Tape::active() { return t_active_tape; }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar tensor");
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss does not depend on any parameter");
  }
  auto node = loss.node();
  node->ensure_grad();
  node->grad[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  ops_.clear();
}

}  // namespace dadapt
