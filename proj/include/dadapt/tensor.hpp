#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dadapt/errors.hpp"

namespace dadapt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// When enabled, every tensor creation and every op result is scanned for
// NaN/Inf and rejected with a NumericError. On by default.
void set_checked_mode(bool on);
bool checked_mode();

struct TensorNode {
  std::vector<double> value;
  std::vector<double> grad;  // empty until the backward pass touches it
  Shape shape;
  bool requires_grad = false;
  std::string name;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Value-semantic handle to a shared node. Copies alias the same storage;
// tensors with requires_grad=false are treated as immutable once built.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from_values(std::vector<double> values, Shape shape,
                            bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  // 2-D constructor from rows
  static Tensor matrix(const std::vector<std::vector<double>>& rows,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const;
  // 2-D accessors
  std::size_t rows() const;
  std::size_t cols() const;
  double operator()(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  double item() const;  // scalar tensors only
  double value_at(std::size_t i) const;
  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();  // leaves only (optimizer updates)

  bool has_grad() const;
  const std::vector<double>& grad() const;
  std::vector<double>& mutable_grad();
  void zero_grad();

  void set_name(std::string n);
  const std::string& name() const;

  Tensor detached_copy(bool requires_grad = false) const;

  std::shared_ptr<TensorNode> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;
};

// Reverse-mode tape. Constructing a Tape makes it the active tape for the
// current thread (stack discipline); ops record backward closures onto it
// whenever an input requires grad. backward() replays the closures in
// reverse creation order and then clears the tape, so a later forward pass
// starts from an empty tape.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void backward(const Tensor& loss);
  std::size_t node_count() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  static Tape* active();
  void record(std::function<void()> op) { ops_.push_back(std::move(op)); }

 private:
  std::vector<std::function<void()>> ops_;
  Tape* prev_ = nullptr;
};

void check_finite(const std::vector<double>& v, const char* what);

}  // namespace dadapt
