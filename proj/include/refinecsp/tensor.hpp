#pragma once

// Dense row-major float64 tensors with a tape-based reverse-mode autodiff.
//
// Operations record themselves on the tape that is active on the calling
// thread (see TapeScope) whenever at least one input requires a gradient.
// Without an active tape every op is a plain forward computation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "refinecsp/rng.hpp"

namespace refinecsp::nd {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until the node receives a gradient
  bool requires_grad = false;
  std::uint64_t id = 0;

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);
  /// Leaf tensor that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return size() == 1; }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  /// Empty span when no gradient has reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();
  bool requires_grad() const { return node_->requires_grad; }
  std::uint64_t node_id() const { return node_->id; }

  /// Detached copy: same values, no gradient history.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_result(Shape shape, std::vector<double> values);
};

Tensor make_result(Shape shape, std::vector<double> values);

class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(std::vector<std::shared_ptr<Node>> inputs,
              std::shared_ptr<Node> output, BackwardFn backward);

  /// Propagates d(loss)/d(node) to every node reachable from loss.
  void backward(const Tensor& loss);

  std::size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

 private:
  struct Op {
    std::vector<std::shared_ptr<Node>> inputs;
    std::shared_ptr<Node> output;
    BackwardFn backward;
  };
  std::vector<Op> ops_;
};

/// Makes `tape` the active tape of the current thread for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Disables recording on the current thread for its lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Elementwise. Binary ops take equal shapes or a scalar on either side.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor softplus(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Entries equal to -inf map to exactly 0.
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor reduce_sum(const Tensor& a, std::size_t axis);
Tensor sum_all(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);

/// x[m x n] + b[n] on every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// Row-wise normalization with affine gain/shift of width n.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift,
                  double eps = 1e-5);
/// Inverted dropout; identity unless `training`.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

void backward(const Tensor& loss);

struct GradCheckReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<double> relative_error;
  double max_relative_error = 0.0;
  std::vector<std::size_t> failures;
  bool passed = true;
};

/// Compares analytic gradients against central differences. Relative error
/// is |a - n| / max(|a|, |n|, floor) so exactly-zero gradients are judged on
/// an absolute scale.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& x, double eps = 1e-5,
                           double tol = 1e-4, double floor = 1e-3);

}  // namespace refinecsp::nd
