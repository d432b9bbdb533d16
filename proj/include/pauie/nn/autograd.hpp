#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pauie/nn/tensor.hpp"

// Minimal tape-free reverse-mode differentiation. Each op result keeps its
// parents and a closure that scatters the result's gradient into them; the
// graph is released when the last Var handle goes away.
namespace pauie::nn {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialized to the value's shape on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t i) const { return node_->value.dim(i); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Gradient after backward(); an all-zero tensor if none flowed here.
  const Tensor& grad() const;
  void zero_grad() { node_->grad = Tensor(); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

  /// Scalar value of a single-element Var.
  double item() const;

 private:
  std::shared_ptr<Node> node_;
};

/// Whether new op results record their parents. Thread-local.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Pins the branch of every piecewise op (ReLU, max pool, transmission floor):
// the first forward pass after construction records which branch each element
// took, later passes replay those choices instead of re-deciding. Repeated
// evaluations near a point then stay on that point's linear piece, which is
// what a finite-difference derivative needs. Thread-local, one at a time.
class BranchPin {
 public:
  BranchPin();
  ~BranchPin();
  BranchPin(const BranchPin&) = delete;
  BranchPin& operator=(const BranchPin&) = delete;

  /// Ends recording (on the first call) and rewinds to the first choice.
  void rewind();

  /// Branch for the next decision point; `current` is what the op would pick.
  static std::size_t take(std::size_t current);

 private:
  std::vector<std::size_t> taken_;
  std::size_t cursor_ = 0;
  bool replaying_ = false;
  BranchPin* previous_;
};

/// Builds an op result. The closure runs only if some parent requires grad.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

/// Value copy that is cut from the graph.
Var detach(const Var& v);

/// Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf.
void backward(const Var& loss);

}  // namespace pauie::nn
