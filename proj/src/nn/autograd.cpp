#include "pauie/nn/autograd.hpp"

#include <sstream>
#include <unordered_set>

namespace pauie::nn {

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("reshape " + shape_string(shape_) + " -> " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor& Node::grad_buffer() {
  if (grad.numel() != value.numel()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

const Tensor& Var::grad() const { return node_->grad_buffer(); }

double Var::item() const {
  if (value().numel() != 1) throw DimensionError("item() on a tensor of " + shape_string(shape()));
  return value()[0];
}

namespace {
thread_local bool g_grad_enabled = true;
thread_local BranchPin* g_pin = nullptr;
}  // namespace

BranchPin::BranchPin() : previous_(g_pin) { g_pin = this; }
BranchPin::~BranchPin() { g_pin = previous_; }

void BranchPin::rewind() {
  replaying_ = true;
  cursor_ = 0;
}

std::size_t BranchPin::take(std::size_t current) {
  BranchPin* pin = g_pin;
  if (!pin) return current;
  if (!pin->replaying_) {
    pin->taken_.push_back(current);
    return current;
  }
  if (pin->cursor_ >= pin->taken_.size()) throw DimensionError("BranchPin: replay ran past the recorded pass");
  return pin->taken_[pin->cursor_++];
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  Var out(std::move(value));
  if (!g_grad_enabled) return out;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (!needs) return out;
  Node* node = out.node();
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.shared());
  node->backward = std::move(backward);
  return out;
}

Var detach(const Var& v) { return Var(v.value()); }

void backward(const Var& loss) {
  if (loss.value().numel() != 1) throw DimensionError("backward: loss must be a scalar");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.numel() == n->value.numel()) n->backward(*n);
  }
}

}  // namespace pauie::nn
