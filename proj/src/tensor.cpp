#include "tcct/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace tcct {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

double* detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::values() const {
  if (!node_) throw std::logic_error("undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw std::logic_error("undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw std::logic_error("undefined tensor");
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::vector<double> Tensor::grad_or_zero() const {
  if (has_grad()) return node_->grad;
  return std::vector<double>(numel(), 0.0);
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor has no gradient");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) throw std::logic_error("undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_) return;
  node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::backward() const {
  if (!node_) throw std::logic_error("backward on undefined tensor");
  if (numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the graph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->is_leaf()) continue;
    if (!node->grad.empty()) node->backward_fn(*node);
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

Tensor Tensor::detach() const {
  Tensor out(shape(), node_->value, false);
  return out;
}

Tensor Tensor::clone() const {
  Tensor out(shape(), node_->value, requires_grad());
  return out;
}

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                   std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward_fn) {
  Tensor out(std::move(shape), std::move(values), false);
  if (!g_grad_enabled) return out;
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.op = op;
  node.parents.reserve(parents.size());
  for (auto& p : parents) node.parents.push_back(p.node());
  node.backward_fn = std::move(backward_fn);
  return out;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace tcct
