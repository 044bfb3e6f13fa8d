#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcct {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Raised by every op whose operands have incompatible dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward_fn;

  double* ensure_grad();
  bool is_leaf() const { return !backward_fn; }
};

}  // namespace detail

// Reference-semantics handle to a node in the differentiation graph.
// Copies share storage; use clone() for an independent leaf.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Mutable access is intended for leaves (parameters, inputs under test).
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t flat) const { return values()[flat]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  // Zero-filled view when no gradient has been accumulated yet.
  std::vector<double> grad_or_zero() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Reverse-mode sweep from a scalar; accumulates into every reachable
  // requires_grad leaf. Intermediate gradients are released afterwards.
  void backward() const;

  Tensor detach() const;
  Tensor clone() const;

  const char* op_name() const;
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Builds a result node; the graph edge is dropped when no parent needs a
// gradient or recording is disabled.
Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                   std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward_fn);

bool grad_enabled();

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace tcct
