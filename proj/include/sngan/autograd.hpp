#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "sngan/tensor.hpp"

namespace sngan::nn {

class Var;
struct Node;

/// Backward rule of a recorded op: maps the gradient of the op's output to
/// gradients of its inputs. `needs[i]` is false for inputs whose gradient
/// is not required; the rule may return an undefined Var for those. Rules
/// are written in terms of differentiable ops, so with grad mode enabled
/// they record a graph of their own (double backward).
using BackwardFn =
    std::function<std::vector<Var>(const Node& self, const Var& grad, const std::vector<bool>& needs)>;

struct Node {
  Tensor value;
  bool requires_grad = false;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<Var> inputs;
  BackwardFn backward;

  bool is_leaf() const { return !backward; }
};

/// Handle to a node of the computation record. Cheap to copy.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  Node* node() const noexcept { return node_.get(); }

  /// In-place access for leaves only (optimizer updates, checkpoint restore).
  Tensor& leaf_value();

  static Var from_node(std::shared_ptr<Node> node) {
    Var v;
    v.node_ = std::move(node);
    return v;
  }

 private:
  std::shared_ptr<Node> node_;
};

class GraphConsumedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

bool grad_enabled() noexcept;

/// Disables recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates the result of an op. Records the backward rule only when grad mode
/// is on and some input requires grad.
Var make_result(Tensor value, const char* op, std::vector<Var> inputs, BackwardFn backward);

struct GradOptions {
  /// Record the backward pass itself so its result can be differentiated.
  bool create_graph = false;
  /// Keep the record alive after the pass. Implied by create_graph.
  bool retain_graph = false;
};

/// Gradients of `output` with respect to each of `inputs`. `output` must be a
/// single element unless `grad_output` is given. Inputs the output does not
/// depend on receive zeros. Without retain_graph the record is released and a
/// second pass over it throws GraphConsumedError.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, GradOptions options = {},
                      const Var& grad_output = {});

}  // namespace sngan::nn
