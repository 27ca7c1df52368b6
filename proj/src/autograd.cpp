#include "sngan/autograd.hpp"

#include <algorithm>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "sngan/ops.hpp"

namespace sngan::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor& Var::leaf_value() {
  if (!node_ || !node_->is_leaf()) throw std::logic_error("leaf_value() on a non-leaf variable");
  return node_->value;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Tensor value, const char* op, std::vector<Var> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (g_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Var& v) { return v.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->inputs = std::move(inputs);
      node->backward = std::move(backward);
    }
  }
  return Var::from_node(std::move(node));
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, GradOptions options,
                      const Var& grad_output) {
  if (!output.defined()) throw std::invalid_argument("grad(): undefined output");
  if (output.node()->consumed)
    throw GraphConsumedError(
        "backward through a computation record that was already consumed; "
        "pass retain_graph to differentiate it more than once");
  if (!grad_output.defined() && output.value().size() != 1)
    throw ShapeError("grad(): implicit gradient requires a single-element output, got " +
                     to_string(output.shape()));
  if (options.create_graph) options.retain_graph = true;

  // Topological order (inputs before consumers) over nodes that require grad.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  if (output.requires_grad()) {
    std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
    visited.insert(output.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node* child = node->inputs[next++].node();
        if (child && child->requires_grad && visited.insert(child).second)
          stack.emplace_back(child, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_set<Node*> targets;
  for (const auto& v : inputs)
    if (v.defined()) targets.insert(v.node());

  // A node is needed when some target is reachable through it.
  std::unordered_map<Node*, bool> needed;
  for (Node* node : order) {
    bool n = targets.count(node) > 0;
    for (const auto& in : node->inputs)
      if (in.requires_grad() && needed[in.node()]) n = true;
    needed[node] = n;
  }

  std::unordered_map<Node*, Var> grads;
  {
    std::optional<NoGradGuard> guard;
    if (!options.create_graph) guard.emplace();

    if (!order.empty() && needed[output.node()]) {
      grads[output.node()] =
          grad_output.defined() ? grad_output : Var(Tensor(output.shape(), 1.0f));
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      auto found = grads.find(node);
      if (found == grads.end() || node->is_leaf()) continue;
      if (node->consumed) throw GraphConsumedError("computation record already consumed");
      std::vector<bool> needs(node->inputs.size());
      bool any = false;
      for (std::size_t i = 0; i < needs.size(); ++i) {
        needs[i] = node->inputs[i].requires_grad() && needed[node->inputs[i].node()];
        any = any || needs[i];
      }
      if (!any) continue;
      const Var g = found->second;
      if (!targets.count(node)) grads.erase(found);
      auto in_grads = node->backward(*node, g, needs);
      for (std::size_t i = 0; i < needs.size(); ++i) {
        if (!needs[i] || !in_grads[i].defined()) continue;
        Node* child = node->inputs[i].node();
        auto slot = grads.find(child);
        if (slot == grads.end())
          grads.emplace(child, in_grads[i]);
        else
          slot->second = add(slot->second, in_grads[i]);
      }
    }
  }

  if (!options.retain_graph) {
    for (Node* node : order) {
      if (node->is_leaf()) continue;
      node->consumed = true;
      node->inputs.clear();
      // Keep the node distinguishable from a leaf after release.
      node->backward = [](const Node&, const Var&, const std::vector<bool>&) -> std::vector<Var> {
        throw GraphConsumedError("computation record already consumed");
      };
    }
  }

  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const auto& v : inputs) {
    auto it = v.defined() ? grads.find(v.node()) : grads.end();
    if (it != grads.end())
      result.push_back(it->second);
    else
      result.push_back(Var(Tensor(v.shape(), 0.0f)));
  }
  return result;
}

}  // namespace sngan::nn
