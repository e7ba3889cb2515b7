#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <string_view>
#include <vector>

#include "hypercaps/numerics/tensor.hpp"

namespace hypercaps::numerics {

template <typename T>
class Tape;

// Handle to a value recorded on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
};

// Row-indexed gradient for parameters read through gather_rows.
template <typename T>
using SparseRows = std::map<std::size_t, std::vector<T>>;

template <typename T>
struct TapeNode {
  using Backward = std::function<void(Tape<T>&, std::size_t)>;

  std::string_view op;
  std::vector<std::size_t> inputs;
  Tensor<T> owned;
  const Tensor<T>* external = nullptr;
  Tensor<T> grad;
  SparseRows<T> row_grad;
  Backward backward;
  bool requires_grad = false;
  bool sparse_rows = false;

  const Tensor<T>& value() const { return external ? *external : owned; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// creation order is a valid topological order for the backward pass.
// One tape per worker; not thread-safe.
template <typename T>
class Tape {
 public:
  using Backward = typename TapeNode<T>::Backward;

  Var<T> constant(Tensor<T> value) { return leaf("constant", std::move(value), nullptr, false, false); }
  Var<T> variable(Tensor<T> value) { return leaf("variable", std::move(value), nullptr, true, false); }

  // Leaf that reads `value` in place; it must outlive the tape. With
  // `sparse_rows`, gradients from gather_rows are kept per row.
  Var<T> parameter(const Tensor<T>& value, bool sparse_rows = false) {
    return leaf("parameter", Tensor<T>{}, &value, true, sparse_rows);
  }

  // Constant leaf that reads `value` in place.
  Var<T> reference(const Tensor<T>& value) { return leaf("reference", Tensor<T>{}, &value, false, false); }

  Var<T> record(std::string_view op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                Backward backward) {
    return record(op, std::move(value), std::vector<Var<T>>(inputs), std::move(backward));
  }

  Var<T> record(std::string_view op, Tensor<T> value, const std::vector<Var<T>>& inputs,
                Backward backward) {
    TapeNode<T> node;
    node.op = op;
    node.owned = std::move(value);
    node.inputs.reserve(inputs.size());
    for (const auto& in : inputs) {
      check_owner(in);
      node.inputs.push_back(in.id);
      node.requires_grad = node.requires_grad || nodes_[in.id].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var<T>{this, nodes_.size() - 1};
  }

  const Tensor<T>& value(Var<T> v) const { return nodes_.at(v.id).value(); }
  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value(); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool sparse_rows(std::size_t id) const { return nodes_[id].sparse_rows; }
  std::size_t size() const { return nodes_.size(); }
  const TapeNode<T>& node(std::size_t id) const { return nodes_.at(id); }

  // Gradient accumulated so far; zeros if the node received none.
  Tensor<T> grad(Var<T> v) const {
    const auto& n = nodes_.at(v.id);
    if (!n.grad.empty()) return n.grad;
    return Tensor<T>(n.value().shape());
  }

  const SparseRows<T>& row_grad(Var<T> v) const { return nodes_.at(v.id).row_grad; }

  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  // Mutable gradient buffer, allocated on first touch.
  Tensor<T>& grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value().shape());
    return n.grad;
  }

  std::vector<T>& row_grad_buffer(std::size_t id, std::size_t row) {
    auto& n = nodes_[id];
    auto [it, inserted] = n.row_grad.try_emplace(row);
    if (inserted) it->second.assign(n.value().cols(), T{0});
    return it->second;
  }

  // Seeds d(root)/d(root) = 1 and propagates to every node that requires
  // gradients. The root must hold exactly one value.
  void backward(Var<T> root) {
    check_owner(root);
    if (value(root).size() != 1) {
      throw DimensionError("backward root must be a scalar, got shape " +
                           shape_to_string(value(root).shape()));
    }
    grad_buffer(root.id)[0] += T{1};
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(*this, i);
    }
  }

  void zero_grad() {
    for (auto& n : nodes_) {
      n.grad = Tensor<T>{};
      n.row_grad.clear();
    }
  }

 private:
  Var<T> leaf(std::string_view op, Tensor<T> value, const Tensor<T>* external, bool requires_grad,
              bool sparse) {
    TapeNode<T> node;
    node.op = op;
    node.owned = std::move(value);
    node.external = external;
    node.requires_grad = requires_grad;
    node.sparse_rows = sparse;
    nodes_.push_back(std::move(node));
    return Var<T>{this, nodes_.size() - 1};
  }

  void check_owner(Var<T> v) const {
    if (v.tape != this || v.id >= nodes_.size()) {
      throw std::invalid_argument("variable does not belong to this tape");
    }
  }

  std::vector<TapeNode<T>> nodes_;
};

}  // namespace hypercaps::numerics
