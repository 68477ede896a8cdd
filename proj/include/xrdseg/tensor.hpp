#pragma once

#include <xrdseg/common.hpp>

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace xrdseg {

// Dense (N, C, H, W) extents, row-major storage order.
struct Shape4 {
  Index n = 0, c = 0, h = 0, w = 0;

  Index numel() const { return n * c * h * w; }
  bool operator==(const Shape4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape4& o) const { return !(*this == o); }

  std::string str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
  }
};

// Dense 4-D tensor with optional participation in a reverse-mode gradient
// tape. A Tensor is a handle onto a shared node; ops build fresh nodes whose
// backprop closures scatter incoming gradients to their parents. Values are
// written once by the op that creates them; only leaf tensors (parameters)
// are mutated in place, by the optimizer, between tapes.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  static Tensor zeros(Shape4 shape, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = shape;
    t.node_->data = Storage::Zero(shape.numel());
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(Shape4 shape, Scalar value, bool requires_grad = false) {
    Tensor t = zeros(shape, requires_grad);
    t.node_->data.setConstant(value);
    return t;
  }

  static Tensor from_data(Shape4 shape, Storage data, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = shape;
    if (data.size() != shape.numel()) {
      throw DataError("tensor data length " + std::to_string(data.size()) +
                      " does not match shape " + shape.str());
    }
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape4& shape() const { return node_->shape; }
  Index numel() const { return node_->shape.numel(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  const Storage& values() const { return node_->data; }
  // In-place access for leaves (init, optimizer updates, test setup).
  Storage& mutable_values() { return node_->data; }

  Scalar operator()(Index n, Index c, Index h, Index w) const {
    return node_->data[offset(n, c, h, w)];
  }
  Scalar& at(Index n, Index c, Index h, Index w) {
    return node_->data[offset(n, c, h, w)];
  }

  bool has_grad() const { return node_->grad.size() > 0; }
  const Storage& grad() const { return node_->grad; }

  void zero_grad() {
    if (node_->grad.size() > 0) node_->grad.setZero();
  }

  bool all_finite() const { return node_->data.isFinite().all(); }

  // Reverse pass from a scalar-shaped tensor; seeds d(self)/d(self) = 1 and
  // accumulates into .grad of every requires_grad node reachable upstream.
  void backward() {
    if (numel() != 1) {
      throw NumericError("backward() requires a scalar tensor, got shape " +
                         shape().str());
    }
    std::vector<Node*> order = topo_order();
    grad_of(*node_).setConstant(Scalar(1));
    for (Node* node : order) {
      if (node->backprop && node->grad.size() > 0) node->backprop(*node);
    }
  }

  // --- op-construction plumbing -------------------------------------------

  struct Node {
    Shape4 shape;
    Storage data;
    Storage grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;
  };

  using NodePtr = std::shared_ptr<Node>;

  NodePtr node() const { return node_; }

  // Gradient buffer of a node, allocated (zeroed) on first touch.
  static Storage& grad_of(Node& node) {
    if (node.grad.size() == 0) node.grad = Storage::Zero(node.shape.numel());
    return node.grad;
  }

  static Tensor make_op(Shape4 shape, Storage data,
                        std::vector<NodePtr> parents,
                        std::function<void(Node&)> backprop) {
    Tensor t = from_data(shape, std::move(data));
    bool any = false;
    for (const NodePtr& p : parents) any = any || p->requires_grad;
    t.node_->requires_grad = any;
    if (any) {
      t.node_->parents = std::move(parents);
      t.node_->backprop = std::move(backprop);
    }
    return t;
  }

 private:
  Index offset(Index n, Index c, Index h, Index w) const {
    const Shape4& s = node_->shape;
    return ((n * s.c + c) * s.h + h) * s.w + w;
  }

  // Topological order with the root first and every node ahead of its
  // parents, so a node's gradient is complete before its backprop runs.
  std::vector<Node*> topo_order() const {
    std::vector<Node*> post;
    std::unordered_set<Node*> seen;
    struct Frame {
      Node* node;
      std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_parent < f.node->parents.size()) {
        Node* parent = f.node->parents[f.next_parent++].get();
        if (parent->requires_grad && seen.insert(parent).second) {
          stack.push_back({parent, 0});
        }
      } else {
        post.push_back(f.node);
        stack.pop_back();
      }
    }
    return {post.rbegin(), post.rend()};
  }

  NodePtr node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace xrdseg
