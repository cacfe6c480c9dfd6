#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace decor::ad {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// One value in the computation graph. Leaves have no parents; interior nodes
// carry a backward closure that accumulates into their parents' grads.
struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::span<float> grad_buffer();  // allocates zeros on first use
};

// Shared handle to a Node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const float> data() const { return node_->value; }
  std::span<float> mutable_data() { return node_->value; }
  float item() const;

  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view if no gradient has been accumulated yet.
  std::span<const float> grad() const;
  std::span<float> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const char* op() const { return node_->op; }

  // Same values, no graph history.
  Tensor detach() const;
  Tensor clone() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Graph recording is on by default; NoGradGuard disables it for the current
// thread (inference, detached fakes).
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

// Builds an op output. Records parents and the backward closure only when
// recording is enabled and some parent needs a gradient.
Tensor make_result(Shape shape, std::vector<float> value, const char* op,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward);

// Reverse-mode sweep from a scalar loss: seeds d(loss)=1, visits every node
// once in reverse topological order. Throws ShapeError for non-scalar loss.
void backward(const Tensor& loss);

// Reverse topological order of the graph reachable from `root` (root first).
std::vector<Node*> reverse_topological_order(const Tensor& root);

}  // namespace decor::ad
