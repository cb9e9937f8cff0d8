#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "paa/matrix.hpp"

namespace paa {

using NodeId = std::size_t;

class Tape;

// Handle to one node of a Tape. Cheap to copy; the tape owns the storage and
// must outlive every handle into it.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  NodeId node_id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::span<const double> values() const;
  std::span<const double> grad() const;
  bool requires_grad() const;

  double value(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }
  double item() const;  // value of a 1x1 tensor
  Matrix to_matrix() const;
  Matrix grad_matrix() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

// Define-by-run computation record. Nodes are appended in evaluation order,
// so the node list is already a topological order of the graph.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, NodeId)>;

  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<NodeId> parents;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Matrix m, bool requires_grad);
  Tensor constant(Matrix m) { return leaf(std::move(m), false); }

  // Records an operation result. The node requires grad iff any parent does;
  // `fn` is only kept in that case.
  Tensor record(Shape shape, std::vector<double> value, std::vector<NodeId> parents,
                BackwardFn fn);

  // Reverse sweep from a 1x1 loss. Interior gradients are recomputed on every
  // call; leaf gradients accumulate until zero_grad().
  void backward(const Tensor& loss);
  void zero_grad();

  Node& node(NodeId id) { return nodes_[id]; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Adds `delta` into the gradient of `id` when that node takes gradients.
  void accumulate(NodeId id, std::span<const double> delta);

 private:
  std::deque<Node> nodes_;
};

// ---- operations -----------------------------------------------------------
// All operands must live on the same tape. Shapes are checked and violations
// raise ShapeError naming the operands' shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// a (p x q) plus a 1 x q bias added to every row.
Tensor add_row_bias(const Tensor& a, const Tensor& bias);
// Row i of a (p x q) times weights(i, 0) for p x 1 weights.
Tensor scale_rows(const Tensor& a, const Tensor& weights);
// p x q -> p x 1.
Tensor row_sums(const Tensor& a);
// p x q -> 1 x q column means.
Tensor mean_rows(const Tensor& a);
// Sum of all entries -> 1 x 1.
Tensor sum(const Tensor& a);

// Each row normalised independently (lowercase softmax).
Tensor softmax_rows(const Tensor& a);
// Whole matrix normalised so that all entries sum to one (uppercase SOFTMAX).
Tensor softmax_global(const Tensor& a);

// Exact GELU, x * Phi(x).
Tensor gelu(const Tensor& a);

Tensor concat_rows(const Tensor& top, const Tensor& bottom);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
// out row k = table row indices[k].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

// -log softmax(logits)[target] for a 1 x k row of logits, in log-sum-exp form.
Tensor cross_entropy(const Tensor& logits, std::size_t target);

}  // namespace paa
