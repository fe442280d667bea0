#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ca {

// Dense row-major tensor of doubles. Rank 1 or 2 is all the MLP stack needs.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // same length as values when requires_grad

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v);

  static Tensor zeros(std::vector<std::size_t> s);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor row(std::vector<double> v);
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  void set_requires_grad(bool b);
  void zero_grad();
  bool all_finite() const;
};

using NodeId = std::size_t;

// Define-by-run tape. Built fresh per forward pass; backward walks the
// node list in reverse insertion order.
class Graph {
 public:
  // External tensor; gradients accumulate into t.grad when t.requires_grad.
  NodeId leaf(Tensor& t);
  // Graph-owned constant; never receives gradient.
  NodeId constant(Tensor t);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);  // same shape, or [n,m] + [m] / [1,m]
  NodeId mul(NodeId a, NodeId b);  // elementwise, same broadcast rule
  NodeId relu(NodeId a);
  NodeId log(NodeId a);
  NodeId exp(NodeId a);
  NodeId sum(NodeId a);            // scalar
  NodeId mean(NodeId a);           // scalar
  NodeId softmax(NodeId a);        // row-wise, max-subtracted
  NodeId log_softmax(NodeId a);    // row-wise; stays finite where softmax underflows
  NodeId square(NodeId a);
  NodeId neg(NodeId a);
  NodeId scale(NodeId a, double c);

  const Tensor& value(NodeId id) const;
  const std::vector<double>& grad_of(NodeId id) const;

  // loss must be scalar; accumulates (additively) into node grads and into
  // the .grad of every requires_grad leaf tensor.
  void backward(NodeId loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf, Const, MatMul, Add, Mul, Relu, Log, Exp, Sum, Mean, Softmax, LogSoftmax, Square,
    Neg, Scale
  };
  struct Node {
    Op op;
    NodeId in0 = 0, in1 = 0;
    double c = 0.0;  // for Scale
    Tensor value;    // owned copy of the result (for leaves, a copy of the input)
    std::vector<double> grad;
    Tensor* external = nullptr;
  };

  NodeId push(Node n);
  void check(NodeId id) const;
  std::vector<Node> nodes_;
};

}  // namespace ca
