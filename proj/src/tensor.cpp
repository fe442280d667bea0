#include "ca/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ca {

namespace {

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != values.size())
    throw std::invalid_argument("tensor shape " + shape_str(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
}

Tensor Tensor::zeros(std::vector<std::size_t> s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

Tensor Tensor::row(std::vector<double> v) {
  auto n = v.size();
  return Tensor({1, n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> v) {
  return Tensor({r, c}, std::move(v));
}

std::size_t Tensor::rows() const { return shape.size() == 2 ? shape[0] : 1; }

std::size_t Tensor::cols() const {
  return shape.empty() ? 1 : shape.back();
}

void Tensor::set_requires_grad(bool b) {
  requires_grad = b;
  if (b)
    grad.assign(values.size(), 0.0);
  else
    grad.clear();
}

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void Graph::check(NodeId id) const {
  if (id >= nodes_.size()) throw std::invalid_argument("node id not in graph");
}

NodeId Graph::push(Node n) {
  if (!n.value.all_finite())
    throw std::runtime_error("non-finite value produced by graph operation");
  n.grad.assign(n.value.size(), 0.0);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Graph::leaf(Tensor& t) {
  Node n;
  n.op = Op::Leaf;
  n.value = t;  // snapshot of values; gradients flow back to the external tensor
  n.external = &t;
  return push(std::move(n));
}

NodeId Graph::constant(Tensor t) {
  Node n;
  n.op = Op::Const;
  n.value = std::move(t);
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  check(a); check(b);
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
    throw std::invalid_argument("matmul shape mismatch: " + shape_str(A.shape) + " x " +
                                shape_str(B.shape));
  std::size_t n = A.shape[0], k = A.shape[1], m = B.shape[1];
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = A.values[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B.values[p * m];
      double* orow = &out.values[i * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  Node nd;
  nd.op = Op::MatMul;
  nd.in0 = a;
  nd.in1 = b;
  nd.value = std::move(out);
  return push(std::move(nd));
}

namespace {

// Broadcast classification for elementwise binary ops: identical shapes, or
// a [m] / [1,m] operand repeated over the leading batch dimension of [n,m].
enum class Bcast { Same, BroadcastB, BroadcastA };

Bcast classify(const Tensor& a, const Tensor& b) {
  if (a.shape == b.shape) return Bcast::Same;
  auto is_rowlike = [](const Tensor& t) {
    return t.shape.size() == 1 || (t.shape.size() == 2 && t.shape[0] == 1);
  };
  if (a.shape.size() == 2 && is_rowlike(b) && b.cols() == a.shape[1]) return Bcast::BroadcastB;
  if (b.shape.size() == 2 && is_rowlike(a) && a.cols() == b.shape[1]) return Bcast::BroadcastA;
  throw std::invalid_argument("elementwise shape mismatch: " + shape_str(a.shape) + " vs " +
                              shape_str(b.shape));
}

}  // namespace

NodeId Graph::add(NodeId a, NodeId b) {
  check(a); check(b);
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  Bcast c = classify(A, B);
  const Tensor& big = (c == Bcast::BroadcastA) ? B : A;
  Tensor out = big;
  std::size_t m = big.cols();
  if (c == Bcast::Same) {
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = A.values[i] + B.values[i];
  } else {
    const Tensor& small = (c == Bcast::BroadcastA) ? A : B;
    for (std::size_t i = 0; i < out.size(); ++i)
      out.values[i] = A.values[c == Bcast::BroadcastA ? i % m : i] +
                      B.values[c == Bcast::BroadcastB ? i % m : i];
  }
  Node nd;
  nd.op = Op::Add;
  nd.in0 = a;
  nd.in1 = b;
  nd.value = std::move(out);
  return push(std::move(nd));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  check(a); check(b);
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  Bcast c = classify(A, B);
  const Tensor& big = (c == Bcast::BroadcastA) ? B : A;
  Tensor out = big;
  std::size_t m = big.cols();
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] = A.values[c == Bcast::BroadcastA ? i % m : i] *
                    B.values[c == Bcast::BroadcastB ? i % m : i];
  Node nd;
  nd.op = Op::Mul;
  nd.in0 = a;
  nd.in1 = b;
  nd.value = std::move(out);
  return push(std::move(nd));
}

NodeId Graph::relu(NodeId a) {
  check(a);
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v = v > 0.0 ? v : 0.0;
  Node nd;
  nd.op = Op::Relu;
  nd.in0 = a;
  nd.value = std::move(out);
  return push(std::move(nd));
}

NodeId Graph::log(NodeId a) {
  check(a);
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) {
    if (v <= 0.0) throw std::runtime_error("log of non-positive value " + std::to_string(v));
    v = std::log(v);
  }
  Node nd;
  nd.op = Op::Log;
  nd.in0 = a;
  nd.value = std::move(out);
  return push(std::move(nd));
}

NodeId Graph::exp(NodeId a) {
  check(a);
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v = std::exp(v);
  Node nd;
  nd.op = Op::Exp;
  nd.in0 = a;
  nd.value = std::move(out);
  return push(std::move(nd));
}

NodeId Graph::sum(NodeId a) {
  check(a);
  double s = std::accumulate(nodes_[a].value.values.begin(), nodes_[a].value.values.end(), 0.0);
  Node nd;
  nd.op = Op::Sum;
  nd.in0 = a;
  nd.value = Tensor::scalar(s);
  return push(std::move(nd));
}

NodeId Graph::mean(NodeId a) {
  check(a);
  const auto& v = nodes_[a].value.values;
  double s = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  Node nd;
  nd.op = Op::Mean;
  nd.in0 = a;
  nd.value = Tensor::scalar(s);
  return push(std::move(nd));
}

NodeId Graph::softmax(NodeId a) {
  check(a);
  const Tensor& A = nodes_[a].value;
  Tensor out = A;
  std::size_t m = A.cols(), n = A.size() / m;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = &out.values[i * m];
    double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (std::size_t j = 0; j < m; ++j) row[j] /= z;
  }
  Node nd;
  nd.op = Op::Softmax;
  nd.in0 = a;
  nd.value = std::move(out);
  return push(std::move(nd));
}

NodeId Graph::log_softmax(NodeId a) {
  check(a);
  const Tensor& A = nodes_[a].value;
  Tensor out = A;
  std::size_t m = A.cols(), n = A.size() / m;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = &out.values[i * m];
    double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(row[j] - mx);
    double lse = mx + std::log(z);
    for (std::size_t j = 0; j < m; ++j) row[j] -= lse;
  }
  Node nd;
  nd.op = Op::LogSoftmax;
  nd.in0 = a;
  nd.value = std::move(out);
  return push(std::move(nd));
}

NodeId Graph::square(NodeId a) {
  check(a);
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v = v * v;
  Node nd;
  nd.op = Op::Square;
  nd.in0 = a;
  nd.value = std::move(out);
  return push(std::move(nd));
}

NodeId Graph::neg(NodeId a) {
  check(a);
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v = -v;
  Node nd;
  nd.op = Op::Neg;
  nd.in0 = a;
  nd.value = std::move(out);
  return push(std::move(nd));
}

NodeId Graph::scale(NodeId a, double c) {
  check(a);
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v *= c;
  Node nd;
  nd.op = Op::Scale;
  nd.in0 = a;
  nd.c = c;
  nd.value = std::move(out);
  return push(std::move(nd));
}

const Tensor& Graph::value(NodeId id) const {
  check(id);
  return nodes_[id].value;
}

const std::vector<double>& Graph::grad_of(NodeId id) const {
  check(id);
  return nodes_[id].grad;
}

void Graph::backward(NodeId loss) {
  check(loss);
  if (nodes_[loss].value.size() != 1)
    throw std::invalid_argument("backward requires a scalar loss");
  // Internal node grads are per-pass scratch; only external tensors
  // accumulate across repeated backward calls.
  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  nodes_[loss].grad[0] = 1.0;

  for (std::size_t idx = loss + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    const std::vector<double>& g = n.grad;
    bool any = std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
    if (!any) continue;
    switch (n.op) {
      case Op::Leaf:
        if (n.external && n.external->requires_grad) {
          auto& eg = n.external->grad;
          if (eg.size() != g.size()) eg.assign(g.size(), 0.0);
          for (std::size_t i = 0; i < g.size(); ++i) eg[i] += g[i];
        }
        break;
      case Op::Const:
        break;
      case Op::MatMul: {
        const Tensor& A = nodes_[n.in0].value;
        const Tensor& B = nodes_[n.in1].value;
        std::size_t rn = A.shape[0], k = A.shape[1], m = B.shape[1];
        auto& ga = nodes_[n.in0].grad;
        auto& gb = nodes_[n.in1].grad;
        for (std::size_t i = 0; i < rn; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            double gv = g[i * m + j];
            if (gv == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) {
              ga[i * k + p] += gv * B.values[p * m + j];
              gb[p * m + j] += gv * A.values[i * k + p];
            }
          }
        break;
      }
      case Op::Add: {
        auto& ga = nodes_[n.in0].grad;
        auto& gb = nodes_[n.in1].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i % ga.size()] += g[i];
          gb[i % gb.size()] += g[i];
        }
        break;
      }
      case Op::Mul: {
        const auto& av = nodes_[n.in0].value.values;
        const auto& bv = nodes_[n.in1].value.values;
        auto& ga = nodes_[n.in0].grad;
        auto& gb = nodes_[n.in1].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i % ga.size()] += g[i] * bv[i % bv.size()];
          gb[i % gb.size()] += g[i] * av[i % av.size()];
        }
        break;
      }
      case Op::Relu: {
        const auto& av = nodes_[n.in0].value.values;
        auto& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (av[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Op::Log: {
        const auto& av = nodes_[n.in0].value.values;
        auto& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
        break;
      }
      case Op::Exp: {
        auto& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value.values[i];
        break;
      }
      case Op::Sum: {
        auto& ga = nodes_[n.in0].grad;
        for (auto& v : ga) v += g[0];
        break;
      }
      case Op::Mean: {
        auto& ga = nodes_[n.in0].grad;
        double s = g[0] / static_cast<double>(ga.size());
        for (auto& v : ga) v += s;
        break;
      }
      case Op::Softmax: {
        auto& ga = nodes_[n.in0].grad;
        std::size_t m = n.value.cols(), rn = n.value.size() / m;
        for (std::size_t i = 0; i < rn; ++i) {
          const double* p = &n.value.values[i * m];
          const double* gr = &g[i * m];
          double dot = 0.0;
          for (std::size_t j = 0; j < m; ++j) dot += gr[j] * p[j];
          for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += p[j] * (gr[j] - dot);
        }
        break;
      }
      case Op::LogSoftmax: {
        auto& ga = nodes_[n.in0].grad;
        std::size_t m = n.value.cols(), rn = n.value.size() / m;
        for (std::size_t i = 0; i < rn; ++i) {
          const double* s = &n.value.values[i * m];
          const double* gr = &g[i * m];
          double gsum = 0.0;
          for (std::size_t j = 0; j < m; ++j) gsum += gr[j];
          for (std::size_t j = 0; j < m; ++j)
            ga[i * m + j] += gr[j] - std::exp(s[j]) * gsum;
        }
        break;
      }
      case Op::Square: {
        const auto& av = nodes_[n.in0].value.values;
        auto& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * av[i] * g[i];
        break;
      }
      case Op::Neg: {
        auto& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
        break;
      }
      case Op::Scale: {
        auto& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.c * g[i];
        break;
      }
    }
  }
}

}  // namespace ca
