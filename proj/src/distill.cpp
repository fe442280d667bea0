#include "ca/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ca/common.hpp"

namespace ca {

double kl_loss(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_loss: length mismatch");
  double sp = std::accumulate(p.begin(), p.end(), 0.0);
  double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6)
    throw std::invalid_argument("kl_loss: inputs must be probability vectors");
  double kl = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] == 0.0) continue;  // 0 log 0 = 0
    double qy = std::max(q[y], 1e-12);
    kl += p[y] * std::log(p[y] / qy);
  }
  return kl;
}

namespace {

double mean_kl(const Mlp& net, const Trajectory& traj, bool reverse) {
  double total = 0.0;
  for (const auto& r : traj.records) {
    auto p = net.predict_one(r.x);
    total += reverse ? kl_loss(r.q, p) : kl_loss(p, r.q);
  }
  return total / static_cast<double>(traj.records.size());
}

}  // namespace

DistillResult distill(const Trajectory& traj, const DistillConfig& cfg) {
  if (traj.records.empty()) throw std::invalid_argument("distill: empty trajectory");
  for (const auto& r : traj.records)
    if (r.q.size() != static_cast<std::size_t>(traj.class_count))
      throw std::invalid_argument("distill: trajectory records lack amended targets");

  std::vector<std::size_t> dims = cfg.layer_dims;
  if (dims.empty()) dims = {traj.dim, 64, 64, static_cast<std::size_t>(traj.class_count)};
  if (dims.front() != traj.dim || dims.back() != static_cast<std::size_t>(traj.class_count))
    throw std::invalid_argument("distill: layer_dims do not match trajectory dim/K");

  DistillResult res;
  res.net = Mlp(dims, splitmix64(cfg.seed ^ 0xa0a0a0a0ULL));
  res.initial_mean_kl = mean_kl(res.net, traj, cfg.reverse_kl);

  std::size_t n = traj.records.size(), d = traj.dim;
  std::size_t K = static_cast<std::size_t>(traj.class_count);
  res.net.set_requires_grad(true);

  std::vector<std::vector<double>> vel_w, vel_b;
  for (auto& w : res.net.weights()) vel_w.emplace_back(w.size(), 0.0);
  for (auto& b : res.net.biases()) vel_b.emplace_back(b.size(), 0.0);

  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xd15717ULL));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      std::size_t bn = std::min<std::size_t>(cfg.batch_size, n - start);
      Tensor x = Tensor::zeros({bn, d});
      Tensor log_q = Tensor::zeros({bn, K});
      Tensor q_mat = Tensor::zeros({bn, K});
      for (std::size_t i = 0; i < bn; ++i) {
        const auto& r = traj.records[order[start + i]];
        std::copy(r.x.begin(), r.x.end(), x.values.begin() + i * d);
        for (std::size_t y = 0; y < K; ++y) {
          double qy = std::max(r.q[y], 1e-12);
          q_mat.at(i, y) = qy;
          log_q.at(i, y) = std::log(qy);
        }
      }
      Graph g;
      NodeId logits = res.net.logits_node(g, g.leaf(x));
      NodeId probs = g.softmax(logits);
      NodeId loss;
      if (!cfg.reverse_kl) {
        // sum p (log p - log q) / bn
        NodeId diff = g.add(g.log_softmax(logits), g.neg(g.constant(std::move(log_q))));
        loss = g.scale(g.sum(g.mul(probs, diff)), 1.0 / static_cast<double>(bn));
      } else {
        // sum q (log q - log p) / bn; the q log q part is constant but kept
        // so the reported loss is the true KL
        NodeId diff = g.add(g.constant(std::move(log_q)), g.neg(g.log_softmax(logits)));
        loss = g.scale(g.sum(g.mul(g.constant(std::move(q_mat)), diff)),
                       1.0 / static_cast<double>(bn));
      }
      double lv = g.value(loss).values[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("distill: NaN loss at epoch " + std::to_string(epoch));
      res.net.zero_grad();
      g.backward(loss);
      auto& ws = res.net.weights();
      auto& bs = res.net.biases();
      for (std::size_t l = 0; l < ws.size(); ++l) {
        for (std::size_t i = 0; i < ws[l].size(); ++i) {
          vel_w[l][i] = cfg.momentum * vel_w[l][i] + ws[l].grad[i] +
                        cfg.weight_decay * ws[l].values[i];
          ws[l].values[i] -= cfg.learning_rate * vel_w[l][i];
        }
        for (std::size_t i = 0; i < bs[l].size(); ++i) {
          vel_b[l][i] = cfg.momentum * vel_b[l][i] + bs[l].grad[i];
          bs[l].values[i] -= cfg.learning_rate * vel_b[l][i];
        }
      }
    }
  }
  res.net.set_requires_grad(false);
  res.final_mean_kl = mean_kl(res.net, traj, cfg.reverse_kl);
  return res;
}

std::pair<double, double> binary_classify(const Mlp& aux, std::span<const double> x) {
  double p_id = aux.confidence(x);
  return {p_id, 1.0 - p_id};
}

}  // namespace ca
