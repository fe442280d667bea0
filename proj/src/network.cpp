#include "ca/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ca/common.hpp"

namespace ca {

Mlp::Mlp(std::vector<std::size_t> layer_dims, std::uint64_t seed) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output dims");
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    std::size_t in = dims_[l], out = dims_[l + 1];
    Tensor w = Tensor::zeros({in, out});
    double s = std::sqrt(2.0 / static_cast<double>(in));
    for (auto& v : w.values) v = s * normal(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Tensor::zeros({1, out}));
  }
}

NodeId Mlp::logits_node(Graph& g, NodeId input, std::vector<NodeId>* pre_activations) const {
  NodeId h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    NodeId w = g.leaf(const_cast<Tensor&>(weights_[l]));
    NodeId b = g.leaf(const_cast<Tensor&>(biases_[l]));
    NodeId z = g.add(g.matmul(h, w), b);
    if (l + 1 < weights_.size()) {
      if (pre_activations) pre_activations->push_back(z);
      h = g.relu(z);
    } else {
      h = z;
    }
  }
  return h;
}

Tensor Mlp::logits(std::span<const double> batch, std::size_t n) const {
  if (n == 0 || batch.size() != n * input_dim())
    throw std::invalid_argument("logits: batch width does not match input dim " +
                                std::to_string(input_dim()));
  Tensor x({n, input_dim()}, {batch.begin(), batch.end()});
  Graph g;
  NodeId out = logits_node(g, g.leaf(x));
  return g.value(out);
}

Tensor Mlp::predict(std::span<const double> batch, std::size_t n) const {
  Tensor z = logits(batch, n);
  Graph g;
  return g.value(g.softmax(g.leaf(z)));
}

std::vector<double> Mlp::predict_one(std::span<const double> x) const {
  return predict(x, 1).values;
}

double Mlp::confidence(std::span<const double> x) const {
  auto p = predict_one(x);
  return *std::max_element(p.begin(), p.end());
}

void Mlp::set_requires_grad(bool b) {
  for (auto& w : weights_) w.set_requires_grad(b);
  for (auto& bt : biases_) bt.set_requires_grad(b);
}

void Mlp::zero_grad() {
  for (auto& w : weights_) w.zero_grad();
  for (auto& b : biases_) b.zero_grad();
}

std::uint64_t Mlp::fingerprint() const {
  std::uint64_t h = fnv1a(dims_.data(), dims_.size() * sizeof(std::size_t));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = fnv1a_doubles(weights_[l].values, h);
    h = fnv1a_doubles(biases_[l].values, h);
  }
  return h;
}

namespace {

struct SgdState {
  std::vector<std::vector<double>> vel_w, vel_b;
};

void sgd_step(Mlp& net, SgdState& st, double lr, double momentum, double weight_decay) {
  auto& ws = net.weights();
  auto& bs = net.biases();
  if (st.vel_w.empty()) {
    for (auto& w : ws) st.vel_w.emplace_back(w.size(), 0.0);
    for (auto& b : bs) st.vel_b.emplace_back(b.size(), 0.0);
  }
  for (std::size_t l = 0; l < ws.size(); ++l) {
    for (std::size_t i = 0; i < ws[l].size(); ++i) {
      double g = ws[l].grad[i] + weight_decay * ws[l].values[i];
      st.vel_w[l][i] = momentum * st.vel_w[l][i] + g;
      ws[l].values[i] -= lr * st.vel_w[l][i];
    }
    for (std::size_t i = 0; i < bs[l].size(); ++i) {
      st.vel_b[l][i] = momentum * st.vel_b[l][i] + bs[l].grad[i];
      bs[l].values[i] -= lr * st.vel_b[l][i];
    }
  }
}

}  // namespace

TrainResult train_standard(Mlp& net, const Dataset& dataset, const TrainConfig& cfg) {
  if (dataset.n == 0) throw std::invalid_argument("train_standard: empty dataset");
  if (dataset.d != net.input_dim())
    throw std::invalid_argument("train_standard: feature width mismatch");
  int K = net.class_count();
  for (auto l : dataset.labels)
    if (l < 0 || l >= K)
      throw std::invalid_argument("train_standard: label " + std::to_string(l) +
                                  " outside [0," + std::to_string(K) + ")");
  for (auto v : dataset.features)
    if (!std::isfinite(v)) throw std::invalid_argument("train_standard: non-finite feature");

  net.set_requires_grad(true);
  SgdState st;
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x5e5e5e5eULL));
  std::vector<std::size_t> order(dataset.n);
  std::iota(order.begin(), order.end(), 0);

  TrainResult res;
  std::size_t n_hidden = net.layer_dims().size() - 2;
  res.stats.mean.assign(n_hidden, {});
  res.stats.var.assign(n_hidden, {});
  res.stats.count.assign(n_hidden, 0);
  for (std::size_t l = 0; l < n_hidden; ++l) {
    res.stats.mean[l].assign(net.layer_dims()[l + 1], 0.0);
    res.stats.var[l].assign(net.layer_dims()[l + 1], 0.0);
  }
  const double ema_decay = 0.9;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    bool final_epoch = (epoch == cfg.epochs - 1);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < dataset.n; start += cfg.batch_size) {
      std::size_t bn = std::min<std::size_t>(cfg.batch_size, dataset.n - start);
      Tensor x = Tensor::zeros({bn, dataset.d});
      Tensor mask = Tensor::zeros({bn, static_cast<std::size_t>(K)});
      for (std::size_t i = 0; i < bn; ++i) {
        std::size_t idx = order[start + i];
        std::copy_n(dataset.features.begin() + idx * dataset.d, dataset.d,
                    x.values.begin() + i * dataset.d);
        mask.at(i, dataset.labels[idx]) = 1.0;
      }
      Graph g;
      std::vector<NodeId> pre;
      NodeId logits = net.logits_node(g, g.leaf(x), &pre);
      // cross-entropy: -sum(onehot * log p) / batch
      NodeId loss = g.scale(g.neg(g.sum(g.mul(g.constant(mask), g.log_softmax(logits)))),
                            1.0 / static_cast<double>(bn));
      double lv = g.value(loss).values[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("train_standard: NaN loss at epoch " + std::to_string(epoch));
      epoch_loss += lv;
      ++batches;
      net.zero_grad();
      g.backward(loss);
      sgd_step(net, st, cfg.learning_rate, cfg.momentum, cfg.weight_decay);

      if (final_epoch) {
        for (std::size_t l = 0; l < pre.size(); ++l) {
          const Tensor& z = g.value(pre[l]);
          std::size_t w = z.cols();
          for (std::size_t j = 0; j < w; ++j) {
            double m = 0.0, v = 0.0;
            for (std::size_t i = 0; i < bn; ++i) m += z.at(i, j);
            m /= static_cast<double>(bn);
            for (std::size_t i = 0; i < bn; ++i) {
              double c = z.at(i, j) - m;
              v += c * c;
            }
            v /= static_cast<double>(bn);
            if (res.stats.count[l] == 0) {
              res.stats.mean[l][j] = m;
              res.stats.var[l][j] = v;
            } else {
              res.stats.mean[l][j] = ema_decay * res.stats.mean[l][j] + (1.0 - ema_decay) * m;
              res.stats.var[l][j] = ema_decay * res.stats.var[l][j] + (1.0 - ema_decay) * v;
            }
          }
          // count bump deferred so every unit of the layer sees the same branch
          ++res.stats.count[l];
        }
      }
    }
    res.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  res.final_loss = res.epoch_losses.back();
  res.final_accuracy = accuracy_on(net, dataset);
  return res;
}

double accuracy_on(const Mlp& net, const Dataset& dataset) {
  if (dataset.n == 0) throw std::invalid_argument("accuracy_on: empty dataset");
  Tensor p = net.predict(dataset.features, dataset.n);
  std::size_t K = p.cols(), correct = 0;
  for (std::size_t i = 0; i < dataset.n; ++i) {
    const double* row = &p.values[i * K];
    auto arg = std::max_element(row, row + K) - row;
    if (arg == dataset.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.n);
}

void save_checkpoint(const Mlp& net, const ActivationStats& stats, std::uint64_t train_seed,
                     const std::string& kind, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "ca-checkpoint v1\n";
  out << "kind " << kind << "\n";
  out << "seed " << train_seed << "\n";
  out << "dims";
  for (auto d : net.layer_dims()) out << " " << d;
  out << "\n";
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    out << "W " << l;
    for (double v : net.weights()[l].values) out << " " << fmt_double(v);
    out << "\nb " << l;
    for (double v : net.biases()[l].values) out << " " << fmt_double(v);
    out << "\n";
  }
  out << "stats " << stats.mean.size() << "\n";
  for (std::size_t l = 0; l < stats.mean.size(); ++l) {
    out << "mean " << l << " " << stats.count[l];
    for (double v : stats.mean[l]) out << " " << fmt_double(v);
    out << "\nvar " << l << " " << stats.count[l];
    for (double v : stats.var[l]) out << " " << fmt_double(v);
    out << "\n";
  }
  out << "end\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated (" + what + ")");
    return split_ws(line);
  };
  if (!std::getline(in, line) || line != "ca-checkpoint v1")
    throw std::runtime_error(path + ": not a ca checkpoint");
  Checkpoint ck;
  auto kind = next("kind");
  if (kind.size() != 2 || kind[0] != "kind") throw std::runtime_error(path + ": bad kind line");
  ck.kind = kind[1];
  auto seed = next("seed");
  if (seed.size() != 2 || seed[0] != "seed") throw std::runtime_error(path + ": bad seed line");
  ck.train_seed = std::stoull(seed[1]);
  auto dims = next("dims");
  if (dims.size() < 3 || dims[0] != "dims") throw std::runtime_error(path + ": bad dims line");
  std::vector<std::size_t> layer_dims;
  for (std::size_t i = 1; i < dims.size(); ++i) layer_dims.push_back(std::stoull(dims[i]));
  ck.net = Mlp(layer_dims, 0);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    auto w = next("W");
    if (w.size() != 2 + layer_dims[l] * layer_dims[l + 1] || w[0] != "W")
      throw std::runtime_error(path + ": bad W line for layer " + std::to_string(l));
    for (std::size_t i = 2; i < w.size(); ++i)
      ck.net.weights()[l].values[i - 2] = parse_double(w[i]);
    auto b = next("b");
    if (b.size() != 2 + layer_dims[l + 1] || b[0] != "b")
      throw std::runtime_error(path + ": bad b line for layer " + std::to_string(l));
    for (std::size_t i = 2; i < b.size(); ++i)
      ck.net.biases()[l].values[i - 2] = parse_double(b[i]);
  }
  auto sh = next("stats");
  if (sh.size() != 2 || sh[0] != "stats") throw std::runtime_error(path + ": bad stats line");
  std::size_t n_layers = std::stoull(sh[1]);
  ck.stats.mean.resize(n_layers);
  ck.stats.var.resize(n_layers);
  ck.stats.count.resize(n_layers, 0);
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto m = next("mean");
    if (m.size() < 3 || m[0] != "mean") throw std::runtime_error(path + ": bad mean line");
    ck.stats.count[l] = std::stoull(m[2]);
    for (std::size_t i = 3; i < m.size(); ++i) ck.stats.mean[l].push_back(parse_double(m[i]));
    auto v = next("var");
    if (v.size() < 3 || v[0] != "var") throw std::runtime_error(path + ": bad var line");
    for (std::size_t i = 3; i < v.size(); ++i) ck.stats.var[l].push_back(parse_double(v[i]));
  }
  auto e = next("end");
  if (e.size() != 1 || e[0] != "end") throw std::runtime_error(path + ": missing end marker");
  return ck;
}

}  // namespace ca
