#include "ca/synthesis.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "ca/common.hpp"

namespace ca {

std::string reg_kind_name(RegKind k) {
  switch (k) {
    case RegKind::none: return "none";
    case RegKind::data_free: return "data_free";
    case RegKind::reconstruction: return "reconstruction";
  }
  throw std::logic_error("unreachable");
}

RegKind reg_kind_from_name(const std::string& s) {
  if (s == "none") return RegKind::none;
  if (s == "data_free") return RegKind::data_free;
  if (s == "reconstruction") return RegKind::reconstruction;
  throw std::invalid_argument("unknown regularizer '" + s + "'");
}

void ChainConfig::validate() const {
  if (T < 1) throw std::invalid_argument("ChainConfig: T must be >= 1");
  if (rho <= 0.0) throw std::invalid_argument("ChainConfig: rho must be positive");
  if (eta < 0.0) throw std::invalid_argument("ChainConfig: eta must be non-negative");
  if (beta_tv < 0.0 || beta_l2 < 0.0 || beta_f < 0.0 || beta_mse < 0.0)
    throw std::invalid_argument("ChainConfig: beta coefficients must be non-negative");
  if (record_stride < 1 || record_stride > T)
    throw std::invalid_argument("ChainConfig: record_stride must lie in [1,T]");
}

namespace {

// R- assembled inside the caller's graph so its gradient reaches x.
// Single-sample feature matching: layer statistics are the mean and variance
// of the sample's pre-activations across the layer's units, matched against
// the same scalars derived from the recorded per-unit training statistics.
NodeId data_free_node(Graph& g, NodeId x, const std::vector<NodeId>& pre_acts,
                      const ActivationStats& stats, double beta_tv, double beta_l2,
                      double beta_f) {
  std::size_t d = g.value(x).cols();
  NodeId acc = g.constant(Tensor::scalar(0.0));
  if (beta_tv > 0.0 && d >= 2) {
    Tensor diff_op = Tensor::zeros({d, d - 1});
    for (std::size_t j = 0; j + 1 < d; ++j) {
      diff_op.at(j, j) = -1.0;
      diff_op.at(j + 1, j) = 1.0;
    }
    NodeId tv = g.sum(g.square(g.matmul(x, g.constant(std::move(diff_op)))));
    acc = g.add(acc, g.scale(tv, beta_tv));
  }
  if (beta_l2 > 0.0) acc = g.add(acc, g.scale(g.sum(g.square(x)), beta_l2));
  if (beta_f > 0.0) {
    if (stats.empty())
      throw std::invalid_argument("data-free regularizer: beta_f > 0 but no activation stats");
    for (std::size_t l = 0; l < pre_acts.size(); ++l) {
      std::size_t width = stats.mean[l].size();
      double mu_s = 0.0, ex2 = 0.0;
      for (std::size_t u = 0; u < width; ++u) {
        mu_s += stats.mean[l][u];
        ex2 += stats.var[l][u] + stats.mean[l][u] * stats.mean[l][u];
      }
      mu_s /= static_cast<double>(width);
      double var_s = ex2 / static_cast<double>(width) - mu_s * mu_s;

      NodeId m = g.mean(pre_acts[l]);
      NodeId v = g.add(g.mean(g.square(pre_acts[l])), g.neg(g.square(m)));
      NodeId mean_term = g.square(g.add(m, g.constant(Tensor::scalar(-mu_s))));
      NodeId var_term = g.square(g.add(v, g.constant(Tensor::scalar(-var_s))));
      acc = g.add(acc, g.scale(g.add(mean_term, var_term), beta_f));
    }
  }
  return acc;
}

NodeId reconstruction_node(Graph& g, NodeId x, std::span<const double> anchor, double beta_mse) {
  if (g.value(x).cols() != anchor.size())
    throw std::invalid_argument("reconstruction regularizer: anchor width mismatch");
  Tensor neg_anchor = Tensor::row({anchor.begin(), anchor.end()});
  for (auto& v : neg_anchor.values) v = -v;
  return g.scale(g.mean(g.square(g.add(x, g.constant(std::move(neg_anchor))))), beta_mse);
}

}  // namespace

double reg_data_free(std::span<const double> x, const Mlp& net, const ActivationStats& stats,
                     double beta_tv, double beta_l2, double beta_f) {
  if (x.size() != net.input_dim())
    throw std::invalid_argument("reg_data_free: input width mismatch");
  Graph g;
  Tensor xt = Tensor::row({x.begin(), x.end()});
  NodeId xn = g.leaf(xt);
  std::vector<NodeId> pre;
  net.logits_node(g, xn, &pre);
  return g.value(data_free_node(g, xn, pre, stats, beta_tv, beta_l2, beta_f)).values[0];
}

double reg_reconstruction(std::span<const double> x, std::span<const double> anchor,
                          double beta_mse) {
  if (x.size() != anchor.size())
    throw std::invalid_argument("reg_reconstruction: width mismatch");
  Graph g;
  Tensor xt = Tensor::row({x.begin(), x.end()});
  return g.value(reconstruction_node(g, g.leaf(xt), anchor, beta_mse)).values[0];
}

std::vector<double> init_chain(std::uint64_t seed, int chain_id, std::size_t d_in) {
  if (d_in < 1) throw std::invalid_argument("init_chain: d_in must be >= 1");
  std::mt19937_64 rng(splitmix64(seed ^ static_cast<std::uint64_t>(chain_id)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(d_in);
  for (auto& v : x) v = normal(rng);
  return x;
}

std::vector<double> chain_step(std::span<const double> x_prev, int label, const Mlp& net,
                               const ActivationStats& stats, const ChainConfig& cfg,
                               std::span<const double> noise,
                               std::optional<std::span<const double>> anchor, int t) {
  if (label < 0 || label >= net.class_count())
    throw std::invalid_argument("chain_step: label out of range");
  Graph g;
  Tensor xt = Tensor::row({x_prev.begin(), x_prev.end()});
  xt.set_requires_grad(true);
  NodeId xn = g.leaf(xt);
  std::vector<NodeId> pre;
  NodeId logits = net.logits_node(g, xn, &pre);
  Tensor mask = Tensor::zeros({1, static_cast<std::size_t>(net.class_count())});
  mask.values[label] = 1.0;
  NodeId nll = g.neg(g.sum(g.mul(g.log_softmax(logits), g.constant(std::move(mask)))));
  g.backward(nll);
  std::vector<double> g_conf = xt.grad;

  std::vector<double> g_reg(x_prev.size(), 0.0);
  NodeId reg = 0;
  bool has_reg = false;
  switch (cfg.regularizer) {
    case RegKind::none:
      break;
    case RegKind::data_free:
      reg = data_free_node(g, xn, pre, stats, cfg.beta_tv, cfg.beta_l2, cfg.beta_f);
      has_reg = true;
      break;
    case RegKind::reconstruction:
      if (!anchor) throw std::invalid_argument("chain_step: reconstruction regularizer needs anchor");
      reg = reconstruction_node(g, xn, *anchor, cfg.beta_mse);
      has_reg = true;
      break;
  }
  if (has_reg) {
    xt.zero_grad();
    g.backward(reg);
    g_reg = xt.grad;
  }

  // Each gradient is norm-clipped on its own: a steep regularizer far from
  // its minimum would otherwise overshoot at fixed rho and drown out the
  // confidence ascent while it bounces.
  auto clip_shrink = [](const std::vector<double>& v, int step) {
    double n2 = 0.0;
    for (double e : v) {
      if (!std::isfinite(e))
        throw std::runtime_error("chain_step: non-finite gradient at t=" + std::to_string(step));
      n2 += e * e;
    }
    constexpr double max_norm = 10.0;
    return n2 > max_norm * max_norm ? max_norm / std::sqrt(n2) : 1.0;
  };
  double s_conf = clip_shrink(g_conf, t);
  double s_reg = clip_shrink(g_reg, t);
  std::vector<double> out(x_prev.begin(), x_prev.end());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] += -cfg.rho * (s_conf * g_conf[j] + s_reg * g_reg[j]) + cfg.eta * noise[j];
  return out;
}

std::vector<int> recorded_times(int T, int stride) {
  std::vector<int> times;
  for (int t = 0; t <= T; t += stride) times.push_back(t);
  if (times.back() != T) times.push_back(T);
  return times;
}

Trajectory synthesize(const Mlp& net, const ActivationStats& stats, int N,
                      const ChainConfig& cfg, const Dataset* id_data) {
  cfg.validate();
  if (N < 1) throw std::invalid_argument("synthesize: N must be >= 1");
  if (cfg.regularizer == RegKind::reconstruction && (!id_data || id_data->n == 0))
    throw std::invalid_argument("synthesize: reconstruction regularizer needs a non-empty ID dataset");
  std::size_t d = net.input_dim();
  Trajectory traj;
  traj.config = cfg;
  traj.net_fingerprint = net.fingerprint();
  traj.dim = d;
  traj.class_count = net.class_count();
  traj.chains = N;
  auto times = recorded_times(cfg.T, cfg.record_stride);
  traj.records.reserve(static_cast<std::size_t>(N) * times.size());

  std::vector<double> noise(d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int c = 0; c < N; ++c) {
    std::mt19937_64 rng(splitmix64(cfg.seed ^ static_cast<std::uint64_t>(c)));
    std::vector<double> x(d);
    for (auto& v : x) v = normal(rng);  // matches init_chain(seed, c, d)

    int label;
    long anchor_index = -1;
    std::optional<std::span<const double>> anchor;
    if (cfg.regularizer == RegKind::reconstruction) {
      std::uniform_int_distribution<std::size_t> pick(0, id_data->n - 1);
      anchor_index = static_cast<long>(pick(rng));
      label = id_data->labels[anchor_index];
      anchor = id_data->row(anchor_index);
    } else {
      std::uniform_int_distribution<int> pick(0, net.class_count() - 1);
      label = pick(rng);
    }

    std::size_t next_rec = 0;
    auto record = [&](int t) {
      TrajectoryRecord r;
      r.chain_id = c;
      r.t = t;
      r.label = label;
      r.anchor_index = anchor_index;
      r.x = x;
      traj.records.push_back(std::move(r));
    };
    if (times[next_rec] == 0) {
      record(0);
      ++next_rec;
    }
    for (int t = 1; t <= cfg.T; ++t) {
      for (auto& z : noise) z = normal(rng);
      x = chain_step(x, label, net, stats, cfg, noise, anchor, t);
      if (next_rec < times.size() && times[next_rec] == t) {
        record(t);
        ++next_rec;
      }
    }
  }
  return traj;
}

void save_trajectory(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const ChainConfig& c = traj.config;
  std::size_t qcols = traj.records.empty() ? 0 : traj.records.front().q.size();
  out << "ca-trajectory v1\n";
  out << "T " << c.T << "\nrho " << fmt_double(c.rho) << "\neta " << fmt_double(c.eta) << "\n";
  out << "reg " << reg_kind_name(c.regularizer) << "\n";
  out << "beta " << fmt_double(c.beta_tv) << " " << fmt_double(c.beta_l2) << " "
      << fmt_double(c.beta_f) << " " << fmt_double(c.beta_mse) << "\n";
  out << "seed " << c.seed << "\nstride " << c.record_stride << "\n";
  out << "net " << traj.net_fingerprint << "\n";
  out << "dim " << traj.dim << "\nK " << traj.class_count << "\nchains " << traj.chains << "\n";
  out << "records " << traj.records.size() << " qcols " << qcols << "\n";
  for (const auto& r : traj.records) {
    out << r.chain_id << " " << r.t << " " << r.label << " " << r.anchor_index;
    for (double v : r.x) out << " " << fmt_double(v);
    for (double v : r.q) out << " " << fmt_double(v);
    out << "\n";
  }
  out << "end\n";
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated (" + what + ")");
    return split_ws(line);
  };
  if (!std::getline(in, line) || line != "ca-trajectory v1")
    throw std::runtime_error(path + ": not a ca trajectory file");
  Trajectory traj;
  ChainConfig& c = traj.config;
  auto expect = [&](const char* key, std::size_t n) {
    auto f = next(key);
    if (f.size() != n || f[0] != key)
      throw std::runtime_error(path + ": bad '" + key + "' line");
    return f;
  };
  c.T = std::stoi(expect("T", 2)[1]);
  c.rho = parse_double(expect("rho", 2)[1]);
  c.eta = parse_double(expect("eta", 2)[1]);
  c.regularizer = reg_kind_from_name(expect("reg", 2)[1]);
  auto betas = expect("beta", 5);
  c.beta_tv = parse_double(betas[1]);
  c.beta_l2 = parse_double(betas[2]);
  c.beta_f = parse_double(betas[3]);
  c.beta_mse = parse_double(betas[4]);
  c.seed = std::stoull(expect("seed", 2)[1]);
  c.record_stride = std::stoi(expect("stride", 2)[1]);
  traj.net_fingerprint = std::stoull(expect("net", 2)[1]);
  traj.dim = std::stoull(expect("dim", 2)[1]);
  traj.class_count = std::stoi(expect("K", 2)[1]);
  traj.chains = std::stoi(expect("chains", 2)[1]);
  auto rec = expect("records", 4);
  if (rec[2] != "qcols") throw std::runtime_error(path + ": bad records line");
  std::size_t n_records = std::stoull(rec[1]);
  std::size_t qcols = std::stoull(rec[3]);
  traj.records.reserve(n_records);
  for (std::size_t i = 0; i < n_records; ++i) {
    auto f = next("record");
    if (f.size() != 4 + traj.dim + qcols)
      throw std::runtime_error(path + ": record " + std::to_string(i) + " has wrong field count");
    TrajectoryRecord r;
    r.chain_id = std::stoi(f[0]);
    r.t = std::stoi(f[1]);
    r.label = std::stoi(f[2]);
    r.anchor_index = std::stol(f[3]);
    for (std::size_t j = 0; j < traj.dim; ++j) r.x.push_back(parse_double(f[4 + j]));
    for (std::size_t j = 0; j < qcols; ++j) r.q.push_back(parse_double(f[4 + traj.dim + j]));
    traj.records.push_back(std::move(r));
  }
  auto e = next("end");
  if (e.size() != 1 || e[0] != "end") throw std::runtime_error(path + ": missing end marker");
  return traj;
}

}  // namespace ca
