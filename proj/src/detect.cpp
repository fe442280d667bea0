#include "ca/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ca/common.hpp"

namespace ca {

double score_msp(const Mlp& net, std::span<const double> x) {
  return 1.0 - net.confidence(x);
}

double score_odin(const Mlp& net, std::span<const double> x, double temperature,
                  double epsilon) {
  if (temperature <= 0.0) throw std::invalid_argument("score_odin: temperature must be positive");
  if (epsilon < 0.0) throw std::invalid_argument("score_odin: epsilon must be non-negative");
  std::vector<double> xp(x.begin(), x.end());
  if (epsilon > 0.0) {
    // grad of -log max_y softmax(logits/T)_y w.r.t. x, argmax held fixed
    Graph g;
    Tensor xt = Tensor::row(xp);
    xt.set_requires_grad(true);
    NodeId probs = g.softmax(g.scale(net.logits_node(g, g.leaf(xt)), 1.0 / temperature));
    const auto& pv = g.value(probs).values;
    std::size_t arg = std::max_element(pv.begin(), pv.end()) - pv.begin();
    Tensor mask = Tensor::zeros({1, pv.size()});
    mask.values[arg] = 1.0;
    g.backward(g.neg(g.log(g.sum(g.mul(probs, g.constant(std::move(mask)))))));
    // x' = x - eps * sign(grad of the negated log-confidence)
    for (std::size_t j = 0; j < xp.size(); ++j) {
      double s = xt.grad[j] > 0.0 ? 1.0 : (xt.grad[j] < 0.0 ? -1.0 : 0.0);
      xp[j] -= epsilon * s;
    }
  }
  Tensor z = net.logits(xp, 1);
  for (auto& v : z.values) v /= temperature;
  Graph g2;
  const auto& p = g2.value(g2.softmax(g2.leaf(z))).values;
  return 1.0 - *std::max_element(p.begin(), p.end());
}

double score_energy(const Mlp& net, std::span<const double> x, double temperature) {
  if (temperature <= 0.0) throw std::invalid_argument("score_energy: temperature must be positive");
  Tensor z = net.logits(x, 1);
  double mx = *std::max_element(z.values.begin(), z.values.end());
  double s = 0.0;
  for (double v : z.values) s += std::exp((v - mx) / temperature);
  return -temperature * (std::log(s) + mx / temperature);
}

double score_ca(const Mlp& aux, std::span<const double> x) {
  return binary_classify(aux, x).second;
}

std::string DetectorKind::describe() const {
  if (name == "odin")
    return "odin tau=" + fmt_double(odin_temperature) + " eps=" + fmt_double(odin_epsilon);
  if (name == "energy") return "energy tau=" + fmt_double(energy_temperature);
  return name;
}

ScoreSet score_mixture(const DetectorKind& kind, const Mlp* net, const Mlp* aux,
                       const Mixture& mix) {
  if (kind.name == "ca") {
    if (!aux) throw std::invalid_argument("score_mixture: ca detector needs the auxiliary network");
  } else if (!net) {
    throw std::invalid_argument("score_mixture: detector '" + kind.name +
                                "' needs the standard network");
  }
  ScoreSet out;
  out.detector = kind.name;
  out.params = kind.describe();
  out.is_ood = mix.is_ood;
  out.scores.reserve(mix.size());
  for (std::size_t i = 0; i < mix.size(); ++i) {
    auto x = mix.row(i);
    double s;
    if (kind.name == "msp") s = score_msp(*net, x);
    else if (kind.name == "odin") s = score_odin(*net, x, kind.odin_temperature, kind.odin_epsilon);
    else if (kind.name == "energy") s = score_energy(*net, x, kind.energy_temperature);
    else if (kind.name == "ca") s = score_ca(*aux, x);
    else throw std::invalid_argument("score_mixture: unknown detector '" + kind.name + "'");
    out.scores.push_back(s);
  }
  return out;
}

void save_scoreset(const ScoreSet& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "ca-scores v1\n";
  out << "detector " << s.detector << "\n";
  out << "params " << s.params << "\n";
  out << "rows " << s.scores.size() << "\n";
  for (std::size_t i = 0; i < s.scores.size(); ++i)
    out << fmt_double(s.scores[i]) << " " << static_cast<int>(s.is_ood[i]) << "\n";
  out << "end\n";
}

ScoreSet load_scoreset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ca-scores v1")
    throw std::runtime_error(path + ": not a ca score file");
  ScoreSet s;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated (" + what + ")");
    return line;
  };
  auto det = split_ws(next("detector"));
  if (det.size() != 2 || det[0] != "detector") throw std::runtime_error(path + ": bad detector line");
  s.detector = det[1];
  auto params = next("params");
  if (params.rfind("params ", 0) != 0) throw std::runtime_error(path + ": bad params line");
  s.params = params.substr(7);
  auto rows = split_ws(next("rows"));
  if (rows.size() != 2 || rows[0] != "rows") throw std::runtime_error(path + ": bad rows line");
  std::size_t n = std::stoull(rows[1]);
  for (std::size_t i = 0; i < n; ++i) {
    auto f = split_ws(next("row"));
    if (f.size() != 2) throw std::runtime_error(path + ": bad score row " + std::to_string(i));
    s.scores.push_back(parse_double(f[0]));
    s.is_ood.push_back(static_cast<char>(std::stoi(f[1])));
  }
  if (next("end") != "end") throw std::runtime_error(path + ": missing end marker");
  return s;
}

}  // namespace ca
