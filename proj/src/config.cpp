#include "ca/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ca/common.hpp"

namespace ca {

std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    auto eq = line.find('=', start);
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": expected key=value, got '" + line + "'");
    std::string key = line.substr(start, eq - start);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string val = line.substr(eq + 1);
    std::size_t vs = val.find_first_not_of(" \t");
    val = vs == std::string::npos ? "" : val.substr(vs);
    while (!val.empty() && (val.back() == ' ' || val.back() == '\t')) val.pop_back();
    kv[key] = val;
  }
  return kv;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

void apply_overrides(std::map<std::string, std::string>& kv,
                     const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override must be key=value, got '" + ov + "'");
    kv[ov.substr(0, eq)] = ov.substr(eq + 1);
  }
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : split_char(s, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

}  // namespace

ExperimentConfig build_experiment_config(const std::map<std::string, std::string>& kv) {
  ExperimentConfig cfg;
  DetectorKind proto;  // odin/energy hyperparameters shared by the detector list
  std::vector<std::string> detector_names = {"msp", "odin", "energy", "ca"};
  for (const auto& [key, val] : kv) {
    try {
      if (key == "benchmark.K") cfg.benchmark.K = std::stoi(val);
      else if (key == "benchmark.d") cfg.benchmark.d = std::stoull(val);
      else if (key == "benchmark.separation") cfg.benchmark.separation = parse_double(val);
      else if (key == "benchmark.train_n") cfg.benchmark.train_n = std::stoull(val);
      else if (key == "benchmark.test_n") cfg.benchmark.test_n = std::stoull(val);
      else if (key == "benchmark.near_n") cfg.benchmark.near_n = std::stoull(val);
      else if (key == "benchmark.far_n") cfg.benchmark.far_n = std::stoull(val);
      else if (key == "benchmark.far_range") cfg.benchmark.far_range = parse_double(val);
      else if (key == "train.epochs") cfg.train.epochs = std::stoi(val);
      else if (key == "train.batch_size") cfg.train.batch_size = std::stoi(val);
      else if (key == "train.learning_rate") cfg.train.learning_rate = parse_double(val);
      else if (key == "train.momentum") cfg.train.momentum = parse_double(val);
      else if (key == "train.weight_decay") cfg.train.weight_decay = parse_double(val);
      else if (key == "chain.T") cfg.chain.T = std::stoi(val);
      else if (key == "chain.rho") cfg.chain.rho = parse_double(val);
      else if (key == "chain.eta") cfg.chain.eta = parse_double(val);
      else if (key == "chain.regularizer") cfg.chain.regularizer = reg_kind_from_name(val);
      else if (key == "chain.beta_tv") cfg.chain.beta_tv = parse_double(val);
      else if (key == "chain.beta_l2") cfg.chain.beta_l2 = parse_double(val);
      else if (key == "chain.beta_f") cfg.chain.beta_f = parse_double(val);
      else if (key == "chain.beta_mse") cfg.chain.beta_mse = parse_double(val);
      else if (key == "chain.record_stride") cfg.chain.record_stride = std::stoi(val);
      else if (key == "chain.chains") cfg.chains = std::stoi(val);
      else if (key == "amend.a" || key == "a") cfg.a = parse_double(val);
      else if (key == "distill.epochs") cfg.distill.epochs = std::stoi(val);
      else if (key == "distill.batch_size") cfg.distill.batch_size = std::stoi(val);
      else if (key == "distill.learning_rate") cfg.distill.learning_rate = parse_double(val);
      else if (key == "distill.momentum") cfg.distill.momentum = parse_double(val);
      else if (key == "distill.weight_decay") cfg.distill.weight_decay = parse_double(val);
      else if (key == "distill.reverse_kl") cfg.distill.reverse_kl = (val == "true" || val == "1");
      else if (key == "odin.temperature") proto.odin_temperature = parse_double(val);
      else if (key == "odin.epsilon") proto.odin_epsilon = parse_double(val);
      else if (key == "energy.temperature") proto.energy_temperature = parse_double(val);
      else if (key == "detectors") detector_names = split_list(val);
      else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : split_list(val)) cfg.seeds.push_back(std::stoull(s));
      } else if (key == "variant") {
        if (val == "ca_minus") cfg.variant = Variant::ca_minus;
        else if (val == "ca_plus") cfg.variant = Variant::ca_plus;
        else throw std::runtime_error("variant must be ca_minus or ca_plus");
      } else if (key == "out_dir") cfg.out_dir = val;
      else throw std::runtime_error("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config key '" + key + "': malformed value '" + val + "'");
    }
  }
  if (cfg.variant == Variant::ca_plus) cfg.chain.regularizer = RegKind::reconstruction;
  else if (cfg.chain.regularizer == RegKind::reconstruction)
    cfg.chain.regularizer = RegKind::data_free;
  for (const auto& name : detector_names) {
    DetectorKind d = proto;
    d.name = name;
    cfg.detectors.push_back(d);
  }
  return cfg;
}

}  // namespace ca
