#include "ca/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "ca/common.hpp"

namespace ca {

bool Dataset::labeled() const {
  return !labels.empty() && std::any_of(labels.begin(), labels.end(), [](int l) { return l >= 0; });
}

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = fnv1a_doubles(features);
  if (!labels.empty()) h = fnv1a(labels.data(), labels.size() * sizeof(int), h);
  return h;
}

std::vector<std::vector<double>> simplex_centers(int K, std::size_t d, double separation) {
  if (K < 2 || d < static_cast<std::size_t>(K))
    throw std::invalid_argument("simplex_centers requires K >= 2 and d >= K");
  // Vertices e_0..e_{K-1} scaled to the requested pairwise distance, then
  // recentered at the origin.
  double s = separation / std::sqrt(2.0);
  std::vector<std::vector<double>> centers(K, std::vector<double>(d, 0.0));
  for (int k = 0; k < K; ++k) centers[k][k] = s;
  std::vector<double> centroid(d, 0.0);
  for (const auto& c : centers)
    for (std::size_t j = 0; j < d; ++j) centroid[j] += c[j] / K;
  for (auto& c : centers)
    for (std::size_t j = 0; j < d; ++j) c[j] -= centroid[j];
  return centers;
}

Dataset gen_gaussian_blobs(int K, std::size_t n, std::size_t d, double separation,
                           std::uint64_t seed, const std::string& name) {
  if (K < 2 || n < static_cast<std::size_t>(K) || d < 2 || separation <= 0.0)
    throw std::invalid_argument("gen_gaussian_blobs: invalid arguments");
  auto centers = simplex_centers(K, d, separation);
  Dataset ds;
  ds.name = name;
  ds.n = n;
  ds.d = d;
  ds.class_count = K;
  ds.seed = seed;
  ds.generator = "blobs K=" + std::to_string(K) + " sep=" + fmt_double(separation);
  ds.features.resize(n * d);
  ds.labels.resize(n);
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    int k = static_cast<int>(i % K);  // balanced; sizes differ by at most 1
    ds.labels[i] = k;
    for (std::size_t j = 0; j < d; ++j)
      ds.features[i * d + j] = centers[k][j] + normal(rng);
  }
  return ds;
}

Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed, const std::string& name) {
  if (n < 2 || noise < 0.0) throw std::invalid_argument("gen_two_moons: invalid arguments");
  Dataset ds;
  ds.name = name;
  ds.n = n;
  ds.d = 2;
  ds.class_count = 2;
  ds.seed = seed;
  ds.generator = "two_moons noise=" + fmt_double(noise);
  ds.features.resize(n * 2);
  ds.labels.resize(n);
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double pi = 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i) {
    int k = static_cast<int>(i % 2);
    double theta = pi * uni(rng);
    double x, y;
    if (k == 0) {
      x = std::cos(theta);
      y = std::sin(theta);
    } else {
      x = 1.0 - std::cos(theta);
      y = 0.5 - std::sin(theta);
    }
    ds.features[i * 2] = x + noise * normal(rng);
    ds.features[i * 2 + 1] = y + noise * normal(rng);
    ds.labels[i] = k;
  }
  return ds;
}

Dataset gen_uniform_far(std::size_t n, std::size_t d, double range, std::uint64_t seed,
                        const std::string& name) {
  if (range <= 0.0) throw std::invalid_argument("gen_uniform_far: range must be positive");
  Dataset ds;
  ds.name = name;
  ds.n = n;
  ds.d = d;
  ds.class_count = 0;
  ds.seed = seed;
  ds.generator = "uniform_far range=" + fmt_double(range);
  ds.features.resize(n * d);
  ds.labels.assign(n, -1);
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> uni(-range, range);
  for (auto& v : ds.features) v = uni(rng);
  return ds;
}

Standardizer Standardizer::fit(const Dataset& ds) {
  if (ds.n == 0) throw std::invalid_argument("Standardizer::fit: empty dataset");
  Standardizer s;
  s.mean.assign(ds.d, 0.0);
  s.std_dev.assign(ds.d, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t j = 0; j < ds.d; ++j) s.mean[j] += ds.features[i * ds.d + j];
  for (auto& m : s.mean) m /= static_cast<double>(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t j = 0; j < ds.d; ++j) {
      double c = ds.features[i * ds.d + j] - s.mean[j];
      s.std_dev[j] += c * c;
    }
  for (auto& v : s.std_dev) {
    v = std::sqrt(v / static_cast<double>(ds.n));
    if (v < 1e-12) v = 1.0;  // constant coordinate
  }
  return s;
}

void Standardizer::apply(Dataset& ds) const {
  if (ds.d != mean.size())
    throw std::invalid_argument("Standardizer::apply: dimension mismatch");
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t j = 0; j < ds.d; ++j) {
      double& v = ds.features[i * ds.d + j];
      v = (v - mean[j]) / std_dev[j];
    }
}

Mixture assemble_mixture(const Dataset& id_test, const Dataset& ood) {
  if (id_test.d != ood.d)
    throw std::invalid_argument("assemble_mixture: feature width mismatch (" +
                                std::to_string(id_test.d) + " vs " + std::to_string(ood.d) + ")");
  if (id_test.n == 0 || ood.n == 0)
    throw std::invalid_argument("assemble_mixture: both ID and OOD sets must be non-empty");
  Mixture m;
  m.d = id_test.d;
  m.features = id_test.features;
  m.features.insert(m.features.end(), ood.features.begin(), ood.features.end());
  m.is_ood.assign(id_test.n, 0);
  m.is_ood.insert(m.is_ood.end(), ood.n, 1);
  return m;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# ca-dataset v1\n";
  out << "# name=" << ds.name << " n=" << ds.n << " d=" << ds.d << " K=" << ds.class_count
      << " seed=" << ds.seed << " generator=" << ds.generator << "\n";
  for (std::size_t i = 0; i < ds.n; ++i) {
    out << (ds.labels.empty() ? -1 : ds.labels[i]);
    for (std::size_t j = 0; j < ds.d; ++j) out << "," << fmt_double(ds.features[i * ds.d + j]);
    out << "\n";
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(in, line)) fail("empty file");
  ++lineno;
  if (line != "# ca-dataset v1") fail("bad magic line, expected '# ca-dataset v1'");
  if (!std::getline(in, line)) fail("missing header");
  ++lineno;
  Dataset ds;
  {
    if (line.rfind("# ", 0) != 0) fail("malformed header line");
    auto fields = split_ws(line.substr(2));
    for (std::size_t fi = 0; fi < fields.size(); ++fi) {
      const auto& f = fields[fi];
      auto eq = f.find('=');
      if (eq == std::string::npos) fail("malformed header field '" + f + "'");
      std::string key = f.substr(0, eq), val = f.substr(eq + 1);
      if (key == "name") ds.name = val;
      else if (key == "n") ds.n = std::stoull(val);
      else if (key == "d") ds.d = std::stoull(val);
      else if (key == "K") ds.class_count = std::stoi(val);
      else if (key == "seed") ds.seed = std::stoull(val);
      else if (key == "generator") {
        // generator string is the tail of the line, spaces included
        ds.generator = val;
        for (std::size_t gi = fi + 1; gi < fields.size(); ++gi) ds.generator += " " + fields[gi];
        break;
      } else fail("unknown header key '" + key + "'");
    }
  }
  ds.features.reserve(ds.n * ds.d);
  ds.labels.reserve(ds.n);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_char(line, ',');
    if (cells.size() != ds.d + 1)
      fail("expected " + std::to_string(ds.d + 1) + " cells, got " + std::to_string(cells.size()));
    ds.labels.push_back(std::stoi(cells[0]));
    for (std::size_t j = 1; j < cells.size(); ++j) ds.features.push_back(parse_double(cells[j]));
  }
  if (ds.labels.size() != ds.n) fail("row count does not match header n=" + std::to_string(ds.n));
  return ds;
}

}  // namespace ca
