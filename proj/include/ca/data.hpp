#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ca {

// Flat row-major feature matrix with optional labels (label -1 = unlabeled).
struct Dataset {
  std::string name;
  std::size_t n = 0;
  std::size_t d = 0;
  int class_count = 0;  // 0 for unlabeled sets
  std::uint64_t seed = 0;
  std::string generator;  // config string recorded in the file header
  std::vector<double> features;  // n * d
  std::vector<int> labels;       // size n; -1 when unlabeled

  std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }
  bool labeled() const;
  std::uint64_t fingerprint() const;
};

Dataset gen_gaussian_blobs(int K, std::size_t n, std::size_t d, double separation,
                           std::uint64_t seed, const std::string& name = "blobs");
Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed,
                      const std::string& name = "two_moons");
Dataset gen_uniform_far(std::size_t n, std::size_t d, double range, std::uint64_t seed,
                        const std::string& name = "uniform_far");

// Regular-simplex cluster centers at pairwise distance `separation`, centered
// at the origin. Exposed for tests.
std::vector<std::vector<double>> simplex_centers(int K, std::size_t d, double separation);

// Per-coordinate affine map fit on an ID train split and applied everywhere.
struct Standardizer {
  std::vector<double> mean, std_dev;
  static Standardizer fit(const Dataset& ds);
  void apply(Dataset& ds) const;
};

struct Mixture {
  std::size_t d = 0;
  std::vector<double> features;  // (n_id + n_ood) * d, ID block first
  std::vector<char> is_ood;
  std::size_t size() const { return is_ood.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }
};

Mixture assemble_mixture(const Dataset& id_test, const Dataset& ood);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace ca
