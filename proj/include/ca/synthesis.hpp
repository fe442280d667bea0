#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ca/data.hpp"
#include "ca/network.hpp"

namespace ca {

enum class RegKind { none, data_free, reconstruction };

std::string reg_kind_name(RegKind k);
RegKind reg_kind_from_name(const std::string& s);

struct ChainConfig {
  int T = 1000;
  double rho = 0.05;
  double eta = 0.01;
  RegKind regularizer = RegKind::data_free;
  double beta_tv = 1e-3;
  double beta_l2 = 3e-8;
  double beta_f = 100.0;
  double beta_mse = 1.0;
  std::uint64_t seed = 1;
  int record_stride = 1;

  void validate() const;
};

struct TrajectoryRecord {
  int chain_id = 0;
  int t = 0;
  int label = 0;
  long anchor_index = -1;        // index into the ID dataset; -1 when unused
  std::vector<double> x;
  std::vector<double> q;         // amended target, empty until amendment runs
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  ChainConfig config;
  std::uint64_t net_fingerprint = 0;
  std::size_t dim = 0;
  int class_count = 0;
  int chains = 0;
};

// Data-free regularizer R-: total variation + l2 + feature-statistics match
// against the recorded pre-activation stats.
double reg_data_free(std::span<const double> x, const Mlp& net, const ActivationStats& stats,
                     double beta_tv, double beta_l2, double beta_f);

// Reconstruction regularizer R+: scaled MSE to a real ID anchor.
double reg_reconstruction(std::span<const double> x, std::span<const double> anchor,
                          double beta_mse);

// Standard-normal chain start, deterministic per (seed, chain_id).
std::vector<double> init_chain(std::uint64_t seed, int chain_id, std::size_t d_in);

// One transition: x + rho*grad log P(y|x) - rho*grad R(x) + eta*z.
// `anchor` must be set for the reconstruction regularizer.
std::vector<double> chain_step(std::span<const double> x_prev, int label, const Mlp& net,
                               const ActivationStats& stats, const ChainConfig& cfg,
                               std::span<const double> noise,
                               std::optional<std::span<const double>> anchor = std::nullopt,
                               int t = -1);

// Runs N chains; id_data required for the reconstruction regularizer.
Trajectory synthesize(const Mlp& net, const ActivationStats& stats, int N,
                      const ChainConfig& cfg, const Dataset* id_data = nullptr);

std::vector<int> recorded_times(int T, int stride);

void save_trajectory(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const std::string& path);

}  // namespace ca
