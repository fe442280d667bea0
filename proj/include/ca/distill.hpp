#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ca/network.hpp"
#include "ca/synthesis.hpp"

namespace ca {

struct DistillConfig {
  int epochs = 300;
  int batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  // Strong decay keeps the auxiliary net's logit gaps small away from the
  // synthesized samples; without it the piecewise-linear extrapolation is
  // confidently peaked far from the data and inverts the OOD ranking.
  double weight_decay = 0.04;
  std::uint64_t seed = 1;
  bool reverse_kl = false;                // experiment flag; default is KL(P_phi || Q)
  std::vector<std::size_t> layer_dims;    // empty = same architecture as the standard net
};

// D_KL(p || q) = sum_y p_y log(p_y / q_y), with 0 log 0 = 0.
double kl_loss(std::span<const double> p, std::span<const double> q);

struct DistillResult {
  Mlp net;
  double initial_mean_kl = 0.0;
  double final_mean_kl = 0.0;
};

// Trains the auxiliary network on trajectory samples against their amended
// targets (record.q must be populated).
DistillResult distill(const Trajectory& traj, const DistillConfig& cfg);

// (p_id, p_ood) from the auxiliary network; p_ood is the OOD score.
std::pair<double, double> binary_classify(const Mlp& aux, std::span<const double> x);

}  // namespace ca
