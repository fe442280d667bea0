#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ca {

// phi(a) = (a+1)(2a+1)/a^2; the factor through which the weight exponent
// enters the generalization bound. Undefined at a = 0 (pole).
double phi(double a);

struct BoundInputs {
  std::uint64_t M = 0;  // total synthesized samples, must equal N*(T+1)
  std::uint64_t N = 0;  // chains
  std::uint64_t T = 0;  // max transition time
  double R = 1.0;       // hypothesis-ball radius
  int K = 2;
  double delta = 0.05;
  double a = 10.0;

  void validate() const;
};

struct BoundResult {
  double capacity_term = 0.0;  // 620 R^2 log(32M) K^2 phi(a) / (4T sqrt(M^3) (K-1)^2)
  double confidence_term = 0.0;  // 9 / sqrt(N delta)
  double total() const { return capacity_term + confidence_term; }
};

BoundResult bound(const BoundInputs& in);

struct MonotoneCheck {
  bool strictly_decreasing = true;
  bool derivative_matches = true;     // central differences vs (-3a-2)/a^3
  double worst_pair_a = 0.0;          // left endpoint of the worst grid pair
  double worst_derivative_rel_err = 0.0;
};

MonotoneCheck check_phi_monotone(std::span<const double> grid);

struct SumBoundCheck {
  double lhs = 0.0;  // sum_{t=0}^{T} (1 - (t/T)^a)^2
  double rhs = 0.0;  // 2 T a^2 / ((a+1)(2a+1))
  bool holds = false;
};

SumBoundCheck check_sum_bound(double a, std::uint64_t T);

// r_t = 1 - (1 - 1/K) * alpha_t
double target_value(int K, double alpha_t);

}  // namespace ca
