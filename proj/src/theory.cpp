#include "ca/theory.hpp"

#include <cmath>
#include <stdexcept>

namespace ca {

double phi(double a) {
  if (a <= 0.0) throw std::invalid_argument("phi: a must be positive (pole at 0)");
  return (a + 1.0) * (2.0 * a + 1.0) / (a * a);
}

void BoundInputs::validate() const {
  if (N == 0 || T == 0) throw std::invalid_argument("bound: N and T must be positive");
  if (M != N * (T + 1)) throw std::invalid_argument("bound: M must equal N*(T+1)");
  if (R <= 0.0) throw std::invalid_argument("bound: R must be positive");
  if (K < 2) throw std::invalid_argument("bound: K must be >= 2");
  if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("bound: delta must lie in (0,1)");
  if (a <= 0.0) throw std::invalid_argument("bound: a must be positive");
}

BoundResult bound(const BoundInputs& in) {
  in.validate();
  double M = static_cast<double>(in.M);
  double Km1 = static_cast<double>(in.K - 1);
  BoundResult r;
  r.capacity_term = 620.0 * in.R * in.R * std::log(32.0 * M) * in.K * in.K * phi(in.a) /
                    (4.0 * static_cast<double>(in.T) * std::sqrt(M * M * M) * Km1 * Km1);
  r.confidence_term = 9.0 / std::sqrt(static_cast<double>(in.N) * in.delta);
  return r;
}

MonotoneCheck check_phi_monotone(std::span<const double> grid) {
  MonotoneCheck out;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (!(phi(grid[i + 1]) < phi(grid[i]))) {
      out.strictly_decreasing = false;
      out.worst_pair_a = grid[i];
    }
  }
  for (double a : grid) {
    double h = a * 1e-6;
    double fd = (phi(a + h) - phi(a - h)) / (2.0 * h);
    double analytic = (-3.0 * a - 2.0) / (a * a * a);
    double rel = std::abs(fd - analytic) / std::abs(analytic);
    if (rel > out.worst_derivative_rel_err) out.worst_derivative_rel_err = rel;
    if (rel > 1e-6) {
      out.derivative_matches = false;
      out.worst_pair_a = a;
    }
  }
  return out;
}

SumBoundCheck check_sum_bound(double a, std::uint64_t T) {
  if (a <= 0.0 || T < 1) throw std::invalid_argument("check_sum_bound: need a > 0 and T >= 1");
  SumBoundCheck out;
  double Td = static_cast<double>(T);
  for (std::uint64_t t = 0; t <= T; ++t) {
    double u = 1.0 - std::pow(static_cast<double>(t) / Td, a);
    out.lhs += u * u;
  }
  out.rhs = 2.0 * Td * a * a / ((a + 1.0) * (2.0 * a + 1.0));
  out.holds = out.lhs >= out.rhs;
  return out;
}

double target_value(int K, double alpha_t) {
  if (K < 2) throw std::invalid_argument("target_value: K must be >= 2");
  if (alpha_t < 0.0 || alpha_t > 1.0)
    throw std::invalid_argument("target_value: alpha_t must lie in [0,1]");
  return 1.0 - (1.0 - 1.0 / static_cast<double>(K)) * alpha_t;
}

}  // namespace ca
