#include "ca/amendment.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ca {

double alpha(double t, double a, double T) {
  if (a < 0.0) throw std::invalid_argument("alpha: a must be >= 0");
  if (T < 1.0) throw std::invalid_argument("alpha: T must be >= 1");
  if (t < 0.0 || t > T)
    throw std::invalid_argument("alpha: t=" + std::to_string(t) + " outside [0," +
                                std::to_string(T) + "]");
  if (a == 0.0) return 1.0;  // 0^0 = 1
  return std::pow(t / T, a);
}

std::vector<double> amend(std::span<const double> p, double t, double a, double T) {
  double s = std::accumulate(p.begin(), p.end(), 0.0);
  if (std::abs(s - 1.0) > 1e-6)
    throw std::invalid_argument("amend: input is not a probability vector (sum=" +
                                std::to_string(s) + ")");
  double al = alpha(t, a, T);
  double floor = (1.0 - al) / static_cast<double>(p.size());
  std::vector<double> q(p.size());
  for (std::size_t y = 0; y < p.size(); ++y) q[y] = floor + al * p[y];
  return q;
}

void amend_trajectory(Trajectory& traj, const Mlp& net, double a) {
  if (traj.dim != net.input_dim() || traj.class_count != net.class_count())
    throw std::invalid_argument("amend_trajectory: trajectory and network are incompatible");
  for (auto& r : traj.records) {
    auto p = net.predict_one(r.x);
    r.q = amend(p, r.t, a, traj.config.T);
  }
}

}  // namespace ca
