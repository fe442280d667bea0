#pragma once

#include <span>
#include <vector>

#include "ca/network.hpp"
#include "ca/synthesis.hpp"

namespace ca {

// Weight alpha(t) = (t/T)^a, with 0^0 = 1 so a = 0 trusts the network at
// every time step.
double alpha(double t, double a, double T);

// Blend toward uniform: q_y = (1 - alpha)/K + alpha * p_y.
std::vector<double> amend(std::span<const double> p, double t, double a, double T);

// Fills record.q for every trajectory record using the network's current
// predictions.
void amend_trajectory(Trajectory& traj, const Mlp& net, double a);

}  // namespace ca
