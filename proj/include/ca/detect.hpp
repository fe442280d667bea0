#pragma once

#include <span>
#include <string>
#include <vector>

#include "ca/data.hpp"
#include "ca/distill.hpp"
#include "ca/network.hpp"

namespace ca {

// All scores follow "higher = more OOD".
double score_msp(const Mlp& net, std::span<const double> x);
double score_odin(const Mlp& net, std::span<const double> x, double temperature,
                  double epsilon);
double score_energy(const Mlp& net, std::span<const double> x, double temperature);
double score_ca(const Mlp& aux, std::span<const double> x);

struct DetectorKind {
  std::string name;               // msp | odin | energy | ca
  double odin_temperature = 1000.0;
  double odin_epsilon = 1e-3;
  double energy_temperature = 1.0;

  std::string describe() const;
};

struct ScoreSet {
  std::vector<double> scores;
  std::vector<char> is_ood;
  std::string detector;
  std::string params;
};

// Scores every mixture row with the chosen detector; `aux` is required for
// the ca detector, `net` for the rest.
ScoreSet score_mixture(const DetectorKind& kind, const Mlp* net, const Mlp* aux,
                       const Mixture& mix);

void save_scoreset(const ScoreSet& s, const std::string& path);
ScoreSet load_scoreset(const std::string& path);

}  // namespace ca
