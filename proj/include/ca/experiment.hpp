#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ca/data.hpp"
#include "ca/detect.hpp"
#include "ca/distill.hpp"
#include "ca/metrics.hpp"
#include "ca/network.hpp"
#include "ca/synthesis.hpp"

namespace ca {

struct BenchmarkSpec {
  int K = 4;
  std::size_t d = 8;
  double separation = 6.0;
  std::size_t train_n = 800;
  std::size_t test_n = 400;
  std::size_t near_n = 400;
  std::size_t far_n = 400;
  double far_range = 10.0;
};

enum class Variant { ca_minus, ca_plus };

struct ExperimentConfig {
  BenchmarkSpec benchmark;
  TrainConfig train;
  ChainConfig chain;
  int chains = 32;
  double a = 10.0;
  DistillConfig distill;
  std::vector<DetectorKind> detectors;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  Variant variant = Variant::ca_minus;
  std::string out_dir;

  void validate() const;
  std::string snapshot() const;  // flat key=value dump, the run's config record
};

struct BenchmarkData {
  Dataset id_train, id_test, near_ood, far_ood;  // standardized by ID-train stats
};

// Derived stage seeds so one run seed drives every stage independently.
std::uint64_t stage_seed(std::uint64_t run_seed, const char* stage);

BenchmarkData prepare_data(const BenchmarkSpec& spec, std::uint64_t run_seed);

struct SeedRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double id_accuracy = 0.0;
  Mlp standard;
  ActivationStats stats;
  Trajectory trajectory;
  Mlp aux;
  std::vector<EvalReport> reports;  // cfg.detectors x {near, far}
};

// Runs train -> synthesize -> amend -> distill -> score -> evaluate for one
// seed; writes stage artifacts under dir when non-empty.
SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& dir = "");

struct AggregateRow {
  std::string detector;
  std::string ood_name;
  double mean_auroc = 0.0, std_auroc = 0.0;
  double mean_detection_error = 0.0, std_detection_error = 0.0;
  std::size_t seeds = 0;
};

struct RunArtifacts {
  std::vector<SeedRun> seed_runs;
  std::vector<AggregateRow> aggregate;
  double mean_id_accuracy = 0.0;
  std::string summary_csv;
  std::string summary_text;
};

RunArtifacts run(const ExperimentConfig& cfg);

// (t, mean confidence over chains) per recorded time.
std::vector<std::pair<int, double>> confidence_curve(const Trajectory& traj, const Mlp& net);

struct AblationRow {
  double value = 0.0;      // a or T
  double mean_auroc = 0.0;  // ca detector, averaged over near+far and seeds
  double std_auroc = 0.0;
};

// Reuses one trajectory per seed across the whole a grid.
std::vector<AblationRow> ablation_a(const ExperimentConfig& cfg, std::span<const double> a_grid);
// Full rerun per T.
std::vector<AblationRow> ablation_T(const ExperimentConfig& cfg, std::span<const int> t_grid);

std::string ablation_csv(const std::vector<AblationRow>& rows, const std::string& param_name);

}  // namespace ca
