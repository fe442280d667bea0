#include "ca/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ca/amendment.hpp"
#include "ca/common.hpp"

namespace ca {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("experiment: at least one seed required");
  if (chains < 1) throw std::invalid_argument("experiment: chains must be >= 1");
  if (a < 0.0) throw std::invalid_argument("experiment: a must be >= 0");
  chain.validate();
  if (variant == Variant::ca_plus && chain.regularizer != RegKind::reconstruction)
    throw std::invalid_argument("experiment: ca_plus requires the reconstruction regularizer");
  if (variant == Variant::ca_minus && chain.regularizer == RegKind::reconstruction)
    throw std::invalid_argument("experiment: ca_minus cannot use the reconstruction regularizer");
}

std::string ExperimentConfig::snapshot() const {
  std::string s;
  s += "benchmark.K=" + std::to_string(benchmark.K) + "\n";
  s += "benchmark.d=" + std::to_string(benchmark.d) + "\n";
  s += "benchmark.separation=" + fmt_double(benchmark.separation) + "\n";
  s += "benchmark.train_n=" + std::to_string(benchmark.train_n) + "\n";
  s += "benchmark.test_n=" + std::to_string(benchmark.test_n) + "\n";
  s += "benchmark.near_n=" + std::to_string(benchmark.near_n) + "\n";
  s += "benchmark.far_n=" + std::to_string(benchmark.far_n) + "\n";
  s += "benchmark.far_range=" + fmt_double(benchmark.far_range) + "\n";
  s += "train.epochs=" + std::to_string(train.epochs) + "\n";
  s += "train.batch_size=" + std::to_string(train.batch_size) + "\n";
  s += "train.learning_rate=" + fmt_double(train.learning_rate) + "\n";
  s += "train.momentum=" + fmt_double(train.momentum) + "\n";
  s += "train.weight_decay=" + fmt_double(train.weight_decay) + "\n";
  s += "chain.T=" + std::to_string(chain.T) + "\n";
  s += "chain.rho=" + fmt_double(chain.rho) + "\n";
  s += "chain.eta=" + fmt_double(chain.eta) + "\n";
  s += "chain.regularizer=" + reg_kind_name(chain.regularizer) + "\n";
  s += "chain.beta_tv=" + fmt_double(chain.beta_tv) + "\n";
  s += "chain.beta_l2=" + fmt_double(chain.beta_l2) + "\n";
  s += "chain.beta_f=" + fmt_double(chain.beta_f) + "\n";
  s += "chain.beta_mse=" + fmt_double(chain.beta_mse) + "\n";
  s += "chain.record_stride=" + std::to_string(chain.record_stride) + "\n";
  s += "chain.chains=" + std::to_string(chains) + "\n";
  s += "amend.a=" + fmt_double(a) + "\n";
  s += "distill.epochs=" + std::to_string(distill.epochs) + "\n";
  s += "distill.batch_size=" + std::to_string(distill.batch_size) + "\n";
  s += "distill.learning_rate=" + fmt_double(distill.learning_rate) + "\n";
  s += "distill.momentum=" + fmt_double(distill.momentum) + "\n";
  s += "distill.weight_decay=" + fmt_double(distill.weight_decay) + "\n";
  s += "distill.reverse_kl=" + std::string(distill.reverse_kl ? "true" : "false") + "\n";
  s += "variant=" + std::string(variant == Variant::ca_plus ? "ca_plus" : "ca_minus") + "\n";
  s += "detectors=";
  for (std::size_t i = 0; i < detectors.size(); ++i)
    s += (i ? "," : "") + detectors[i].name;
  s += "\nseeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i)
    s += (i ? "," : "") + std::to_string(seeds[i]);
  s += "\n";
  return s;
}

std::uint64_t stage_seed(std::uint64_t run_seed, const char* stage) {
  return splitmix64(run_seed ^ fnv1a(stage, std::string(stage).size()));
}

BenchmarkData prepare_data(const BenchmarkSpec& spec, std::uint64_t run_seed) {
  BenchmarkData b;
  b.id_train = gen_gaussian_blobs(spec.K, spec.train_n, spec.d, spec.separation,
                                  stage_seed(run_seed, "id_train"), "id_train");
  b.id_test = gen_gaussian_blobs(spec.K, spec.test_n, spec.d, spec.separation,
                                 stage_seed(run_seed, "id_test"), "id_test");
  // near-OOD: same cluster geometry, every center shifted by half the
  // separation along the all-ones direction; labels dropped
  b.near_ood = gen_gaussian_blobs(spec.K, spec.near_n, spec.d, spec.separation,
                                  stage_seed(run_seed, "near_ood"), "near_ood");
  double shift = 0.5 * spec.separation / std::sqrt(static_cast<double>(spec.d));
  for (auto& v : b.near_ood.features) v += shift;
  b.near_ood.labels.assign(b.near_ood.n, -1);
  b.near_ood.class_count = 0;
  b.far_ood = gen_uniform_far(spec.far_n, spec.d, spec.far_range,
                              stage_seed(run_seed, "far_ood"), "far_ood");

  Standardizer std_map = Standardizer::fit(b.id_train);
  std_map.apply(b.id_train);
  std_map.apply(b.id_test);
  std_map.apply(b.near_ood);
  std_map.apply(b.far_ood);
  return b;
}

SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& dir) {
  cfg.validate();
  SeedRun out;
  out.seed = seed;
  try {
    if (!dir.empty()) fs::create_directories(dir);
    BenchmarkData data = prepare_data(cfg.benchmark, seed);

    std::vector<std::size_t> dims = {cfg.benchmark.d, 64, 64,
                                     static_cast<std::size_t>(cfg.benchmark.K)};
    TrainConfig tc = cfg.train;
    tc.seed = stage_seed(seed, "train");
    out.standard = Mlp(dims, tc.seed);
    TrainResult tr = train_standard(out.standard, data.id_train, tc);
    out.stats = tr.stats;
    out.id_accuracy = accuracy_on(out.standard, data.id_test);

    ChainConfig cc = cfg.chain;
    cc.seed = stage_seed(seed, "chain");
    const Dataset* anchor_data =
        cfg.variant == Variant::ca_plus ? &data.id_train : nullptr;
    out.trajectory = synthesize(out.standard, out.stats, cfg.chains, cc, anchor_data);

    amend_trajectory(out.trajectory, out.standard, cfg.a);

    DistillConfig dc = cfg.distill;
    dc.seed = stage_seed(seed, "distill");
    if (dc.layer_dims.empty()) dc.layer_dims = dims;
    DistillResult dr = distill(out.trajectory, dc);
    out.aux = dr.net;

    Mixture near_mix = assemble_mixture(data.id_test, data.near_ood);
    Mixture far_mix = assemble_mixture(data.id_test, data.far_ood);
    for (const auto& det : cfg.detectors) {
      for (const auto* mix : {&near_mix, &far_mix}) {
        ScoreSet scores = score_mixture(det, &out.standard, &out.aux, *mix);
        EvalReport rep;
        rep.detector = det.name;
        rep.ood_name = (mix == &near_mix) ? "near" : "far";
        rep.auroc = auroc(scores.scores, scores.is_ood);
        rep.detection_error = detection_error(scores.scores, scores.is_ood);
        rep.id_accuracy = out.id_accuracy;
        rep.n_id = data.id_test.n;
        rep.n_ood = mix->size() - data.id_test.n;
        rep.fingerprint = std::to_string(out.standard.fingerprint());
        out.reports.push_back(rep);
        if (!dir.empty()) {
          save_scoreset(scores, dir + "/scores_" + det.name + "_" + rep.ood_name + ".txt");
          save_report(rep, dir + "/report_" + det.name + "_" + rep.ood_name + ".txt");
        }
      }
    }
    if (!dir.empty()) {
      save_checkpoint(out.standard, out.stats, tc.seed, "standard", dir + "/standard.ckpt");
      save_checkpoint(out.aux, {}, dc.seed, "auxiliary", dir + "/aux.ckpt");
      save_trajectory(out.trajectory, dir + "/trajectory.txt");
      save_dataset(data.id_train, dir + "/id_train.csv");
      save_dataset(data.id_test, dir + "/id_test.csv");
      save_dataset(data.near_ood, dir + "/near_ood.csv");
      save_dataset(data.far_ood, dir + "/far_ood.csv");
      auto curve = confidence_curve(out.trajectory, out.standard);
      std::ofstream cf(dir + "/confidence_curve.csv");
      cf << "t,mean_confidence\n";
      for (auto [t, c] : curve) cf << t << "," << fmt_double(c) << "\n";
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  if (v.size() > 1) {
    for (double x : v) s += (x - m) * (x - m);
    s = std::sqrt(s / static_cast<double>(v.size() - 1));
  }
  return {m, s};
}

}  // namespace

RunArtifacts run(const ExperimentConfig& cfg) {
  cfg.validate();
  RunArtifacts art;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    std::ofstream snap(cfg.out_dir + "/config.txt");
    snap << cfg.snapshot();
  }
  for (auto seed : cfg.seeds) {
    std::string dir =
        cfg.out_dir.empty() ? "" : cfg.out_dir + "/seed_" + std::to_string(seed);
    art.seed_runs.push_back(run_seed(cfg, seed, dir));
  }

  std::vector<double> accs;
  for (const auto& sr : art.seed_runs)
    if (sr.ok) accs.push_back(sr.id_accuracy);
  if (!accs.empty()) art.mean_id_accuracy = mean_std(accs).first;

  std::string csv = "detector,ood,mean_auroc,std_auroc,mean_detection_error,"
                    "std_detection_error,mean_id_accuracy,seeds\n";
  std::string txt;
  for (const auto& det : cfg.detectors) {
    for (const char* ood : {"near", "far"}) {
      std::vector<double> aurocs, derrs;
      for (const auto& sr : art.seed_runs) {
        if (!sr.ok) continue;
        for (const auto& rep : sr.reports)
          if (rep.detector == det.name && rep.ood_name == ood) {
            aurocs.push_back(rep.auroc);
            derrs.push_back(rep.detection_error);
          }
      }
      if (aurocs.empty()) continue;
      AggregateRow row;
      row.detector = det.name;
      row.ood_name = ood;
      std::tie(row.mean_auroc, row.std_auroc) = mean_std(aurocs);
      std::tie(row.mean_detection_error, row.std_detection_error) = mean_std(derrs);
      row.seeds = aurocs.size();
      art.aggregate.push_back(row);
      csv += row.detector + "," + row.ood_name + "," + fmt_double(row.mean_auroc) + "," +
             fmt_double(row.std_auroc) + "," + fmt_double(row.mean_detection_error) + "," +
             fmt_double(row.std_detection_error) + "," + fmt_double(art.mean_id_accuracy) + "," +
             std::to_string(row.seeds) + "\n";
      txt += row.detector + " / " + row.ood_name + "-OOD: AUROC " + fmt_double(row.mean_auroc) +
             " +/- " + fmt_double(row.std_auroc) + ", detection error " +
             fmt_double(row.mean_detection_error) + "\n";
    }
  }
  for (const auto& sr : art.seed_runs)
    if (!sr.ok) txt += "seed " + std::to_string(sr.seed) + " FAILED: " + sr.error + "\n";
  txt += "mean ID accuracy: " + fmt_double(art.mean_id_accuracy) + "\n";
  art.summary_csv = csv;
  art.summary_text = txt;
  if (!cfg.out_dir.empty()) {
    std::ofstream(cfg.out_dir + "/summary.csv") << csv;
    std::ofstream(cfg.out_dir + "/summary.txt") << txt;
  }
  return art;
}

std::vector<std::pair<int, double>> confidence_curve(const Trajectory& traj, const Mlp& net) {
  if (traj.records.empty()) throw std::invalid_argument("confidence_curve: empty trajectory");
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& r : traj.records) {
    auto& slot = acc[r.t];
    slot.first += net.confidence(r.x);
    ++slot.second;
  }
  std::vector<std::pair<int, double>> out;
  for (const auto& [t, slot] : acc)
    out.emplace_back(t, slot.first / static_cast<double>(slot.second));
  return out;
}

namespace {

// Mean CA AUROC over the near and far mixtures for one distilled network.
double ca_mean_auroc(const Mlp& aux, const BenchmarkData& data) {
  DetectorKind ca_det{.name = "ca"};
  Mixture near_mix = assemble_mixture(data.id_test, data.near_ood);
  Mixture far_mix = assemble_mixture(data.id_test, data.far_ood);
  ScoreSet sn = score_mixture(ca_det, nullptr, &aux, near_mix);
  ScoreSet sf = score_mixture(ca_det, nullptr, &aux, far_mix);
  return 0.5 * (auroc(sn.scores, sn.is_ood) + auroc(sf.scores, sf.is_ood));
}

}  // namespace

std::vector<AblationRow> ablation_a(const ExperimentConfig& cfg, std::span<const double> a_grid) {
  cfg.validate();
  if (a_grid.empty()) throw std::invalid_argument("ablation_a: empty grid");
  std::vector<std::vector<double>> per_a(a_grid.size());
  for (auto seed : cfg.seeds) {
    BenchmarkData data = prepare_data(cfg.benchmark, seed);
    std::vector<std::size_t> dims = {cfg.benchmark.d, 64, 64,
                                     static_cast<std::size_t>(cfg.benchmark.K)};
    TrainConfig tc = cfg.train;
    tc.seed = stage_seed(seed, "train");
    Mlp net(dims, tc.seed);
    TrainResult tr = train_standard(net, data.id_train, tc);
    ChainConfig cc = cfg.chain;
    cc.seed = stage_seed(seed, "chain");
    const Dataset* anchor_data =
        cfg.variant == Variant::ca_plus ? &data.id_train : nullptr;
    // synthesis does not depend on a, so one trajectory serves the grid
    Trajectory traj = synthesize(net, tr.stats, cfg.chains, cc, anchor_data);
    for (std::size_t i = 0; i < a_grid.size(); ++i) {
      Trajectory t = traj;
      amend_trajectory(t, net, a_grid[i]);
      DistillConfig dc = cfg.distill;
      dc.seed = stage_seed(seed, "distill");
      if (dc.layer_dims.empty()) dc.layer_dims = dims;
      DistillResult dr = distill(t, dc);
      per_a[i].push_back(ca_mean_auroc(dr.net, data));
    }
  }
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < a_grid.size(); ++i) {
    AblationRow r;
    r.value = a_grid[i];
    std::tie(r.mean_auroc, r.std_auroc) = mean_std(per_a[i]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<AblationRow> ablation_T(const ExperimentConfig& cfg, std::span<const int> t_grid) {
  cfg.validate();
  if (t_grid.empty()) throw std::invalid_argument("ablation_T: empty grid");
  std::vector<AblationRow> rows;
  for (int T : t_grid) {
    if (T < 1) throw std::invalid_argument("ablation_T: grid values must be >= 1");
    ExperimentConfig c = cfg;
    c.chain.T = T;
    c.chain.record_stride = std::min(cfg.chain.record_stride, T);
    std::vector<double> vals;
    for (auto seed : c.seeds) {
      SeedRun sr = run_seed(c, seed);
      if (!sr.ok) throw std::runtime_error("ablation_T: seed " + std::to_string(seed) +
                                           " failed: " + sr.error);
      BenchmarkData data = prepare_data(c.benchmark, seed);
      vals.push_back(ca_mean_auroc(sr.aux, data));
    }
    AblationRow r;
    r.value = static_cast<double>(T);
    std::tie(r.mean_auroc, r.std_auroc) = mean_std(vals);
    rows.push_back(r);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, const std::string& param_name) {
  std::string s = param_name + ",mean_auroc,std_auroc\n";
  for (const auto& r : rows)
    s += fmt_double(r.value) + "," + fmt_double(r.mean_auroc) + "," + fmt_double(r.std_auroc) + "\n";
  return s;
}

}  // namespace ca
