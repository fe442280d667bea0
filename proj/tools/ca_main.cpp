#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ca/amendment.hpp"
#include "ca/common.hpp"
#include "ca/config.hpp"
#include "ca/detect.hpp"
#include "ca/distill.hpp"
#include "ca/experiment.hpp"
#include "ca/metrics.hpp"
#include "ca/network.hpp"
#include "ca/svg.hpp"
#include "ca/synthesis.hpp"
#include "ca/theory.hpp"

namespace fs = std::filesystem;
using namespace ca;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig config_from_cli(const std::string& config_path,
                                 const std::vector<std::string>& overrides,
                                 const std::string& out_dir) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
    kv = load_config_file(config_path);
  }
  apply_overrides(kv, overrides);
  ExperimentConfig cfg = build_experiment_config(kv);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  return cfg;
}

std::vector<std::pair<double, double>> read_xy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing CSV file: " + path);
  std::vector<std::pair<double, double>> pts;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_char(line, ',');
    if (cells.size() < 2) throw std::runtime_error(path + ": malformed row '" + line + "'");
    pts.emplace_back(parse_double(cells[0]), parse_double(cells[1]));
  }
  return pts;
}

void emit_plots(const std::string& run_dir) {
  // alpha(t) family and phi(a) need no inputs
  const double a_grid[] = {0.0, 0.1, 1.0, 10.0, 100.0};
  std::vector<PlotSeries> alpha_series;
  for (double a : a_grid) {
    PlotSeries s;
    s.label = "a=" + fmt_double(a);
    for (int t = 0; t <= 1000; t += 10)
      s.points.emplace_back(t, alpha(t, a, 1000.0));
    alpha_series.push_back(std::move(s));
  }
  write_svg(render_line_plot("weight function alpha(t)", "t", "alpha", alpha_series),
            run_dir + "/alpha_curves.svg");

  PlotSeries phi_s;
  phi_s.label = "phi(a)";
  for (double a = 0.5; a <= 20.0 + 1e-9; a += 0.25) phi_s.points.emplace_back(a, phi(a));
  write_svg(render_line_plot("phi(a)", "a", "phi", {phi_s}), run_dir + "/phi_curve.svg");

  // confidence curve from the first seed directory that has one
  std::string conf_csv;
  std::vector<std::string> seed_dirs;
  if (fs::exists(run_dir))
    for (const auto& e : fs::directory_iterator(run_dir))
      if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0)
        seed_dirs.push_back(e.path().string());
  std::sort(seed_dirs.begin(), seed_dirs.end());
  for (const auto& d : seed_dirs)
    if (fs::exists(d + "/confidence_curve.csv")) {
      conf_csv = d + "/confidence_curve.csv";
      break;
    }
  if (conf_csv.empty())
    throw std::runtime_error("missing CSV file: " + run_dir + "/seed_*/confidence_curve.csv");
  PlotSeries cs;
  cs.label = "mean confidence";
  cs.points = read_xy_csv(conf_csv);
  write_svg(render_line_plot("confidence over synthesis time", "t", "confidence", {cs}),
            run_dir + "/confidence_curve.svg");

  for (const char* name : {"ablation_a", "ablation_t"}) {
    std::string csv = run_dir + "/" + name + ".csv";
    if (!fs::exists(csv)) continue;
    PlotSeries s;
    s.label = "ca mean AUROC";
    s.points = read_xy_csv(csv);
    write_svg(render_line_plot(name, name[9] == 'a' ? "a" : "T", "AUROC", {s}),
              run_dir + "/" + std::string(name) + ".svg");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-amendment OOD detection toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path, out_dir;
  std::vector<std::string> overrides;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset CSV");
  std::string gen_kind = "blobs";
  int gen_K = 4;
  std::size_t gen_n = 800, gen_d = 8;
  double gen_sep = 6.0, gen_noise = 0.1, gen_range = 10.0;
  std::uint64_t gen_seed = 1;
  gen->add_option("--kind", gen_kind, "blobs|moons|uniform")->check(CLI::IsMember({"blobs", "moons", "uniform"}));
  gen->add_option("--K", gen_K);
  gen->add_option("--n", gen_n);
  gen->add_option("--d", gen_d);
  gen->add_option("--separation", gen_sep);
  gen->add_option("--noise", gen_noise);
  gen->add_option("--range", gen_range);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", out_path)->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the standard network on a dataset CSV");
  std::string train_data;
  TrainConfig train_cfg;
  std::vector<std::size_t> hidden = {64, 64};
  train_cmd->add_option("--data", train_data)->required();
  train_cmd->add_option("--epochs", train_cfg.epochs);
  train_cmd->add_option("--batch-size", train_cfg.batch_size);
  train_cmd->add_option("--lr", train_cfg.learning_rate);
  train_cmd->add_option("--momentum", train_cfg.momentum);
  train_cmd->add_option("--weight-decay", train_cfg.weight_decay);
  train_cmd->add_option("--seed", train_cfg.seed);
  train_cmd->add_option("--hidden", hidden, "hidden layer widths");
  train_cmd->add_option("--out", out_path)->required();

  // synthesize
  auto* synth = app.add_subcommand("synthesize", "Run the Markov-chain sample synthesis");
  std::string synth_ckpt, synth_id_data;
  ChainConfig chain_cfg;
  int synth_chains = 32;
  std::string synth_reg = "data_free";
  synth->add_option("--checkpoint", synth_ckpt)->required();
  synth->add_option("--chains", synth_chains);
  synth->add_option("--T", chain_cfg.T);
  synth->add_option("--rho", chain_cfg.rho);
  synth->add_option("--eta", chain_cfg.eta);
  synth->add_option("--regularizer", synth_reg, "none|data_free|reconstruction");
  synth->add_option("--beta-tv", chain_cfg.beta_tv);
  synth->add_option("--beta-l2", chain_cfg.beta_l2);
  synth->add_option("--beta-f", chain_cfg.beta_f);
  synth->add_option("--beta-mse", chain_cfg.beta_mse);
  synth->add_option("--stride", chain_cfg.record_stride);
  synth->add_option("--seed", chain_cfg.seed);
  synth->add_option("--id-data", synth_id_data, "ID dataset CSV (reconstruction regularizer)");
  synth->add_option("--out", out_path)->required();

  // amend
  auto* amend_cmd = app.add_subcommand("amend", "Attach amended label distributions to a trajectory");
  std::string amend_traj, amend_ckpt;
  double amend_a = 10.0;
  amend_cmd->add_option("--trajectory", amend_traj)->required();
  amend_cmd->add_option("--checkpoint", amend_ckpt)->required();
  amend_cmd->add_option("--a", amend_a);
  amend_cmd->add_option("--out", out_path)->required();

  // distill
  auto* distill_cmd = app.add_subcommand("distill", "Distill an auxiliary network from an amended trajectory");
  std::string distill_traj;
  DistillConfig distill_cfg;
  distill_cmd->add_option("--trajectory", distill_traj)->required();
  distill_cmd->add_option("--epochs", distill_cfg.epochs);
  distill_cmd->add_option("--batch-size", distill_cfg.batch_size);
  distill_cmd->add_option("--lr", distill_cfg.learning_rate);
  distill_cmd->add_option("--momentum", distill_cfg.momentum);
  distill_cmd->add_option("--seed", distill_cfg.seed);
  distill_cmd->add_flag("--reverse-kl", distill_cfg.reverse_kl);
  distill_cmd->add_option("--out", out_path)->required();

  // score
  auto* score_cmd = app.add_subcommand("score", "Score an ID/OOD mixture with one detector");
  std::string score_det = "msp", score_ckpt, score_aux, score_id, score_ood;
  DetectorKind score_kind;
  score_cmd->add_option("--detector", score_det, "msp|odin|energy|ca")->check(CLI::IsMember({"msp", "odin", "energy", "ca"}));
  score_cmd->add_option("--checkpoint", score_ckpt);
  score_cmd->add_option("--aux", score_aux);
  score_cmd->add_option("--id", score_id)->required();
  score_cmd->add_option("--ood", score_ood)->required();
  score_cmd->add_option("--odin-temperature", score_kind.odin_temperature);
  score_cmd->add_option("--odin-epsilon", score_kind.odin_epsilon);
  score_cmd->add_option("--energy-temperature", score_kind.energy_temperature);
  score_cmd->add_option("--out", out_path)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Compute AUROC / detection error from a score set");
  std::string eval_scores;
  eval_cmd->add_option("--scores", eval_scores)->required();
  eval_cmd->add_option("--out", out_path);

  // run
  auto* run_cmd = app.add_subcommand("run", "Full pipeline: train, synthesize, amend, distill, evaluate");
  run_cmd->add_option("--config", config_path);
  run_cmd->add_option("--override", overrides, "key=value config overrides");
  run_cmd->add_option("--out", out_dir)->required();

  // ablate-a
  auto* abla = app.add_subcommand("ablate-a", "Sweep the weight exponent a, reusing trajectories");
  std::vector<double> a_grid = {0.0, 0.1, 1.0, 10.0, 100.0};
  abla->add_option("--config", config_path);
  abla->add_option("--override", overrides);
  abla->add_option("--grid", a_grid);
  abla->add_option("--out", out_dir)->required();

  // ablate-t
  auto* ablt = app.add_subcommand("ablate-t", "Sweep the maximum transition time T");
  std::vector<int> t_grid = {100, 500, 1000, 1500, 2000};
  ablt->add_option("--config", config_path);
  ablt->add_option("--override", overrides);
  ablt->add_option("--grid", t_grid);
  ablt->add_option("--out", out_dir)->required();

  // bound
  auto* bound_cmd = app.add_subcommand("bound", "Evaluate the generalization bound and phi(a)");
  BoundInputs bi;
  bi.N = 100; bi.T = 1000; bi.R = 1.0; bi.K = 10; bi.delta = 0.05; bi.a = 10.0;
  bound_cmd->add_option("--a", bi.a);
  bound_cmd->add_option("--N", bi.N);
  bound_cmd->add_option("--T", bi.T);
  bound_cmd->add_option("--R", bi.R);
  bound_cmd->add_option("--K", bi.K);
  bound_cmd->add_option("--delta", bi.delta);

  // curves
  auto* curves_cmd = app.add_subcommand("curves", "Render SVG plots for a run directory");
  curves_cmd->add_option("--run-dir", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      Dataset ds;
      if (gen_kind == "blobs") ds = gen_gaussian_blobs(gen_K, gen_n, gen_d, gen_sep, gen_seed);
      else if (gen_kind == "moons") ds = gen_two_moons(gen_n, gen_noise, gen_seed);
      else ds = gen_uniform_far(gen_n, gen_d, gen_range, gen_seed);
      save_dataset(ds, out_path);
      std::cout << "wrote " << out_path << " (" << ds.n << " rows, d=" << ds.d << ")\n";
    } else if (*train_cmd) {
      Dataset ds = load_dataset(train_data);
      std::vector<std::size_t> dims = {ds.d};
      dims.insert(dims.end(), hidden.begin(), hidden.end());
      dims.push_back(static_cast<std::size_t>(ds.class_count));
      Mlp net(dims, train_cfg.seed);
      TrainResult tr = train_standard(net, ds, train_cfg);
      save_checkpoint(net, tr.stats, train_cfg.seed, "standard", out_path);
      std::cout << "final training accuracy " << fmt_double(tr.final_accuracy) << ", loss "
                << fmt_double(tr.final_loss) << "\n";
    } else if (*synth) {
      chain_cfg.regularizer = reg_kind_from_name(synth_reg);
      Checkpoint ck = load_checkpoint(synth_ckpt);
      Dataset id_data;
      const Dataset* idp = nullptr;
      if (!synth_id_data.empty()) {
        id_data = load_dataset(synth_id_data);
        idp = &id_data;
      }
      Trajectory traj = synthesize(ck.net, ck.stats, synth_chains, chain_cfg, idp);
      save_trajectory(traj, out_path);
      std::cout << "wrote " << traj.records.size() << " records to " << out_path << "\n";
    } else if (*amend_cmd) {
      Trajectory traj = load_trajectory(amend_traj);
      Checkpoint ck = load_checkpoint(amend_ckpt);
      amend_trajectory(traj, ck.net, amend_a);
      save_trajectory(traj, out_path);
      std::cout << "amended " << traj.records.size() << " records with a=" << fmt_double(amend_a)
                << "\n";
    } else if (*distill_cmd) {
      Trajectory traj = load_trajectory(distill_traj);
      DistillResult dr = distill(traj, distill_cfg);
      save_checkpoint(dr.net, {}, distill_cfg.seed, "auxiliary", out_path);
      std::cout << "mean KL " << fmt_double(dr.initial_mean_kl) << " -> "
                << fmt_double(dr.final_mean_kl) << "\n";
    } else if (*score_cmd) {
      score_kind.name = score_det;
      Checkpoint net_ck, aux_ck;
      const Mlp* net = nullptr;
      const Mlp* aux = nullptr;
      if (!score_ckpt.empty()) { net_ck = load_checkpoint(score_ckpt); net = &net_ck.net; }
      if (!score_aux.empty()) { aux_ck = load_checkpoint(score_aux); aux = &aux_ck.net; }
      Mixture mix = assemble_mixture(load_dataset(score_id), load_dataset(score_ood));
      ScoreSet scores = score_mixture(score_kind, net, aux, mix);
      save_scoreset(scores, out_path);
      std::cout << "wrote " << scores.scores.size() << " scores to " << out_path << "\n";
    } else if (*eval_cmd) {
      ScoreSet s = load_scoreset(eval_scores);
      EvalReport rep;
      rep.detector = s.detector;
      rep.ood_name = "mixture";
      rep.auroc = auroc(s.scores, s.is_ood);
      rep.detection_error = detection_error(s.scores, s.is_ood);
      rep.n_ood = std::count(s.is_ood.begin(), s.is_ood.end(), 1);
      rep.n_id = s.is_ood.size() - rep.n_ood;
      std::cout << rep.to_text();
      if (!out_path.empty()) save_report(rep, out_path);
    } else if (*run_cmd) {
      ExperimentConfig cfg = config_from_cli(config_path, overrides, out_dir);
      RunArtifacts art = run(cfg);
      std::cout << art.summary_text;
      for (const auto& sr : art.seed_runs)
        if (!sr.ok) {
          std::cerr << "seed " << sr.seed << " failed: " << sr.error << "\n";
          return 2;
        }
    } else if (*abla) {
      ExperimentConfig cfg = config_from_cli(config_path, overrides, out_dir);
      auto rows = ablation_a(cfg, a_grid);
      fs::create_directories(out_dir);
      std::string csv = ablation_csv(rows, "a");
      std::ofstream(out_dir + "/ablation_a.csv") << csv;
      std::cout << csv;
    } else if (*ablt) {
      ExperimentConfig cfg = config_from_cli(config_path, overrides, out_dir);
      auto rows = ablation_T(cfg, t_grid);
      fs::create_directories(out_dir);
      std::string csv = ablation_csv(rows, "T");
      std::ofstream(out_dir + "/ablation_t.csv") << csv;
      std::cout << csv;
    } else if (*bound_cmd) {
      bi.M = bi.N * (bi.T + 1);
      BoundResult r = bound(bi);
      std::cout << "phi(" << fmt_double(bi.a) << ") = " << fmt_double(phi(bi.a)) << "\n";
      std::cout << "capacity_term = " << fmt_double(r.capacity_term) << "\n";
      std::cout << "confidence_term = " << fmt_double(r.confidence_term) << "\n";
      std::cout << "bound = " << fmt_double(r.total()) << "\n";
    } else if (*curves_cmd) {
      emit_plots(out_dir);
      std::cout << "plots written to " << out_dir << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
