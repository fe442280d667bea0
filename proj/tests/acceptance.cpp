// End-to-end acceptance checks. Each criterion prints exactly one PASS/FAIL
// line; the exit code is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ca/amendment.hpp"
#include "ca/common.hpp"
#include "ca/config.hpp"
#include "ca/data.hpp"
#include "ca/detect.hpp"
#include "ca/distill.hpp"
#include "ca/experiment.hpp"
#include "ca/metrics.hpp"
#include "ca/network.hpp"
#include "ca/synthesis.hpp"
#include "ca/tensor.hpp"
#include "ca/theory.hpp"

using namespace ca;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

void report(int idx, const std::string& name, bool pass, const std::string& detail,
            double secs) {
  if (!pass) ++failures;
  std::printf("%s %2d %s (%s; %.1f s)\n", pass ? "PASS" : "FAIL", idx, name.c_str(),
              detail.c_str(), secs);
  std::fflush(stdout);
}

void criterion(int idx, const std::string& name,
               const std::function<std::pair<bool, std::string>()>& body) {
  auto t0 = clock_type::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = body();
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  report(idx, name, pass, detail, seconds_since(t0));
}

// ---- shared benchmark runs (seeds 1..5, defaults, msp + ca detectors) ----

ExperimentConfig benchmark_config() {
  ExperimentConfig cfg = build_experiment_config({});
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.chain.record_stride = 10;
  cfg.detectors.clear();
  for (const char* n : {"msp", "ca"}) {
    DetectorKind d;
    d.name = n;
    cfg.detectors.push_back(d);
  }
  return cfg;
}

struct SharedRuns {
  std::vector<SeedRun> runs;
  double max_seed_seconds = 0.0;
};

SharedRuns& shared_runs() {
  static SharedRuns s;
  if (s.runs.empty()) {
    ExperimentConfig cfg = benchmark_config();
    for (auto seed : cfg.seeds) {
      auto t0 = clock_type::now();
      s.runs.push_back(run_seed(cfg, seed));
      s.max_seed_seconds = std::max(s.max_seed_seconds, seconds_since(t0));
      if (!s.runs.back().ok)
        throw std::runtime_error("benchmark seed " + std::to_string(seed) +
                                 " failed: " + s.runs.back().error);
    }
  }
  return s;
}

double report_auroc(const SeedRun& sr, const std::string& det, const std::string& ood) {
  for (const auto& r : sr.reports)
    if (r.detector == det && r.ood_name == ood) return r.auroc;
  throw std::runtime_error("missing report " + det + "/" + ood);
}

// The ablation comparisons track the far-OOD mixture, matching the
// end-to-end detection check; near and combined numbers are still in the
// emitted reports.
double ca_far_auroc_from_reports(const SeedRun& sr) {
  return report_auroc(sr, "ca", "far");
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double aux_ca_far_auroc(const Mlp& aux, const BenchmarkData& data) {
  DetectorKind kind;
  kind.name = "ca";
  Mixture mix = assemble_mixture(data.id_test, data.far_ood);
  ScoreSet s = score_mixture(kind, nullptr, &aux, mix);
  return auroc(s.scores, s.is_ood);
}

// ---- oracles local to the acceptance suite ----

double auroc_brute(const std::vector<double>& scores, const std::vector<char>& ood) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!ood[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (ood[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

double detection_error_brute(const std::vector<double>& scores, const std::vector<char>& ood) {
  std::vector<double> cand = {-std::numeric_limits<double>::infinity(),
                              std::numeric_limits<double>::infinity()};
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    cand.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  for (double v : scores) cand.push_back(v);
  std::size_t n_id = 0, n_ood = 0;
  for (char c : ood) (c ? n_ood : n_id)++;
  double best = 1.0;
  for (double thr : cand) {
    std::size_t id_above = 0, ood_below = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!ood[i] && scores[i] > thr) ++id_above;
      if (ood[i] && scores[i] <= thr) ++ood_below;
    }
    best = std::min(best, 0.5 * static_cast<double>(id_above) / static_cast<double>(n_id) +
                              0.5 * static_cast<double>(ood_below) / static_cast<double>(n_ood));
  }
  return best;
}

std::string slurp(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), f)) out.append(buf, n);
  std::fclose(f);
  return out;
}

}  // namespace

int main() {
  criterion(1, "weight-exponent factor: exact values, monotone, derivative", [] {
    if (std::abs(phi(1.0) - 6.0) > 1e-12) return std::pair{false, std::string("phi(1) != 6")};
    if (std::abs(phi(10.0) - 2.31) > 1e-12)
      return std::pair{false, std::string("phi(10) != 2.31")};
    std::vector<double> grid;
    for (double a = 0.1; a <= 100.0 + 1e-9; a += 0.1) grid.push_back(a);
    MonotoneCheck mc = check_phi_monotone(grid);
    if (!mc.strictly_decreasing)
      return std::pair{false, "not strictly decreasing near a=" + fmt_double(mc.worst_pair_a)};
    if (!mc.derivative_matches)
      return std::pair{false,
                       "derivative mismatch, rel err " + fmt_double(mc.worst_derivative_rel_err)};
    return std::pair{true, "grid of " + std::to_string(grid.size()) + " points, worst rel err " +
                               fmt_double(mc.worst_derivative_rel_err)};
  });

  criterion(2, "weighted-sum lower bound holds on the full grid", [] {
    int checked = 0;
    for (double a : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0}) {
      for (std::uint64_t T : {1ull, 10ull, 100ull, 1000ull, 5000ull}) {
        SumBoundCheck sc = check_sum_bound(a, T);
        ++checked;
        if (!sc.holds)
          return std::pair{false, "violated at a=" + fmt_double(a) + " T=" + std::to_string(T)};
      }
    }
    return std::pair{true, std::to_string(checked) + " grid points"};
  });

  criterion(3, "autodiff gradients match central finite differences", [] {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int pair_idx = 0; pair_idx < 100; ++pair_idx) {
      std::size_t d = 2 + rng() % 5, h = 3 + rng() % 6;
      std::size_t K = 2 + rng() % 4;
      Mlp net({d, h, K}, rng());
      int y = static_cast<int>(rng() % K);
      std::vector<double> x0(d);
      for (auto& v : x0) v = normal(rng);
      auto loss_value = [&](const std::vector<double>& xv) {
        Graph g;
        Tensor xt = Tensor::row(xv);
        NodeId xn = g.leaf(xt);
        NodeId logits = net.logits_node(g, xn);
        Tensor onehot = Tensor::zeros({1, K});
        onehot.values[y] = 1.0;
        NodeId picked = g.sum(g.mul(g.softmax(logits), g.constant(onehot)));
        NodeId loss = g.add(g.neg(g.log(picked)), g.scale(g.sum(g.square(xn)), 0.1));
        return g.value(loss).values[0];
      };
      Graph g;
      Tensor xt = Tensor::row(x0);
      xt.requires_grad = true;
      NodeId xn = g.leaf(xt);
      NodeId logits = net.logits_node(g, xn);
      Tensor onehot = Tensor::zeros({1, K});
      onehot.values[y] = 1.0;
      NodeId picked = g.sum(g.mul(g.softmax(logits), g.constant(onehot)));
      NodeId loss = g.add(g.neg(g.log(picked)), g.scale(g.sum(g.square(xn)), 0.1));
      g.backward(loss);
      for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> hi = x0, lo = x0;
        double step = 1e-5;
        hi[j] += step;
        lo[j] -= step;
        double fd = (loss_value(hi) - loss_value(lo)) / (2.0 * step);
        double denom = std::max(std::abs(fd), 1e-8);
        worst = std::max(worst, std::abs(xt.grad[j] - fd) / denom);
      }
    }
    return std::pair{worst < 1e-5, "100 pairs, max rel err " + fmt_double(worst)};
  });

  criterion(4, "amended targets: distribution, endpoints, argmax preservation", [] {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int c = 0; c < 10000; ++c) {
      int K = 2 + static_cast<int>(rng() % 9);
      std::vector<double> p(K);
      double s = 0.0;
      for (auto& v : p) {
        v = u(rng) + 1e-9;
        s += v;
      }
      std::size_t top = rng() % K;
      p[top] += s;  // unique argmax
      s *= 2.0;
      for (auto& v : p) v /= s;
      double T = 1000.0, a = u(rng) * 20.0 + 1e-6, t = std::floor(u(rng) * (T + 1));
      auto q = amend(p, t, a, T);
      double qs = 0.0;
      for (double v : q) qs += v;
      if (std::abs(qs - 1.0) > 1e-12) return std::pair{false, std::string("sum off at case ") + std::to_string(c)};
      if (t == 0.0)
        for (double v : q)
          if (v != 1.0 / static_cast<double>(K))
            return std::pair{false, std::string("t=0 not exactly uniform")};
      if (t == T)
        for (int y = 0; y < K; ++y)
          if (q[y] != p[y]) return std::pair{false, std::string("t=T not exactly p")};
      if (alpha(t, a, T) > 0.0)
        for (int y = 0; y < K; ++y)
          if (q[y] > q[top]) return std::pair{false, std::string("argmax moved")};
    }
    return std::pair{true, std::string("10000 cases")};
  });

  criterion(5, "rank metrics match brute-force oracles", [] {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int done = 0;
    for (int inst = 0; done < 1000; ++inst) {
      std::size_t n = 4 + rng() % 197;
      std::vector<double> scores(n);
      std::vector<char> ood(n);
      bool has_id = false, has_ood = false;
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] = std::floor(u(rng) * 16.0) / 16.0;  // frequent ties
        ood[i] = static_cast<char>(rng() % 2);
        (ood[i] ? has_ood : has_id) = true;
      }
      if (!has_id || !has_ood) continue;
      ++done;
      if (std::abs(auroc(scores, ood) - auroc_brute(scores, ood)) > 1e-12)
        return std::pair{false, std::string("auroc mismatch, instance ") + std::to_string(inst)};
      if (std::abs(detection_error(scores, ood) - detection_error_brute(scores, ood)) > 1e-12)
        return std::pair{false,
                         std::string("detection error mismatch, instance ") + std::to_string(inst)};
    }
    return std::pair{true, std::string("1000 instances, sizes up to 200")};
  });

  criterion(6, "synthesis drives mean confidence above 0.9 by the final step", [] {
    SharedRuns& s = shared_runs();
    std::vector<double> c0s, cTs;
    for (const auto& sr : s.runs) {
      auto curve = confidence_curve(sr.trajectory, sr.standard);
      c0s.push_back(curve.front().second);
      cTs.push_back(curve.back().second);
    }
    double c0 = mean(c0s), cT = mean(cTs);
    bool pass = cT > c0 && cT > 0.9 && s.max_seed_seconds < 60.0;
    return std::pair{pass, "mean confidence " + fmt_double(c0) + " -> " + fmt_double(cT) +
                               ", slowest seed " + fmt_double(s.max_seed_seconds) + " s"};
  });

  criterion(7, "distilled detector beats msp on far OOD by 0.02 AUROC", [] {
    SharedRuns& s = shared_runs();
    std::vector<double> ca_far, msp_far;
    for (const auto& sr : s.runs) {
      ca_far.push_back(report_auroc(sr, "ca", "far"));
      msp_far.push_back(report_auroc(sr, "msp", "far"));
    }
    double ca_m = mean(ca_far), msp_m = mean(msp_far);
    bool pass = ca_m >= msp_m + 0.02 && s.max_seed_seconds < 120.0;
    return std::pair{pass, "ca " + fmt_double(ca_m) + " vs msp " + fmt_double(msp_m)};
  });

  criterion(8, "late-trust weighting (a=10) beats constant trust (a=0)", [] {
    SharedRuns& s = shared_runs();
    ExperimentConfig cfg = benchmark_config();
    std::vector<double> a10, a0;
    for (const auto& sr : s.runs) {
      a10.push_back(ca_far_auroc_from_reports(sr));
      Trajectory t = sr.trajectory;  // reuse, synthesis does not depend on a
      amend_trajectory(t, sr.standard, 0.0);
      DistillConfig dc = cfg.distill;
      dc.seed = stage_seed(sr.seed, "distill");
      dc.layer_dims = sr.standard.layer_dims();
      DistillResult dr = distill(t, dc);
      BenchmarkData data = prepare_data(cfg.benchmark, sr.seed);
      a0.push_back(aux_ca_far_auroc(dr.net, data));
    }
    double m10 = mean(a10), m0 = mean(a0);
    return std::pair{m10 >= m0, "a=10 " + fmt_double(m10) + " vs a=0 " + fmt_double(m0)};
  });

  criterion(9, "longer chains (T=1000) hold up against T=100", [] {
    SharedRuns& s = shared_runs();
    ExperimentConfig cfg = benchmark_config();
    cfg.chain.T = 100;
    std::vector<double> t1000, t100;
    for (const auto& sr : s.runs) t1000.push_back(ca_far_auroc_from_reports(sr));
    for (auto seed : cfg.seeds) {
      SeedRun sr = run_seed(cfg, seed);
      if (!sr.ok) return std::pair{false, "T=100 seed failed: " + sr.error};
      t100.push_back(ca_far_auroc_from_reports(sr));
    }
    double m1000 = mean(t1000), m100 = mean(t100);
    return std::pair{m1000 >= m100 - 0.02,
                     "T=1000 " + fmt_double(m1000) + " vs T=100 " + fmt_double(m100)};
  });

  criterion(10, "reconstruction-anchored synthesis holds up against data-free", [] {
    SharedRuns& s = shared_runs();
    ExperimentConfig cfg = benchmark_config();
    cfg.variant = Variant::ca_plus;
    cfg.chain.regularizer = RegKind::reconstruction;
    std::vector<double> minus, plus;
    for (const auto& sr : s.runs) minus.push_back(ca_far_auroc_from_reports(sr));
    for (auto seed : cfg.seeds) {
      SeedRun sr = run_seed(cfg, seed);
      if (!sr.ok) return std::pair{false, "reconstruction seed failed: " + sr.error};
      plus.push_back(ca_far_auroc_from_reports(sr));
    }
    double mp = mean(plus), mm = mean(minus);
    return std::pair{mp >= mm - 0.02,
                     "reconstruction " + fmt_double(mp) + " vs data-free " + fmt_double(mm)};
  });

  criterion(11, "identical runs produce bit-identical summaries", [] {
    auto kv = parse_config_text(
        "benchmark.K=3\nbenchmark.d=4\nbenchmark.train_n=150\nbenchmark.test_n=75\n"
        "benchmark.near_n=75\nbenchmark.far_n=75\ntrain.epochs=12\nchain.T=60\n"
        "chain.record_stride=6\nchain.chains=6\ndistill.epochs=15\nseeds=1,2\n");
    ExperimentConfig cfg = build_experiment_config(kv);
    RunArtifacts a = run(cfg);
    RunArtifacts b = run(cfg);
    bool pass = a.summary_csv == b.summary_csv && !a.summary_csv.empty();
    return std::pair{pass, std::to_string(a.summary_csv.size()) + " byte summary"};
  });

  criterion(12, "every file format reloads bit-exactly", [] {
    Dataset ds = gen_gaussian_blobs(3, 60, 4, 6.0, 13);
    save_dataset(ds, "acc_ds1.csv");
    save_dataset(load_dataset("acc_ds1.csv"), "acc_ds2.csv");
    bool ok = slurp("acc_ds1.csv") == slurp("acc_ds2.csv");

    Standardizer st = Standardizer::fit(ds);
    st.apply(ds);
    Mlp net({4, 8, 3}, 13);
    TrainConfig tc;
    tc.epochs = 5;
    TrainResult tr = train_standard(net, ds, tc);
    save_checkpoint(net, tr.stats, tc.seed, "standard", "acc_ck1.txt");
    Checkpoint ck = load_checkpoint("acc_ck1.txt");
    save_checkpoint(ck.net, ck.stats, ck.train_seed, ck.kind, "acc_ck2.txt");
    ok = ok && slurp("acc_ck1.txt") == slurp("acc_ck2.txt");

    ChainConfig cc;
    cc.T = 10;
    cc.record_stride = 2;
    cc.regularizer = RegKind::none;
    Trajectory traj = synthesize(net, tr.stats, 2, cc);
    amend_trajectory(traj, net, 10.0);
    save_trajectory(traj, "acc_tr1.txt");
    save_trajectory(load_trajectory("acc_tr1.txt"), "acc_tr2.txt");
    ok = ok && slurp("acc_tr1.txt") == slurp("acc_tr2.txt");

    Dataset far = gen_uniform_far(20, 4, 10.0, 13);
    Mixture mix = assemble_mixture(ds, far);
    DetectorKind kind;
    kind.name = "energy";
    ScoreSet sc = score_mixture(kind, &net, nullptr, mix);
    save_scoreset(sc, "acc_sc1.txt");
    save_scoreset(load_scoreset("acc_sc1.txt"), "acc_sc2.txt");
    ok = ok && slurp("acc_sc1.txt") == slurp("acc_sc2.txt");

    for (const char* p : {"acc_ds1.csv", "acc_ds2.csv", "acc_ck1.txt", "acc_ck2.txt",
                          "acc_tr1.txt", "acc_tr2.txt", "acc_sc1.txt", "acc_sc2.txt"})
      std::remove(p);
    return std::pair{ok, std::string("dataset, checkpoint, trajectory, score set")};
  });

  std::printf("%s: %d of 12 criteria failed\n", failures == 0 ? "OK" : "NOT OK", failures);
  return failures;
}
