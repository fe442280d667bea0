#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* p = std::getenv("CA_BIN");
  REQUIRE(p != nullptr);
  return p;
}

struct CmdResult {
  int code = -1;
  std::string output;
};

// Runs the tool with stderr folded into stdout.
CmdResult run_cli(const std::string& args) {
  std::string cmd = binary() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, n);
  int status = pclose(pipe);
  r.code = WEXITSTATUS(status);
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TmpDir {
  fs::path path;
  TmpDir() : path(fs::temp_directory_path() / ("ca_cli_test_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("help exits 0, bad flags exit 1") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("gen-data --help").code == 0);
  CHECK(run_cli("").code == 1);                    // missing subcommand
  CHECK(run_cli("no-such-subcommand").code == 1);
  CHECK(run_cli("gen-data").code == 1);            // missing required --out
  CHECK(run_cli("gen-data --kind bogus --out /tmp/x.csv").code == 1);
}

TEST_CASE("missing config file exits 1 and names the path") {
  TmpDir tmp;
  CmdResult r = run_cli("run --config " + tmp.file("absent.cfg") + " --out " + tmp.file("out"));
  CHECK(r.code == 1);
  CHECK(r.output.find("absent.cfg") != std::string::npos);
}

TEST_CASE("broken inputs exit 2") {
  TmpDir tmp;
  std::string bad = tmp.file("bad.csv");
  std::ofstream(bad) << "not a dataset\n";
  CmdResult r = run_cli("train --data " + bad + " --out " + tmp.file("net.ckpt"));
  CHECK(r.code == 2);
}

TEST_CASE("gen-data writes a loadable dataset deterministically") {
  TmpDir tmp;
  std::string a = tmp.file("a.csv"), b = tmp.file("b.csv");
  CHECK(run_cli("gen-data --kind blobs --K 3 --n 90 --d 4 --seed 5 --out " + a).code == 0);
  CHECK(run_cli("gen-data --kind blobs --K 3 --n 90 --d 4 --seed 5 --out " + b).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).find("ca-dataset") != std::string::npos);
  std::string m = tmp.file("moons.csv");
  CHECK(run_cli("gen-data --kind moons --n 40 --noise 0.05 --seed 2 --out " + m).code == 0);
  std::string u = tmp.file("far.csv");
  CHECK(run_cli("gen-data --kind uniform --n 40 --d 4 --range 10 --seed 2 --out " + u).code == 0);
}

TEST_CASE("bound subcommand prints the closed-form pieces") {
  CmdResult r = run_cli("bound --a 1 --N 100 --T 1000 --K 10");
  CHECK(r.code == 0);
  CHECK(r.output.find("phi(1) = 6") != std::string::npos);
  CHECK(r.output.find("capacity_term") != std::string::npos);
  CHECK(r.output.find("confidence_term") != std::string::npos);
  CHECK(run_cli("bound --a 0").code == 2);  // pole
}

TEST_CASE("stage pipeline: train, synthesize, amend, distill, score, eval") {
  TmpDir tmp;
  std::string data = tmp.file("train.csv");
  REQUIRE(run_cli("gen-data --kind blobs --K 3 --n 150 --d 4 --seed 7 --out " + data).code == 0);
  std::string ckpt = tmp.file("net.ckpt");
  REQUIRE(run_cli("train --data " + data + " --epochs 15 --hidden 16 --seed 7 --out " + ckpt)
              .code == 0);
  std::string traj = tmp.file("traj.txt");
  REQUIRE(run_cli("synthesize --checkpoint " + ckpt +
                  " --chains 4 --T 40 --stride 4 --beta-f 0.1 --seed 7 --out " + traj)
              .code == 0);
  std::string amended = tmp.file("amended.txt");
  REQUIRE(run_cli("amend --trajectory " + traj + " --checkpoint " + ckpt + " --a 10 --out " +
                  amended)
              .code == 0);
  std::string aux = tmp.file("aux.ckpt");
  REQUIRE(run_cli("distill --trajectory " + amended + " --epochs 15 --seed 7 --out " + aux)
              .code == 0);
  std::string far = tmp.file("far.csv");
  REQUIRE(run_cli("gen-data --kind uniform --n 60 --d 4 --range 10 --seed 9 --out " + far)
              .code == 0);
  std::string scores = tmp.file("scores.txt");
  REQUIRE(run_cli("score --detector ca --aux " + aux + " --id " + data + " --ood " + far +
                  " --out " + scores)
              .code == 0);
  CmdResult ev = run_cli("eval --scores " + scores);
  CHECK(ev.code == 0);
  CHECK(ev.output.find("auroc") != std::string::npos);
  // Amending with an un-amended trajectory into distill must fail loudly.
  CHECK(run_cli("distill --trajectory " + traj + " --epochs 2 --out " + tmp.file("x.ckpt"))
            .code == 2);
  // Scoring with the ca detector but no aux checkpoint must fail.
  CHECK(run_cli("score --detector ca --id " + data + " --ood " + far + " --out " +
                tmp.file("s2.txt"))
            .code == 2);
}

TEST_CASE("run subcommand produces a summary and per-seed artifacts") {
  TmpDir tmp;
  std::string cfg = tmp.file("small.cfg");
  std::ofstream(cfg) << "benchmark.K=3\n"
                     << "benchmark.d=4\n"
                     << "benchmark.train_n=120\n"
                     << "benchmark.test_n=60\n"
                     << "benchmark.near_n=60\n"
                     << "benchmark.far_n=60\n"
                     << "train.epochs=10\n"
                     << "chain.T=30\n"
                     << "chain.record_stride=3\n"
                     << "chain.beta_f=0.1\n"
                     << "chain.chains=4\n"
                     << "distill.epochs=10\n"
                     << "seeds=1\n";
  std::string out = tmp.file("run1");
  CmdResult r = run_cli("run --config " + cfg + " --out " + out);
  CHECK(r.code == 0);
  CHECK(r.output.find("AUROC") != std::string::npos);
  CHECK(fs::exists(out + "/summary.csv"));
  CHECK(fs::exists(out + "/summary.txt"));
  CHECK(fs::exists(out + "/config.txt"));
  CHECK(fs::exists(out + "/seed_1/standard.ckpt"));
  CHECK(fs::exists(out + "/seed_1/aux.ckpt"));
  CHECK(fs::exists(out + "/seed_1/trajectory.txt"));
  CHECK(fs::exists(out + "/seed_1/confidence_curve.csv"));

  // Overrides change the effective config on top of the file.
  std::string out2 = tmp.file("run2");
  CmdResult r2 = run_cli("run --config " + cfg + " --override chain.T=20 --out " + out2);
  CHECK(r2.code == 0);
  CHECK(slurp(out2 + "/config.txt").find("chain.T=20") != std::string::npos);

  // Identical reruns are bit-identical.
  std::string out3 = tmp.file("run3");
  CHECK(run_cli("run --config " + cfg + " --out " + out3).code == 0);
  CHECK(slurp(out + "/summary.csv") == slurp(out3 + "/summary.csv"));

  // Plot rendering over the finished run directory.
  CmdResult rc = run_cli("curves --run-dir " + out);
  CHECK(rc.code == 0);
  CHECK(fs::exists(out + "/alpha_curves.svg"));
  CHECK(fs::exists(out + "/phi_curve.svg"));
  CHECK(fs::exists(out + "/confidence_curve.svg"));
  CmdResult rc_bad = run_cli("curves --run-dir " + tmp.file("nothing_here"));
  CHECK(rc_bad.code == 2);
  CHECK(rc_bad.output.find("cannot open") != std::string::npos);
}

TEST_CASE("ablation subcommands write their CSVs") {
  TmpDir tmp;
  std::string cfg = tmp.file("small.cfg");
  std::ofstream(cfg) << "benchmark.K=3\nbenchmark.d=4\nbenchmark.train_n=90\n"
                     << "benchmark.test_n=45\nbenchmark.near_n=45\nbenchmark.far_n=45\n"
                     << "train.epochs=8\nchain.T=20\nchain.record_stride=2\n"
                     << "chain.beta_f=0.1\nchain.chains=3\ndistill.epochs=8\nseeds=1\n";
  std::string out = tmp.file("abl");
  CmdResult ra = run_cli("ablate-a --config " + cfg + " --grid 0 10 --out " + out);
  CHECK(ra.code == 0);
  CHECK(fs::exists(out + "/ablation_a.csv"));
  CHECK(slurp(out + "/ablation_a.csv").find("a,mean_auroc") != std::string::npos);
  CmdResult rt = run_cli("ablate-t --config " + cfg + " --grid 10 20 --out " + out);
  CHECK(rt.code == 0);
  CHECK(fs::exists(out + "/ablation_t.csv"));
}
