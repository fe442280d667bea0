#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ca/amendment.hpp"
#include "ca/data.hpp"
#include "ca/network.hpp"
#include "ca/synthesis.hpp"

using namespace ca;

namespace {

// Independent direct evaluation of (1-alpha)*uniform + alpha*p.
std::vector<double> blend_oracle(const std::vector<double>& p, double al) {
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    q[i] = (1.0 - al) / static_cast<double>(p.size()) + al * p[i];
  return q;
}

}  // namespace

TEST_CASE("alpha endpoints and closed-form values") {
  CHECK(alpha(0.0, 10.0, 1000.0) == 0.0);
  CHECK(alpha(1000.0, 10.0, 1000.0) == 1.0);
  CHECK(alpha(0.0, 0.0, 1000.0) == 1.0);  // 0^0 = 1: trust the net everywhere
  CHECK(alpha(500.0, 1.0, 1000.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(alpha(500.0, 2.0, 1000.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(alpha(250.0, 0.5, 1000.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("alpha rejects bad arguments") {
  CHECK_THROWS(alpha(-1.0, 1.0, 1000.0));
  CHECK_THROWS(alpha(1001.0, 1.0, 1000.0));
  CHECK_THROWS(alpha(5.0, -0.5, 1000.0));
}

TEST_CASE("alpha is monotone in t and antitone in a") {
  for (double a : {0.1, 1.0, 3.0, 10.0}) {
    double prev = -1.0;
    for (int t = 0; t <= 100; ++t) {
      double cur = alpha(t, a, 100.0);
      CHECK(cur >= prev);
      prev = cur;
    }
  }
  // For interior t, larger a pulls the weight toward zero.
  CHECK(alpha(50.0, 10.0, 100.0) < alpha(50.0, 1.0, 100.0));
  CHECK(alpha(50.0, 1.0, 100.0) < alpha(50.0, 0.1, 100.0));
}

TEST_CASE("amend matches the direct blend and stays a distribution") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    int K = 2 + static_cast<int>(rng() % 9);
    std::vector<double> p(K);
    double s = 0.0;
    for (auto& v : p) {
      v = u(rng) + 1e-9;
      s += v;
    }
    for (auto& v : p) v /= s;
    double T = 1000.0;
    double t = std::floor(u(rng) * (T + 1));
    double a = u(rng) * 20.0;
    auto q = amend(p, t, a, T);
    auto ref = blend_oracle(p, alpha(t, a, T));
    double qs = 0.0;
    for (int y = 0; y < K; ++y) {
      CHECK(q[y] == doctest::Approx(ref[y]).epsilon(1e-12));
      CHECK(q[y] >= 0.0);
      qs += q[y];
    }
    CHECK(qs == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("amend endpoints: uniform at t=0, the network at t=T") {
  std::vector<double> p = {0.7, 0.2, 0.1};
  auto q0 = amend(p, 0.0, 10.0, 1000.0);
  for (double v : q0) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  auto qT = amend(p, 1000.0, 10.0, 1000.0);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(qT[i] == doctest::Approx(p[i]).epsilon(1e-15));
}

TEST_CASE("amend rejects non-distributions") {
  std::vector<double> bad = {0.5, 0.4};  // sums to 0.9
  CHECK_THROWS(amend(bad, 5.0, 1.0, 10.0));
}

TEST_CASE("amend_trajectory fills every record consistently") {
  Dataset ds = gen_gaussian_blobs(3, 150, 4, 6.0, 31);
  Standardizer st = Standardizer::fit(ds);
  st.apply(ds);
  Mlp net({4, 16, 3}, 31);
  TrainConfig tcfg;
  tcfg.epochs = 15;
  TrainResult tr = train_standard(net, ds, tcfg);
  ChainConfig cfg;
  cfg.T = 30;
  cfg.record_stride = 3;
  cfg.regularizer = RegKind::none;
  Trajectory traj = synthesize(net, tr.stats, 4, cfg);
  double a = 2.0;
  amend_trajectory(traj, net, a);
  for (const auto& r : traj.records) {
    REQUIRE(r.q.size() == 3);
    auto p = net.predict_one(r.x);
    auto ref = blend_oracle(p, alpha(r.t, a, cfg.T));
    for (int y = 0; y < 3; ++y) CHECK(r.q[y] == doctest::Approx(ref[y]).epsilon(1e-12));
  }
}
