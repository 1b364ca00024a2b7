#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "gradmm/grad_target.hpp"
#include "gradmm/model.hpp"
#include "gradmm/rng.hpp"

using namespace gradmm;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ModelParams tiny_model(std::uint64_t seed = 4) {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.n_max = 8;
  return init_model(cfg, 12, Rng(seed));
}

TokenSequence seq_of(std::vector<int> prompt, std::vector<int> resp, std::string label) {
  TokenSequence s;
  s.prompt = std::move(prompt);
  s.response = std::move(resp);
  s.label = std::move(label);
  return s;
}

}  // namespace

TEST_CASE("clip_l2 leaves short vectors alone and rescales long ones") {
  std::vector<double> v{3.0, 4.0};  // norm 5
  auto clipped = clip_l2(v, 10.0);
  CHECK(clipped == v);
  clipped = clip_l2(v, 1.0);
  CHECK(l2(clipped) == Catch::Approx(1.0));
  CHECK(clipped[0] == Catch::Approx(0.6));
  CHECK(clipped[1] == Catch::Approx(0.8));
  CHECK_THROWS_AS(clip_l2(v, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(clip_l2(v, -1.0), std::invalid_argument);
}

TEST_CASE("dp_sigma small-epsilon branch matches the closed form") {
  // sigma = C sqrt(2 ln(1.25/delta)) / (eps n), independently computed at
  // 30-digit precision.
  CHECK(dp_sigma({0.05, 1e-4, 1.0}, 50) ==
        Catch::Approx(1.73744492155950819867).epsilon(0).margin(1e-9));
  CHECK(dp_sigma({1.0, 1e-4, 1.0}, 50) ==
        Catch::Approx(0.08687224607797540993).epsilon(0).margin(1e-9));
  CHECK(dp_sigma({0.5, 1e-5, 2.0}, 10) ==
        Catch::Approx(1.93792210504215576850).epsilon(0).margin(1e-9));
}

TEST_CASE("dp_sigma large-epsilon branch matches the closed form") {
  // sigma = C (c + sqrt(c^2 + eps)) / (sqrt(2) eps n),
  // c = sqrt(ln(2 / (sqrt(16 delta + 1) - 1))).
  CHECK(dp_sigma({2.0, 1e-4, 1.0}, 50) ==
        Catch::Approx(0.04194287505188766101).epsilon(0).margin(1e-9));
  CHECK(dp_sigma({2.0, 1e-4, 3.0}, 1) ==
        Catch::Approx(6.29143125778314915149).epsilon(0).margin(1e-9));
}

TEST_CASE("dp_sigma scales linearly in clip and inversely in n") {
  DPConfig base{0.3, 1e-4, 1.0};
  double s = dp_sigma(base, 10);
  CHECK(dp_sigma({0.3, 1e-4, 2.0}, 10) == Catch::Approx(2.0 * s));
  CHECK(dp_sigma(base, 20) == Catch::Approx(s / 2.0));
}

TEST_CASE("dp_sigma edge cases") {
  CHECK(dp_sigma({kInf, 1e-4, 1.0}, 50) == 0.0);
  CHECK_THROWS_AS(dp_sigma({-1.0, 1e-4, 1.0}, 50), std::invalid_argument);
  CHECK_THROWS_AS(dp_sigma({0.0, 1e-4, 1.0}, 50), std::invalid_argument);
  CHECK_THROWS_AS(dp_sigma({0.5, 0.0, 1.0}, 50), std::invalid_argument);
  CHECK_THROWS_AS(dp_sigma({0.5, 1.0, 1.0}, 50), std::invalid_argument);
  CHECK_THROWS_AS(dp_sigma({0.5, 1e-4, 1.0}, 0), std::invalid_argument);
}

TEST_CASE("noiseless target is the mean of clipped per-sample gradients") {
  ModelParams p = tiny_model();
  std::vector<TokenSequence> real = {seq_of({1, 5, 6}, {4}, "a"),
                                     seq_of({1, 7}, {9}, "a"),
                                     seq_of({1, 2, 3}, {8}, "a")};
  DPConfig cfg{kInf, 1e-4, 0.05};  // small clip so clipping actually bites
  GradientTarget t = build_target(real, p, cfg, Rng(1));
  CHECK(t.sigma == 0.0);
  CHECK(t.n_real == 3);
  std::vector<double> expect;
  for (const auto& s : real) {
    auto g = clip_l2(last_layer_grad_single(s, p), cfg.clip);
    if (expect.empty()) expect.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) expect[i] += g[i] / 3.0;
  }
  REQUIRE(t.g.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(t.g[i] == Catch::Approx(expect[i]).margin(1e-12));
}

TEST_CASE("empirical noise std matches sigma within 3 percent") {
  ModelParams p = tiny_model();
  std::vector<TokenSequence> real = {seq_of({1, 5, 6}, {4}, "a")};
  DPConfig noiseless{kInf, 1e-4, 1.0};
  GradientTarget clean = build_target(real, p, noiseless, Rng(1));
  DPConfig cfg{0.5, 1e-4, 1.0};
  const double sigma = dp_sigma(cfg, 1);
  // Pool the noise across a few independently-seeded releases; each release has
  // d*|V| = 96 coordinates.
  double ss = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    GradientTarget noisy = build_target(real, p, cfg, Rng(seed));
    for (std::size_t i = 0; i < clean.g.size(); ++i) {
      double z = noisy.g[i] - clean.g[i];
      ss += z * z;
      ++count;
    }
  }
  double emp = std::sqrt(ss / count);
  CHECK(emp == Catch::Approx(sigma).epsilon(0.03));
}

TEST_CASE("per-class targets partition the data by label") {
  ModelParams p = tiny_model();
  std::vector<TokenSequence> real = {seq_of({1, 5}, {4}, "neg"), seq_of({1, 6}, {4}, "neg"),
                                     seq_of({1, 7}, {5}, "pos")};
  DPConfig cfg{kInf, 1e-4, 1.0};
  auto targets = build_class_targets(real, p, cfg, Rng(3));
  REQUIRE(targets.size() == 2);
  CHECK(targets.at("neg").n_real == 2);
  CHECK(targets.at("pos").n_real == 1);
  CHECK(targets.at("neg").per_class == "neg");
  GradientTarget direct = build_target({real[2]}, p, cfg, Rng(3), "pos");
  CHECK(targets.at("pos").g == direct.g);
}

TEST_CASE("noise is deterministic per class stream") {
  ModelParams p = tiny_model();
  std::vector<TokenSequence> real = {seq_of({1, 5}, {4}, "a")};
  DPConfig cfg{0.5, 1e-4, 1.0};
  GradientTarget t1 = build_target(real, p, cfg, Rng(9), "a");
  GradientTarget t2 = build_target(real, p, cfg, Rng(9), "a");
  GradientTarget t3 = build_target(real, p, cfg, Rng(9), "b");
  CHECK(t1.g == t2.g);
  CHECK(t1.g != t3.g);
}

TEST_CASE("target cache round trip") {
  GradientTarget t;
  t.g = {0.25, -1.5, 3.125, 0.0};
  t.n_real = 7;
  t.sigma = 0.125;
  t.per_class = "pos";
  std::string path = "/tmp/gradmm_test_target.bin";
  save_target(t, path);
  GradientTarget back = load_target(path);
  CHECK(back.g == t.g);
  CHECK(back.n_real == 7);
  CHECK(back.sigma == Catch::Approx(0.125));
  CHECK(back.per_class == "pos");
  std::remove(path.c_str());

  t.per_class.clear();
  save_target(t, path);
  CHECK(load_target(path).per_class.empty());
  std::remove(path.c_str());
}
