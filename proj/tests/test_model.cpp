#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "gradmm/data.hpp"
#include "gradmm/model.hpp"
#include "gradmm/rng.hpp"

using namespace gradmm;

namespace {

ModelConfig tiny_cfg() {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.n_max = 8;
  return cfg;
}

constexpr int kTinyVocab = 12;

ModelParams tiny_model(std::uint64_t seed = 42) {
  return init_model(tiny_cfg(), kTinyVocab, Rng(seed));
}

}  // namespace

TEST_CASE("zero output head gives uniform next-token distribution") {
  ModelParams p = tiny_model();
  p.w_out = Tensor({p.cfg.dim, p.vocab_size});  // zeros
  Tensor probs = next_token_probs({1, 5, 6}, p);
  REQUIRE(probs.rows() == 3);
  REQUIRE(probs.cols() == kTinyVocab);
  for (long long i = 0; i < probs.numel(); ++i)
    CHECK(probs.data[i] == Catch::Approx(1.0 / kTinyVocab));

  TokenSequence seq;
  seq.prompt = {1, 5, 6};
  seq.response = {4};
  CHECK(nll_loss(seq, p) == Catch::Approx(std::log(static_cast<double>(kTinyVocab))));
  CHECK(log_perplexity({5, 6, 4}, p, 1) ==
        Catch::Approx(std::log(static_cast<double>(kTinyVocab))));
}

TEST_CASE("next_token_probs rows sum to one") {
  ModelParams p = tiny_model();
  Tensor probs = next_token_probs({1, 2, 3, 4}, p);
  for (int r = 0; r < probs.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < probs.cols(); ++c) s += probs.at(r, c);
    CHECK(s == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("causality: future tokens do not change earlier rows") {
  ModelParams p = tiny_model();
  Tensor a = next_token_probs({1, 5, 6, 7}, p);
  Tensor b = next_token_probs({1, 5, 6, 9}, p);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < a.cols(); ++c)
      CHECK(a.at(r, c) == Catch::Approx(b.at(r, c)).margin(1e-12));
}

TEST_CASE("nll_loss matches position-by-position probability oracle") {
  ModelParams p = tiny_model(7);
  TokenSequence seq;
  seq.prompt = {1, 5, 6};
  seq.response = {4, 2};
  std::vector<int> full = {1, 5, 6, 4, 2};
  Tensor probs = next_token_probs(full, p);
  // Position i predicts full[i+1]; response tokens sit at positions 3 and 4.
  double expect = -(std::log(probs.at(2, 4)) + std::log(probs.at(3, 2))) / 2.0;
  CHECK(nll_loss(seq, p) == Catch::Approx(expect).epsilon(1e-10));
}

TEST_CASE("last_layer_grad_single matches full reverse-mode on w_out") {
  ModelParams p = tiny_model(11);
  TokenSequence seq;
  seq.prompt = {1, 5, 6, 7};
  seq.response = {4, 9};
  std::vector<double> analytic = last_layer_grad_single(seq, p);

  Graph g;
  ParamNodes pn = push_params(g, p, true);
  int loss = nll_loss_node(g, p, pn, seq);
  auto grads = g.backward(loss);
  const Tensor& gw = grads[static_cast<std::size_t>(pn.w_out)];  // [d, V], row-major
  REQUIRE(static_cast<long long>(analytic.size()) == gw.numel());
  const int d = p.cfg.dim;
  const int v = p.vocab_size;
  for (int vv = 0; vv < v; ++vv)
    for (int j = 0; j < d; ++j)
      CHECK(analytic[static_cast<std::size_t>(vv) * d + j] ==
            Catch::Approx(gw.at(j, vv)).margin(1e-10));
}

TEST_CASE("last_layer_grad_single matches finite differences on sampled coords") {
  ModelParams p = tiny_model(13);
  TokenSequence seq;
  seq.prompt = {1, 3, 8};
  seq.response = {2};
  std::vector<double> analytic = last_layer_grad_single(seq, p);
  const int d = p.cfg.dim;
  const double h = 1e-6;
  for (auto [vv, j] : std::vector<std::pair<int, int>>{{0, 0}, {2, 5}, {11, 7}}) {
    double saved = p.w_out.at(j, vv);
    p.w_out.at(j, vv) = saved + h;
    double up = nll_loss(seq, p);
    p.w_out.at(j, vv) = saved - h;
    double dn = nll_loss(seq, p);
    p.w_out.at(j, vv) = saved;
    double fd = (up - dn) / (2.0 * h);
    CHECK(analytic[static_cast<std::size_t>(vv) * d + j] == Catch::Approx(fd).margin(1e-6));
  }
}

TEST_CASE("batch last_layer_grad is the mean of singles") {
  ModelParams p = tiny_model(5);
  TokenSequence a, b;
  a.prompt = {1, 4};
  a.response = {7};
  b.prompt = {1, 9, 2};
  b.response = {3};
  auto ga = last_layer_grad_single(a, p);
  auto gb = last_layer_grad_single(b, p);
  auto gm = last_layer_grad({a, b}, p);
  for (std::size_t i = 0; i < gm.size(); ++i)
    CHECK(gm[i] == Catch::Approx(0.5 * (ga[i] + gb[i])).margin(1e-12));
}

TEST_CASE("tied model uses the embedding as output head") {
  ModelConfig cfg = tiny_cfg();
  cfg.tied = true;
  ModelParams p = init_model(cfg, kTinyVocab, Rng(3));
  Tensor probs = next_token_probs({1, 2}, p);
  // Sanity: distribution changes when the embedding row of token 0 changes.
  // (A uniform shift would be nulled by the zero-mean final layer norm, so
  // perturb a single coordinate.)
  p.embed.at(0, 3) += 0.5;
  Tensor probs2 = next_token_probs({1, 2}, p);
  CHECK(probs.at(1, 0) != Catch::Approx(probs2.at(1, 0)).margin(1e-12));
}

TEST_CASE("topk_next nests and covers the vocabulary at k=|V|") {
  ModelParams p = tiny_model(21);
  std::vector<int> prefix = {1, 6};
  auto k3 = topk_next(prefix, p, 3);
  auto k5 = topk_next(prefix, p, 5);
  auto kall = topk_next(prefix, p, kTinyVocab);
  REQUIRE(k3.size() == 3);
  REQUIRE(k5.size() == 5);
  for (int id : k3) CHECK(std::count(k5.begin(), k5.end(), id) == 1);
  REQUIRE(kall.size() == kTinyVocab);
  for (int i = 0; i < kTinyVocab; ++i) CHECK(kall[static_cast<std::size_t>(i)] == i);
  CHECK_THROWS_AS(topk_next(prefix, p, 0), std::invalid_argument);
  CHECK_THROWS_AS(topk_next(prefix, p, kTinyVocab + 1), std::invalid_argument);
}

TEST_CASE("topk_next breaks exact ties toward the lower id") {
  ModelParams p = tiny_model();
  p.w_out = Tensor({p.cfg.dim, p.vocab_size});  // all probabilities equal
  auto k4 = topk_next({1}, p, 4);
  CHECK(k4 == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("train with zero steps returns the input params") {
  ModelParams p = tiny_model(8);
  TokenSequence seq;
  seq.prompt = {1, 2};
  seq.response = {3};
  TrainOptions opt;
  opt.steps = 0;
  ModelParams q = train(p, {seq}, opt, Rng(1));
  CHECK(q.w_out.data == p.w_out.data);
  CHECK(q.embed.data == p.embed.data);
}

TEST_CASE("training reduces loss on a tiny dataset and is deterministic") {
  ModelParams p = tiny_model(30);
  std::vector<TokenSequence> data;
  TokenSequence a, b;
  a.prompt = {1, 5, 6};
  a.response = {4};
  b.prompt = {1, 7, 8};
  b.response = {9};
  data = {a, b};
  double before = (nll_loss(a, p) + nll_loss(b, p)) / 2;
  TrainOptions opt;
  opt.steps = 30;
  opt.lr = 5e-3;
  opt.batch = 2;
  ModelParams q1 = train(p, data, opt, Rng(77));
  ModelParams q2 = train(p, data, opt, Rng(77));
  double after = (nll_loss(a, q1) + nll_loss(b, q1)) / 2;
  CHECK(after < before);
  CHECK(q1.w_out.data == q2.w_out.data);
  CHECK(q1.layers[0].wq.data == q2.layers[0].wq.data);
}

TEST_CASE("checkpoint round trip preserves every tensor and the config") {
  ModelParams p = tiny_model(55);
  std::string path = "/tmp/gradmm_test_ckpt.bin";
  save_checkpoint(p, path);
  ModelParams q = load_checkpoint(path);
  CHECK(q.cfg.layers == p.cfg.layers);
  CHECK(q.cfg.dim == p.cfg.dim);
  CHECK(q.cfg.heads == p.cfg.heads);
  CHECK(q.cfg.n_max == p.cfg.n_max);
  CHECK(q.vocab_size == p.vocab_size);
  auto np = named_tensors(p);
  auto nq = named_tensors(q);
  REQUIRE(np.size() == nq.size());
  for (std::size_t i = 0; i < np.size(); ++i) {
    INFO(np[i].first);
    CHECK(np[i].second->data == nq[i].second->data);
  }
  std::remove(path.c_str());
}

TEST_CASE("load_checkpoint rejects a bad header") {
  std::string path = "/tmp/gradmm_test_bad_ckpt.bin";
  {
    std::ofstream f(path);
    f << "not a checkpoint\n";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("sequences longer than n_max are rejected") {
  ModelParams p = tiny_model();
  std::vector<int> ids(static_cast<std::size_t>(p.cfg.n_max) + 1, 2);
  CHECK_THROWS_AS(next_token_probs(ids, p), std::invalid_argument);
}
