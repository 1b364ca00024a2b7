#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gradmm/data.hpp"
#include "gradmm/graph.hpp"
#include "gradmm/rng.hpp"
#include "gradmm/tensor.hpp"

namespace gradmm {

struct ModelConfig {
  int layers = 2;
  int dim = 64;
  int heads = 2;
  int vocab_cap = 512;
  int n_max = 32;
  bool tied = false;  // output projection tied to the embedding table
};

struct LayerParams {
  Tensor wq, wk, wv, wo;      // d x d
  Tensor ln1_g, ln1_b;        // d
  Tensor w1, b1, w2, b2;      // d x 4d, 4d, 4d x d, d
  Tensor ln2_g, ln2_b;        // d
};

struct ModelParams {
  ModelConfig cfg;
  int vocab_size = 0;
  Tensor embed;               // |V| x d, the projection codebook E
  Tensor pos;                 // n_max x d
  std::vector<LayerParams> layers;
  Tensor lnf_g, lnf_b;        // d
  Tensor w_out;               // d x |V| (unused when tied)
};

inline std::vector<std::pair<std::string, Tensor*>> named_tensors(ModelParams& p) {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.push_back({"embed", &p.embed});
  out.push_back({"pos", &p.pos});
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    LayerParams& l = p.layers[i];
    std::string pre = "layer" + std::to_string(i) + ".";
    out.push_back({pre + "wq", &l.wq});
    out.push_back({pre + "wk", &l.wk});
    out.push_back({pre + "wv", &l.wv});
    out.push_back({pre + "wo", &l.wo});
    out.push_back({pre + "ln1_g", &l.ln1_g});
    out.push_back({pre + "ln1_b", &l.ln1_b});
    out.push_back({pre + "w1", &l.w1});
    out.push_back({pre + "b1", &l.b1});
    out.push_back({pre + "w2", &l.w2});
    out.push_back({pre + "b2", &l.b2});
    out.push_back({pre + "ln2_g", &l.ln2_g});
    out.push_back({pre + "ln2_b", &l.ln2_b});
  }
  out.push_back({"lnf_g", &p.lnf_g});
  out.push_back({"lnf_b", &p.lnf_b});
  out.push_back({"w_out", &p.w_out});
  return out;
}

inline ModelParams init_model(const ModelConfig& cfg, int vocab_size, const Rng& root) {
  ModelParams p;
  p.cfg = cfg;
  p.vocab_size = vocab_size;
  Rng rng = root.split("model-init");
  const int d = cfg.dim;
  auto randn = [&](std::vector<int> shape, double std_dev) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = std_dev * rng.gaussian();
    return t;
  };
  auto ones = [](int n) {
    Tensor t({n});
    for (double& v : t.data) v = 1.0;
    return t;
  };
  p.embed = randn({vocab_size, d}, 0.05);
  p.pos = randn({cfg.n_max, d}, 0.02);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerParams lp;
    lp.wq = randn({d, d}, 0.02);
    lp.wk = randn({d, d}, 0.02);
    lp.wv = randn({d, d}, 0.02);
    lp.wo = randn({d, d}, 0.02);
    lp.ln1_g = ones(d);
    lp.ln1_b = Tensor({d});
    lp.w1 = randn({d, 4 * d}, 0.02);
    lp.b1 = Tensor({4 * d});
    lp.w2 = randn({4 * d, d}, 0.02);
    lp.b2 = Tensor({d});
    lp.ln2_g = ones(d);
    lp.ln2_b = Tensor({d});
    p.layers.push_back(std::move(lp));
  }
  p.lnf_g = ones(d);
  p.lnf_b = Tensor({d});
  p.w_out = randn({d, vocab_size}, 0.02);
  return p;
}

// Node ids of model parameters inside one graph.
struct ParamNodes {
  std::vector<int> ids;          // same order as named_tensors
  int embed = -1, w_out = -1;
};

inline ParamNodes push_params(Graph& g, ModelParams& p, bool trainable) {
  ParamNodes pn;
  auto named = named_tensors(p);
  for (std::size_t i = 0; i < named.size(); ++i) {
    int id = trainable ? g.leaf(*named[i].second, true) : g.constant(*named[i].second);
    pn.ids.push_back(id);
    if (named[i].first == "embed") pn.embed = id;
    if (named[i].first == "w_out") pn.w_out = id;
  }
  return pn;
}

namespace detail {

inline Tensor causal_mask(int n) {
  Tensor m({n, n});
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c) m.at(r, c) = -1e9;
  return m;
}

struct LayerNodes {
  int wq, wk, wv, wo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
};

inline LayerNodes layer_nodes(const ParamNodes& pn, int layer) {
  const int base = 2 + layer * 12;
  return {pn.ids[base + 0], pn.ids[base + 1], pn.ids[base + 2],  pn.ids[base + 3],
          pn.ids[base + 4], pn.ids[base + 5], pn.ids[base + 6],  pn.ids[base + 7],
          pn.ids[base + 8], pn.ids[base + 9], pn.ids[base + 10], pn.ids[base + 11]};
}

}  // namespace detail

// Pre-LN causal transformer. `x` is an [n,d] node of token embeddings without
// positions; returns the [n,d] node of final (post-LN) hidden states.
inline int hidden_states(Graph& g, const ModelParams& p, const ParamNodes& pn, int x) {
  const int n = g.val(x).shape[0];
  const int d = p.cfg.dim;
  const int dh = d / p.cfg.heads;
  if (n > p.cfg.n_max)
    throw std::invalid_argument("sequence length " + std::to_string(n) + " exceeds n_max " +
                                std::to_string(p.cfg.n_max));
  int h = g.add(x, g.slice(pn.ids[1], 0, 0, n));  // + positional embeddings
  const int mask = g.constant(detail::causal_mask(n));
  for (int l = 0; l < p.cfg.layers; ++l) {
    auto ln = detail::layer_nodes(pn, l);
    int a = g.add(g.mul(g.layer_norm(h), ln.ln1_g), ln.ln1_b);
    int q = g.matmul(a, ln.wq);
    int k = g.matmul(a, ln.wk);
    int v = g.matmul(a, ln.wv);
    int merged = -1;
    for (int hd = 0; hd < p.cfg.heads; ++hd) {
      int qh = g.slice(q, 1, hd * dh, dh);
      int kh = g.slice(k, 1, hd * dh, dh);
      int vh = g.slice(v, 1, hd * dh, dh);
      int scores = g.add(g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(dh)), mask);
      int oh = g.matmul(g.softmax(scores), vh);
      merged = hd == 0 ? oh : g.concat(merged, oh, 1);
    }
    h = g.add(h, g.matmul(merged, ln.wo));
    int m = g.add(g.mul(g.layer_norm(h), ln.ln2_g), ln.ln2_b);
    int m1 = g.gelu(g.add(g.matmul(m, ln.w1), ln.b1));
    h = g.add(h, g.add(g.matmul(m1, ln.w2), ln.b2));
  }
  const int nf = static_cast<int>(pn.ids.size());
  return g.add(g.mul(g.layer_norm(h), pn.ids[nf - 3]), pn.ids[nf - 2]);
}

inline int logits_node(Graph& g, const ModelParams& p, const ParamNodes& pn, int hidden) {
  if (p.cfg.tied) return g.matmul(hidden, g.transpose(pn.embed));
  return g.matmul(hidden, pn.w_out);
}

// Mean NLL of the response tokens given the prompt. The loss node is returned;
// callers run backward on it when they need gradients.
inline int nll_loss_node(Graph& g, ModelParams& p, const ParamNodes& pn,
                         const TokenSequence& seq) {
  if (seq.response.empty()) throw std::invalid_argument("nll_loss: empty response");
  std::vector<int> full = seq.prompt;
  full.insert(full.end(), seq.response.begin(), seq.response.end());
  for (int id : full)
    if (id < 0 || id >= p.vocab_size) throw std::invalid_argument("token id outside vocabulary");
  int x = g.embedding_gather(pn.embed, full);
  int hid = hidden_states(g, p, pn, x);
  // Position i predicts token i+1; response tokens are predicted from
  // positions [|prompt|-1, |full|-2].
  const int p_len = static_cast<int>(seq.prompt.size());
  const int r_len = static_cast<int>(seq.response.size());
  int pred_hid = g.slice(hid, 0, p_len - 1, r_len);
  int logits = logits_node(g, p, pn, pred_hid);
  return g.reduce_mean(g.cross_entropy_rows(logits, seq.response));
}

inline double nll_loss(const TokenSequence& seq, ModelParams& p) {
  Graph g;
  ParamNodes pn = push_params(g, p, false);
  return g.val(nll_loss_node(g, p, pn, seq)).item();
}

// Forward pass values only: next-token probability rows for every position of
// `ids` (row i = distribution of the token following ids[0..i]).
inline Tensor next_token_probs(const std::vector<int>& ids, ModelParams& p) {
  Graph g;
  ParamNodes pn = push_params(g, p, false);
  int x = g.embedding_gather(pn.embed, ids);
  int hid = hidden_states(g, p, pn, x);
  int probs = g.softmax(logits_node(g, p, pn, hid));
  return g.val(probs);
}

// The k most probable next tokens after `prefix`; ties broken toward the lower
// id. Returned ascending by id.
inline std::vector<int> topk_next(const std::vector<int>& prefix, ModelParams& p, int k) {
  if (k < 1 || k > p.vocab_size) throw std::invalid_argument("topk_next: bad k");
  Tensor probs = next_token_probs(prefix, p);
  const int n = probs.rows();
  const int v = probs.cols();
  std::vector<int> order(static_cast<std::size_t>(v));
  for (int i = 0; i < v; ++i) order[static_cast<std::size_t>(i)] = i;
  const double* row = probs.data.data() + static_cast<std::size_t>(n - 1) * v;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return row[a] > row[b]; });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

// Mean -log p per token under the model, with <bos> as the starting context.
inline double log_perplexity(const std::vector<int>& ids, ModelParams& p, int bos) {
  if (ids.empty()) throw std::invalid_argument("log_perplexity: empty sequence");
  std::vector<int> ctx;
  ctx.push_back(bos);
  ctx.insert(ctx.end(), ids.begin(), ids.end());
  Graph g;
  ParamNodes pn = push_params(g, p, false);
  int x = g.embedding_gather(pn.embed, ctx);
  int hid = hidden_states(g, p, pn, x);
  int pred = g.slice(hid, 0, 0, static_cast<int>(ids.size()));
  int logits = logits_node(g, p, pn, pred);
  return g.val(g.reduce_mean(g.cross_entropy_rows(logits, ids))).item();
}

// ---------------------------------------------------------------------------
// Last-layer gradient. theta_L is the d x |V| output projection; the flattened
// order is output-unit major: vec[v*d + j] = d loss / d w_out[j][v].
// For tied models this is the gradient through the output-projection use of E
// only (the direct logits path).
// ---------------------------------------------------------------------------

inline std::vector<double> last_layer_grad_single(const TokenSequence& seq, ModelParams& p) {
  if (seq.response.empty()) throw std::invalid_argument("last_layer_grad: empty response");
  Graph g;
  ParamNodes pn = push_params(g, p, false);
  std::vector<int> full = seq.prompt;
  full.insert(full.end(), seq.response.begin(), seq.response.end());
  int x = g.embedding_gather(pn.embed, full);
  int hid = hidden_states(g, p, pn, x);
  const int p_len = static_cast<int>(seq.prompt.size());
  const int r_len = static_cast<int>(seq.response.size());
  int pred_hid = g.slice(hid, 0, p_len - 1, r_len);
  int logits = logits_node(g, p, pn, pred_hid);
  const Tensor& h = g.val(pred_hid);

  // Softmax rows of the predicting positions.
  Graph tmp;
  Tensor probs = tmp.val(tmp.softmax(tmp.constant(g.val(logits))));

  const int d = p.cfg.dim;
  const int v = p.vocab_size;
  std::vector<double> grad(static_cast<std::size_t>(d) * v, 0.0);
  // d(-log p_target)/d w_out[j][v'] = h[j] * (p[v'] - 1{v'==target}), averaged
  // over response positions.
  for (int r = 0; r < r_len; ++r) {
    const int target = seq.response[static_cast<std::size_t>(r)];
    for (int vv = 0; vv < v; ++vv) {
      double delta = probs.at(r, vv) - (vv == target ? 1.0 : 0.0);
      delta /= r_len;
      for (int j = 0; j < d; ++j)
        grad[static_cast<std::size_t>(vv) * d + j] += delta * h.at(r, j);
    }
  }
  return grad;
}

inline std::vector<double> last_layer_grad(const std::vector<TokenSequence>& batch,
                                           ModelParams& p) {
  if (batch.empty()) throw std::invalid_argument("last_layer_grad: empty batch");
  std::vector<double> mean;
  for (const TokenSequence& seq : batch) {
    std::vector<double> g = last_layer_grad_single(seq, p);
    if (mean.empty()) mean.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) mean[i] += g[i] / static_cast<double>(batch.size());
  }
  return mean;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr) {
    if (m_.empty()) {
      for (Tensor* p : params) {
        m_.push_back(Tensor(p->shape));
        v_.push_back(Tensor(p->shape));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      const Tensor& g = grads[i];
      for (long long j = 0; j < p.numel(); ++j) {
        double gv = g.data.empty() ? 0.0 : g.data[j];
        m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * gv;
        v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * gv * gv;
        p.data[j] -= lr * (m_[i].data[j] / bc1) / (std::sqrt(v_[i].data[j] / bc2) + eps_);
      }
    }
  }

 private:
  double beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct TrainLogEntry {
  int step;
  double loss;
};

// Mean gradient of nll over a batch, one graph per sequence.
inline std::vector<Tensor> batch_grads(ModelParams& p, const std::vector<TokenSequence>& batch,
                                       double* loss_out) {
  std::vector<Tensor> acc;
  double loss_sum = 0.0;
  for (const TokenSequence& seq : batch) {
    Graph g;
    ParamNodes pn = push_params(g, p, true);
    int loss = nll_loss_node(g, p, pn, seq);
    loss_sum += g.val(loss).item();
    std::vector<Tensor> grads = g.backward(loss);
    if (acc.empty()) acc.assign(pn.ids.size(), Tensor());
    for (std::size_t i = 0; i < pn.ids.size(); ++i) {
      const Tensor& gi = grads[static_cast<std::size_t>(pn.ids[i])];
      if (gi.data.empty()) continue;
      if (acc[i].data.empty()) acc[i] = Tensor(gi.shape);
      for (long long j = 0; j < gi.numel(); ++j)
        acc[i].data[j] += gi.data[j] / static_cast<double>(batch.size());
    }
  }
  if (loss_out) *loss_out = loss_sum / static_cast<double>(batch.size());
  return acc;
}

struct TrainOptions {
  int steps = 200;
  double lr = 1e-3;
  int batch = 16;
  bool linear_lr_decay = false;
  // Called after each step where step % eval_every == 0 (and at step 0 with the
  // initial params when eval_every > 0).
  int eval_every = 0;
  std::function<void(int step, ModelParams&)> on_eval;
  std::function<void(const TrainLogEntry&)> on_log;
};

// Adam training over a sequence dataset. Returns updated params; the input is
// copied, not modified.
inline ModelParams train(const ModelParams& base, const std::vector<TokenSequence>& data,
                         const TrainOptions& opt, const Rng& root) {
  ModelParams p = base;
  if (opt.steps == 0) return p;
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  Rng rng = root.split("train");
  Adam adam;
  auto named = named_tensors(p);
  std::vector<Tensor*> params;
  for (auto& [name, t] : named) params.push_back(t);
  if (opt.eval_every > 0 && opt.on_eval) opt.on_eval(0, p);
  for (int step = 1; step <= opt.steps; ++step) {
    std::vector<TokenSequence> batch;
    for (int b = 0; b < opt.batch; ++b)
      batch.push_back(data[rng.uniform_int(data.size())]);
    double loss = 0.0;
    std::vector<Tensor> grads = batch_grads(p, batch, &loss);
    if (!std::isfinite(loss))
      throw std::runtime_error("training diverged: loss is not finite at step " +
                               std::to_string(step));
    double lr = opt.lr;
    if (opt.linear_lr_decay) lr = opt.lr * (1.0 - static_cast<double>(step - 1) / opt.steps);
    adam.step(params, grads, lr);
    if (opt.on_log) opt.on_log({step, loss});
    if (opt.eval_every > 0 && opt.on_eval && step % opt.eval_every == 0) opt.on_eval(step, p);
  }
  return p;
}

// Pretraining sequences: the whole line (text + label + eos) is the response,
// so every position contributes to the LM loss.
inline std::vector<TokenSequence> pretrain_sequences(const std::vector<Example>& corpus,
                                                     const Vocab& vocab, int n_max) {
  std::vector<TokenSequence> out;
  for (const Example& ex : corpus) {
    TokenSequence seq;
    seq.label = ex.label;
    seq.prompt = {vocab.bos};
    for (int id : tokenize(ex.text, vocab)) seq.response.push_back(id);
    if (!ex.label.empty()) seq.response.push_back(vocab.label_tokens.at(ex.label));
    seq.response.push_back(vocab.eos);
    if (static_cast<int>(seq.prompt.size() + seq.response.size()) > n_max)
      seq.response.resize(static_cast<std::size_t>(n_max - 1));
    out.push_back(std::move(seq));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: text manifest (name, dtype, shape, byte offset into payload)
// followed by a raw little-endian float64 payload.
// ---------------------------------------------------------------------------

inline void save_checkpoint(ModelParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  auto named = named_tensors(p);
  std::ostringstream manifest;
  manifest << "gradmm-checkpoint v1\n";
  manifest << "config layers " << p.cfg.layers << " dim " << p.cfg.dim << " heads "
           << p.cfg.heads << " n_max " << p.cfg.n_max << " tied " << (p.cfg.tied ? 1 : 0)
           << " vocab " << p.vocab_size << "\n";
  std::size_t offset = 0;
  for (auto& [name, t] : named) {
    manifest << "tensor " << name << " f64";
    for (int d : t->shape) manifest << " " << d;
    manifest << " @" << offset << "\n";
    offset += t->data.size() * sizeof(double);
  }
  manifest << "payload\n";
  f << manifest.str();
  for (auto& [name, t] : named)
    f.write(reinterpret_cast<const char*>(t->data.data()),
            static_cast<std::streamsize>(t->data.size() * sizeof(double)));
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path);
  std::string line;
  if (!std::getline(f, line) || line != "gradmm-checkpoint v1")
    throw std::runtime_error("bad checkpoint header in " + path);
  std::getline(f, line);
  std::istringstream cfg_line(line);
  std::string word;
  ModelConfig cfg;
  int vocab = 0;
  cfg_line >> word;  // "config"
  while (cfg_line >> word) {
    int value;
    cfg_line >> value;
    if (word == "layers") cfg.layers = value;
    else if (word == "dim") cfg.dim = value;
    else if (word == "heads") cfg.heads = value;
    else if (word == "n_max") cfg.n_max = value;
    else if (word == "tied") cfg.tied = value != 0;
    else if (word == "vocab") vocab = value;
  }
  ModelParams p = init_model(cfg, vocab, Rng(0));
  std::vector<std::pair<std::string, std::vector<int>>> entries;
  while (std::getline(f, line) && line != "payload") {
    std::istringstream is(line);
    std::string tag, name, dtype;
    is >> tag >> name >> dtype;
    std::vector<int> shape;
    std::string tok;
    while (is >> tok) {
      if (tok[0] == '@') break;
      shape.push_back(std::stoi(tok));
    }
    entries.push_back({name, shape});
  }
  auto named = named_tensors(p);
  for (auto& [name, shape] : entries) {
    Tensor* dst = nullptr;
    for (auto& [n2, t] : named)
      if (n2 == name) dst = t;
    if (!dst) throw std::runtime_error("checkpoint tensor '" + name + "' has no slot");
    *dst = Tensor(shape);
    f.read(reinterpret_cast<char*>(dst->data.data()),
           static_cast<std::streamsize>(dst->data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("truncated checkpoint payload in " + path);
  }
  return p;
}

}  // namespace gradmm
