#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gradmm/data.hpp"
#include "gradmm/grad_target.hpp"
#include "gradmm/model.hpp"
#include "gradmm/rng.hpp"

namespace gradmm {

struct ADMMConfig {
  double rho = 0.0;        // <= 0 selects rho by pilot over the grid below
  int iterations = 30;     // outer ADMM rounds T
  int inner_steps = 50;    // Adam steps per X-update
  double inner_lr = 0.008;
  int k = 200;             // top-k projection width, clamped to |V|
  int n_tokens = 0;        // 0 = per-class average real token length
  int pool_per_class = 0;  // 0 = 2 * budget
  int jobs = 1;
};

inline const std::vector<double>& rho_grid() {
  static const std::vector<double> g = {0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0};
  return g;
}

struct SyntheticCandidate {
  Tensor x;                // n_tokens x d embedding matrix
  Tensor z;                // projected twin, rows are exact rows of E
  Tensor lambda;           // dual, same shape
  std::string label;
  std::vector<int> ids;    // projected token ids
  double match_loss = 0.0;
  int iterations = 0;
  double rho = 0.0;
};

struct IterLogEntry {
  std::string label;
  int candidate;
  int iter;
  double f;
  double primal_residual;
};

// 1 - <a,b>/(||a|| ||b||). A zero synthetic gradient is treated as orthogonal
// (loss 1) rather than undefined.
inline double cosine_match_loss(const std::vector<double>& g_syn,
                                const std::vector<double>& g_target) {
  if (g_syn.size() != g_target.size())
    throw std::invalid_argument("cosine_match_loss: length mismatch " +
                                std::to_string(g_syn.size()) + " vs " +
                                std::to_string(g_target.size()));
  double nt = l2(g_target);
  if (nt <= 0.0) throw std::invalid_argument("cosine_match_loss: zero target gradient");
  double ns = l2(g_syn);
  if (ns <= 0.0) return 1.0;
  return 1.0 - dot(g_syn, g_target) / (ns * nt);
}

// Gradient-matching objective f(X) for one synthetic candidate: cosine
// distance between the last-layer gradient of -log p(label | X) and the
// class target. The last-layer gradient is built from graph ops (exact for
// the linear + softmax head), so backward through it is plain reverse mode.
class SynObjective {
 public:
  SynObjective(ModelParams& params, const GradientTarget& target, int label_id, int bos_id)
      : params_(params), label_id_(label_id), bos_id_(bos_id) {
    double nt = l2(target.g);
    if (nt <= 0.0) throw std::invalid_argument("objective_f: zero target gradient");
    target_unit_ = target.g;
    for (double& v : target_unit_) v /= nt;
  }

  // f(X); fills grad (same shape as X) when non-null.
  double eval(const Tensor& x, Tensor* grad) const {
    const int n = x.shape[0];
    const int d = params_.cfg.dim;
    if (x.shape.size() != 2 || x.shape[1] != d)
      throw std::invalid_argument("objective_f: X must be n_tokens x dim, got " +
                                  shape_str(x.shape));
    Graph g;
    ParamNodes pn = push_params(g, params_, false);
    int x_node = g.leaf(x, true);
    Tensor bos_row({1, d}), label_row({1, d});
    for (int j = 0; j < d; ++j) {
      bos_row.at(0, j) = params_.embed.at(bos_id_, j);
      label_row.at(0, j) = params_.embed.at(label_id_, j);
    }
    int full = g.concat(g.concat(g.constant(bos_row), x_node, 0), g.constant(label_row), 0);
    int hid = hidden_states(g, params_, pn, full);
    int pred = g.slice(hid, 0, n + 1 - 1, 1);  // last prompt position predicts the label
    int probs = g.softmax(logits_node(g, params_, pn, pred));
    Tensor neg_onehot({1, params_.vocab_size});
    neg_onehot.at(0, label_id_) = -1.0;
    int delta = g.add(probs, g.constant(neg_onehot));
    int grad_vd = g.matmul(g.transpose(delta), pred);  // |V| x d, output-unit major
    int gflat = g.reshape(grad_vd, {params_.vocab_size * d});
    if (g.val(gflat).l2_norm() <= 0.0) {
      if (grad) *grad = Tensor(x.shape);
      return 1.0;  // orthogonal convention for a zero synthetic gradient
    }
    int cos_sim = g.div(g.dot(gflat, g.constant(Tensor({params_.vocab_size * d}, target_unit_))),
                        g.l2_norm(gflat));
    int f = g.add(g.constant(Tensor::scalar(1.0)), g.scale(cos_sim, -1.0));
    double value = g.val(f).item();
    if (grad) {
      std::vector<Tensor> grads = g.backward(f);
      *grad = Graph::grad_of(grads, x_node, x);
    }
    return value;
  }

  double match_loss_of_ids(const std::vector<int>& ids) const {
    Tensor z({static_cast<int>(ids.size()), params_.cfg.dim});
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < params_.cfg.dim; ++j)
        z.at(static_cast<int>(i), j) = params_.embed.at(ids[i], j);
    return eval(z, nullptr);
  }

 private:
  ModelParams& params_;
  int label_id_;
  int bos_id_;
  std::vector<double> target_unit_;
};

// Adam minimization of f(X) + (rho/2) ||X - Z + Lambda/rho||^2 starting from
// the current X. With rho = 0 this is the unconstrained init refinement.
inline void x_update(Tensor& x, const SynObjective& obj, const Tensor& z, const Tensor& lambda,
                     double rho, int steps, double lr) {
  Adam adam;
  std::vector<Tensor*> params{&x};
  for (int s = 0; s < steps; ++s) {
    Tensor grad;
    double f = obj.eval(x, &grad);
    if (!std::isfinite(f)) throw std::runtime_error("x_update: objective became non-finite");
    if (rho > 0.0)
      for (long long i = 0; i < x.numel(); ++i)
        grad.data[i] += rho * (x.data[i] - z.data[i]) + lambda.data[i];
    std::vector<Tensor> grads{std::move(grad)};
    adam.step(params, grads, lr);
  }
}

// Left-to-right constrained projection: at each position the candidate set is
// the k most probable next tokens given the already-projected prefix, and the
// row is snapped to the Euclidean-nearest candidate embedding (ties to the
// lower id, which topk_next already guarantees by ordering).
inline std::pair<std::vector<int>, Tensor> project_topk(const Tensor& m, ModelParams& params,
                                                        int k, int bos_id) {
  if (k < 1) throw std::invalid_argument("project_topk: k must be >= 1");
  k = std::min(k, params.vocab_size);
  const int n = m.shape[0];
  const int d = m.shape[1];
  std::vector<int> ids;
  Tensor z(m.shape);
  std::vector<int> prefix{bos_id};
  for (int i = 0; i < n; ++i) {
    std::vector<int> cands = topk_next(prefix, params, k);
    int best = -1;
    double best_dist = 0.0;
    for (int c : cands) {
      double dist = 0.0;
      for (int j = 0; j < d; ++j) {
        double diff = m.at(i, j) - params.embed.at(c, j);
        dist += diff * diff;
      }
      if (best < 0 || dist < best_dist) {  // cands ascend by id, so ties keep the lower id
        best = c;
        best_dist = dist;
      }
    }
    ids.push_back(best);
    prefix.push_back(best);
    for (int j = 0; j < d; ++j) z.at(i, j) = params.embed.at(best, j);
  }
  return {ids, z};
}

// Position-wise re-check that each projected token was inside its top-k set.
inline bool verify_topk_feasible(const std::vector<int>& ids, ModelParams& params, int k,
                                 int bos_id) {
  k = std::min(k, params.vocab_size);
  std::vector<int> prefix{bos_id};
  for (int id : ids) {
    std::vector<int> cands = topk_next(prefix, params, k);
    if (!std::binary_search(cands.begin(), cands.end(), id)) return false;
    prefix.push_back(id);
  }
  return true;
}

// Lambda += rho (X - Z)
inline void dual_update(SyntheticCandidate& cand, double rho) {
  for (long long i = 0; i < cand.lambda.numel(); ++i)
    cand.lambda.data[i] += rho * (cand.x.data[i] - cand.z.data[i]);
}

namespace detail {

inline int class_n_tokens(const std::vector<TokenSequence>& class_real, int n_max) {
  double total = 0.0;
  for (const TokenSequence& s : class_real)
    total += static_cast<double>(s.prompt.size()) - 1.0;  // excluding <bos>
  int n = static_cast<int>(std::lround(total / static_cast<double>(class_real.size())));
  return std::max(1, std::min(n, n_max - 2));
}

inline void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&, w] {
      for (int i = w; i < count; i += jobs) fn(i);
    });
  for (std::thread& t : workers) t.join();
}

}  // namespace detail

struct DistillResult {
  std::vector<SyntheticCandidate> pool;
  std::vector<IterLogEntry> iter_log;
  double rho = 0.0;
  std::map<std::string, int> n_tokens_per_class;
};

namespace detail {

inline SyntheticCandidate run_candidate(const std::string& label, int label_id, int n_tokens,
                                        ModelParams& params, const GradientTarget& target,
                                        const ADMMConfig& cfg, double rho, const Rng& root,
                                        int candidate_index, std::vector<IterLogEntry>* log) {
  Rng rng = root.split("candidate-" + label, static_cast<std::uint64_t>(candidate_index));
  const int d = params.cfg.dim;
  SyntheticCandidate cand;
  cand.label = label;
  cand.rho = rho;
  cand.iterations = cfg.iterations;
  cand.x = Tensor({n_tokens, d});
  for (int i = 0; i < n_tokens; ++i) {
    int id = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(params.vocab_size)));
    for (int j = 0; j < d; ++j) cand.x.at(i, j) = params.embed.at(id, j);
  }
  SynObjective obj(params, target, label_id, 1 /* bos */);
  // "argmin f" initialization: unconstrained refinement from the random draw.
  Tensor zero(cand.x.shape);
  x_update(cand.x, obj, zero, zero, 0.0, cfg.inner_steps, cfg.inner_lr);
  cand.z = cand.x;
  cand.lambda = Tensor(cand.x.shape);
  const int k = std::min(cfg.k, params.vocab_size);
  for (int t = 0; t < cfg.iterations; ++t) {
    x_update(cand.x, obj, cand.z, cand.lambda, rho, cfg.inner_steps, cfg.inner_lr);
    Tensor shifted = cand.x;
    for (long long i = 0; i < shifted.numel(); ++i)
      shifted.data[i] += cand.lambda.data[i] / rho;
    auto [ids, z] = project_topk(shifted, params, k, 1);
    cand.ids = ids;
    cand.z = std::move(z);
    dual_update(cand, rho);
    if (log) {
      double res = 0.0;
      for (long long i = 0; i < cand.x.numel(); ++i) {
        double diff = cand.x.data[i] - cand.z.data[i];
        res += diff * diff;
      }
      log->push_back({label, candidate_index, t, obj.eval(cand.x, nullptr), std::sqrt(res)});
    }
  }
  // Final projection of X^T itself gives the emitted sequence.
  auto [ids, z] = project_topk(cand.x, params, k, 1);
  cand.ids = ids;
  cand.z = std::move(z);
  cand.match_loss = obj.eval(cand.z, nullptr);
  return cand;
}

}  // namespace detail

// Alg: per class and per candidate, initialize X from a random token sequence,
// refine on f, then alternate X-update / top-k projection / dual update for T
// rounds. Candidates are generated independently.
inline DistillResult distill(const std::vector<TokenSequence>& real, ModelParams& params,
                             const Vocab& vocab, const DPConfig& dp_cfg, const ADMMConfig& cfg,
                             int budget_per_class, const Rng& root) {
  std::map<std::string, std::vector<TokenSequence>> by_class;
  for (const TokenSequence& s : real) by_class[s.label].push_back(s);
  if (by_class.empty()) throw std::invalid_argument("distill: no real examples");
  std::map<std::string, GradientTarget> targets =
      build_class_targets(real, params, dp_cfg, root);

  DistillResult result;
  const int pool_n = cfg.pool_per_class > 0 ? cfg.pool_per_class : 2 * budget_per_class;

  // rho pilot: lowest median projected match loss over a small candidate set.
  double rho = cfg.rho;
  if (rho <= 0.0) {
    ADMMConfig pilot_cfg = cfg;
    pilot_cfg.iterations = std::max(1, cfg.iterations / 6);
    double best_rho = rho_grid().front();
    double best_median = std::numeric_limits<double>::infinity();
    for (double r : rho_grid()) {
      std::vector<double> losses;
      int idx = 0;
      for (auto& [label, seqs] : by_class) {
        int n_tok = cfg.n_tokens > 0 ? cfg.n_tokens
                                     : detail::class_n_tokens(seqs, params.cfg.n_max);
        for (int c = 0; c < 2; ++c) {
          SyntheticCandidate cand = detail::run_candidate(
              label, vocab.label_tokens.at(label), n_tok, params, targets.at(label), pilot_cfg,
              r, root.split("rho-pilot", static_cast<std::uint64_t>(idx)), c, nullptr);
          losses.push_back(cand.match_loss);
        }
        ++idx;
      }
      std::sort(losses.begin(), losses.end());
      double median = losses[losses.size() / 2];
      if (median < best_median) {
        best_median = median;
        best_rho = r;
      }
    }
    rho = best_rho;
  }
  result.rho = rho;

  for (auto& [label, seqs] : by_class) {
    int n_tok =
        cfg.n_tokens > 0 ? cfg.n_tokens : detail::class_n_tokens(seqs, params.cfg.n_max);
    result.n_tokens_per_class[label] = n_tok;
    std::vector<SyntheticCandidate> cands(static_cast<std::size_t>(pool_n));
    std::vector<std::vector<IterLogEntry>> logs(static_cast<std::size_t>(pool_n));
    detail::parallel_for(pool_n, cfg.jobs, [&](int c) {
      cands[static_cast<std::size_t>(c)] =
          detail::run_candidate(label, vocab.label_tokens.at(label), n_tok, params,
                                targets.at(label), cfg, rho, root, c,
                                &logs[static_cast<std::size_t>(c)]);
    });
    for (int c = 0; c < pool_n; ++c) {
      result.pool.push_back(std::move(cands[static_cast<std::size_t>(c)]));
      for (auto& e : logs[static_cast<std::size_t>(c)]) result.iter_log.push_back(e);
    }
  }
  return result;
}

inline void save_pool(const std::vector<SyntheticCandidate>& pool, const Vocab& vocab,
                      const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write pool " + path);
  for (const SyntheticCandidate& c : pool) {
    nlohmann::json j{{"label", c.label},
                     {"ids", c.ids},
                     {"text", detokenize(c.ids, vocab)},
                     {"match_loss", c.match_loss},
                     {"iters", c.iterations},
                     {"rho", c.rho}};
    f << j.dump() << "\n";
  }
}

inline void save_iter_log(const std::vector<IterLogEntry>& log, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write iteration log " + path);
  f << "label,candidate,iter,f,primal_residual\n";
  for (const IterLogEntry& e : log)
    f << e.label << "," << e.candidate << "," << e.iter << "," << e.f << ","
      << e.primal_residual << "\n";
}

}  // namespace gradmm
