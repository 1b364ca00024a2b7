#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradmm/data.hpp"
#include "gradmm/model.hpp"
#include "gradmm/rng.hpp"

namespace gradmm {

struct EmbedSet {
  std::vector<std::vector<double>> vectors;
  std::string source;

  int dim() const { return vectors.empty() ? 0 : static_cast<int>(vectors[0].size()); }
};

// Mean-pooled final hidden states of the base LM over <bos> + text tokens.
inline std::vector<double> embed_text(const std::vector<int>& text_ids, ModelParams& p,
                                      int bos) {
  std::vector<int> ids{bos};
  ids.insert(ids.end(), text_ids.begin(), text_ids.end());
  Graph g;
  ParamNodes pn = push_params(g, p, false);
  int hid = hidden_states(g, p, pn, g.embedding_gather(pn.embed, ids));
  const Tensor& h = g.val(hid);
  std::vector<double> out(static_cast<std::size_t>(p.cfg.dim), 0.0);
  for (int r = 0; r < h.shape[0]; ++r)
    for (int c = 0; c < h.shape[1]; ++c)
      out[static_cast<std::size_t>(c)] += h.at(r, c) / h.shape[0];
  return out;
}

inline EmbedSet embed_dataset(const std::vector<TokenSequence>& data, ModelParams& p,
                              const std::string& source) {
  EmbedSet s;
  s.source = source;
  for (const TokenSequence& seq : data) {
    std::vector<int> text(seq.prompt.begin() + 1, seq.prompt.end());  // strip <bos>
    s.vectors.push_back(embed_text(text, p, seq.prompt.front()));
  }
  return s;
}

// Fraction of test examples whose argmax label-token probability matches gold.
inline double accuracy(ModelParams& p, const std::vector<TokenSequence>& test,
                       const Vocab& vocab) {
  if (test.empty()) throw std::invalid_argument("accuracy: empty test set");
  int correct = 0;
  for (const TokenSequence& seq : test) {
    Tensor probs = next_token_probs(seq.prompt, p);
    const double* row = probs.data.data() +
                        static_cast<std::size_t>(probs.rows() - 1) * probs.cols();
    std::string best;
    double best_p = -1.0;
    for (const auto& [label, id] : vocab.label_tokens)
      if (row[id] > best_p) {
        best_p = row[id];
        best = label;
      }
    if (best == seq.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// Frechet distance between Gaussian fits of two embedding sets:
// ||mu_p - mu_q||^2 + tr(Sp + Sq - 2 (Sp Sq)^{1/2}).
inline double fid(const EmbedSet& p, const EmbedSet& q) {
  if (p.vectors.size() < 2 || q.vectors.size() < 2)
    throw std::invalid_argument("fid: need at least 2 vectors per set");
  if (p.dim() != q.dim()) throw std::invalid_argument("fid: dimension mismatch");
  const int d = p.dim();
  auto stats = [d](const EmbedSet& s) {
    const int n = static_cast<int>(s.vectors.size());
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = s.vectors[static_cast<std::size_t>(i)]
                                                     [static_cast<std::size_t>(j)];
    Eigen::VectorXd mu = m.colwise().mean();
    Eigen::MatrixXd centered = m.rowwise() - mu.transpose();
    Eigen::MatrixXd sigma = centered.transpose() * centered / (n - 1);
    sigma += 1e-6 * Eigen::MatrixXd::Identity(d, d);  // tiny sets are rank-deficient
    return std::pair{mu, sigma};
  };
  auto [mu_p, sig_p] = stats(p);
  auto [mu_q, sig_q] = stats(q);
  // (Sp Sq)^{1/2} via Sp^{1/2} Sq Sp^{1/2}, which is symmetric PSD with the
  // same eigenvalues as Sp Sq.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_p(sig_p);
  Eigen::MatrixXd sqrt_p = es_p.operatorSqrt();
  Eigen::MatrixXd inner = sqrt_p * sig_q * sqrt_p;
  inner = 0.5 * (inner + inner.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_i(inner);
  double tr_sqrt = 0.0;
  for (int i = 0; i < d; ++i) {
    double ev = es_i.eigenvalues()(i);
    if (ev < -1e-8) throw std::runtime_error("fid: covariance product has negative eigenvalue");
    tr_sqrt += std::sqrt(std::max(0.0, ev));
  }
  return (mu_p - mu_q).squaredNorm() + sig_p.trace() + sig_q.trace() - 2.0 * tr_sqrt;
}

inline std::vector<double> nearest_real_distances(const EmbedSet& syn, const EmbedSet& real) {
  if (syn.vectors.empty() || real.vectors.empty())
    throw std::invalid_argument("nearest_real_distances: empty set");
  std::vector<double> out;
  for (const auto& s : syn.vectors) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : real.vectors) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j) {
        double diff = s[j] - r[j];
        d2 += diff * diff;
      }
      best = std::min(best, d2);
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

// Loss-threshold membership inference: pick the threshold maximizing
// 2 (acc - 0.5) on the calibration halves, report the advantage with that
// threshold on the test halves. Loss below threshold is classified "member".
inline double mia_advantage(const std::vector<double>& member_cal,
                            const std::vector<double>& nonmember_cal,
                            const std::vector<double>& member_test,
                            const std::vector<double>& nonmember_test) {
  if (member_cal.empty() || nonmember_cal.empty() || member_test.empty() ||
      nonmember_test.empty())
    throw std::invalid_argument("mia_advantage: empty split");
  std::vector<double> thresholds = member_cal;
  thresholds.insert(thresholds.end(), nonmember_cal.begin(), nonmember_cal.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);  // classify-everything-member option
  auto advantage = [](double thr, const std::vector<double>& mem,
                      const std::vector<double>& non) {
    int correct = 0;
    for (double v : mem)
      if (v < thr) ++correct;
    for (double v : non)
      if (v >= thr) ++correct;
    double acc = static_cast<double>(correct) / static_cast<double>(mem.size() + non.size());
    return 2.0 * (acc - 0.5);
  };
  double best_thr = thresholds.front();
  double best_adv = -std::numeric_limits<double>::infinity();
  for (double thr : thresholds) {
    double adv = advantage(thr, member_cal, nonmember_cal);
    if (adv > best_adv) {
      best_adv = adv;
      best_thr = thr;
    }
  }
  return advantage(best_thr, member_test, nonmember_test);
}

// ---------------------------------------------------------------------------
// Normalized gradient error series (last-layer and full) along a fine-tuning
// trace: ||g_real - g_syn|| / ||g_real|| at each logged checkpoint.
// ---------------------------------------------------------------------------

struct GradErrorPoint {
  int step;
  double last_layer;
  double full;
};

inline std::vector<double> full_grad_vector(ModelParams& p,
                                            const std::vector<TokenSequence>& data) {
  double loss = 0.0;
  std::vector<Tensor> grads = batch_grads(p, data, &loss);
  std::vector<double> flat;
  for (const Tensor& g : grads)
    flat.insert(flat.end(), g.data.begin(), g.data.end());
  return flat;
}

inline GradErrorPoint grad_error_at(int step, ModelParams& p,
                                    const std::vector<TokenSequence>& real,
                                    const std::vector<TokenSequence>& syn) {
  GradErrorPoint pt{step, 0.0, 0.0};
  std::vector<double> lr = last_layer_grad(real, p);
  std::vector<double> ls = last_layer_grad(syn, p);
  std::vector<double> diff(lr.size());
  for (std::size_t i = 0; i < lr.size(); ++i) diff[i] = lr[i] - ls[i];
  pt.last_layer = l2(diff) / std::max(l2(lr), 1e-300);
  std::vector<double> fr = full_grad_vector(p, real);
  std::vector<double> fs = full_grad_vector(p, syn);
  std::vector<double> fdiff(fr.size());
  for (std::size_t i = 0; i < fr.size(); ++i) fdiff[i] = fr[i] - fs[i];
  pt.full = l2(fdiff) / std::max(l2(fr), 1e-300);
  return pt;
}

inline void save_grad_error_csv(const std::string& path,
                                const std::vector<std::pair<std::string,
                                                            std::vector<GradErrorPoint>>>&
                                    series) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write gradient error csv " + path);
  f << "series,step,last_layer_error,full_error\n";
  for (const auto& [name, pts] : series)
    for (const GradErrorPoint& pt : pts)
      f << name << "," << pt.step << "," << pt.last_layer << "," << pt.full << "\n";
}

}  // namespace gradmm
