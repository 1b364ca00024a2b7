#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradmm/model.hpp"
#include "gradmm/rng.hpp"

namespace gradmm {

struct DPConfig {
  double epsilon = std::numeric_limits<double>::infinity();
  double delta = 1e-4;
  double clip = 1.0;
};

struct GradientTarget {
  std::vector<double> g;      // length d * |V|
  int n_real = 0;
  double sigma = 0.0;
  std::string per_class;      // empty for a global target
};

// g * min(1, C / ||g||_2)
inline std::vector<double> clip_l2(std::vector<double> g, double clip) {
  if (clip <= 0.0) throw std::invalid_argument("clip threshold must be positive");
  double norm = l2(g);
  if (norm > clip) {
    double s = clip / norm;
    for (double& v : g) v *= s;
  }
  return g;
}

// Gaussian noise scale for (epsilon, delta)-DP release of the averaged
// clipped gradient. Two published branches; epsilon = inf disables noise.
inline double dp_sigma(const DPConfig& cfg, int n_real) {
  if (n_real < 1) throw std::invalid_argument("dp_sigma: n_real must be >= 1");
  if (std::isinf(cfg.epsilon)) return 0.0;
  if (cfg.epsilon <= 0.0) throw std::invalid_argument("dp_sigma: epsilon must be positive");
  if (cfg.delta <= 0.0 || cfg.delta >= 1.0)
    throw std::invalid_argument("dp_sigma: delta must be in (0,1)");
  const double n = static_cast<double>(n_real);
  if (cfg.epsilon <= 1.0)
    return cfg.clip * std::sqrt(2.0 * std::log(1.25 / cfg.delta)) / (cfg.epsilon * n);
  const double c = std::sqrt(std::log(2.0 / (std::sqrt(16.0 * cfg.delta + 1.0) - 1.0)));
  return cfg.clip * (c + std::sqrt(c * c + cfg.epsilon)) /
         (std::sqrt(2.0) * cfg.epsilon * n);
}

// Mean of per-sample clipped last-layer gradients plus iid N(0, sigma^2).
inline GradientTarget build_target(const std::vector<TokenSequence>& real, ModelParams& params,
                                   const DPConfig& cfg, const Rng& root,
                                   const std::string& per_class = "") {
  if (real.empty()) throw std::invalid_argument("build_target: empty real set");
  GradientTarget t;
  t.n_real = static_cast<int>(real.size());
  t.per_class = per_class;
  t.sigma = dp_sigma(cfg, t.n_real);
  for (const TokenSequence& seq : real) {
    std::vector<double> g = clip_l2(last_layer_grad_single(seq, params), cfg.clip);
    if (t.g.empty()) t.g.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) t.g[i] += g[i] / static_cast<double>(real.size());
  }
  if (t.sigma > 0.0) {
    Rng rng = root.split("dp-noise-" + per_class);
    for (double& v : t.g) v += t.sigma * rng.gaussian();
  }
  return t;
}

// Per-class targets. Each class consumes the full (epsilon, delta) on disjoint
// data (parallel composition), so the total budget stays (epsilon, delta);
// the report notes this accounting choice.
inline std::map<std::string, GradientTarget> build_class_targets(
    const std::vector<TokenSequence>& real, ModelParams& params, const DPConfig& cfg,
    const Rng& root) {
  std::map<std::string, std::vector<TokenSequence>> by_class;
  for (const TokenSequence& seq : real) by_class[seq.label].push_back(seq);
  std::map<std::string, GradientTarget> out;
  for (auto& [label, seqs] : by_class)
    out[label] = build_target(seqs, params, cfg, root, label);
  return out;
}

// Target cache: same manifest + raw float container as checkpoints, with DP
// metadata in the header line.
inline void save_target(const GradientTarget& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write target cache " + path);
  f << "gradmm-target v1\n";
  f << "meta n_real " << t.n_real << " sigma " << t.sigma << " class "
    << (t.per_class.empty() ? "*" : t.per_class) << "\n";
  f << "tensor g f64 " << t.g.size() << " @0\n";
  f << "payload\n";
  f.write(reinterpret_cast<const char*>(t.g.data()),
          static_cast<std::streamsize>(t.g.size() * sizeof(double)));
}

inline GradientTarget load_target(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read target cache " + path);
  std::string line;
  if (!std::getline(f, line) || line != "gradmm-target v1")
    throw std::runtime_error("bad target cache header in " + path);
  GradientTarget t;
  std::getline(f, line);
  {
    std::istringstream is(line);
    std::string w, cls;
    is >> w >> w >> t.n_real >> w >> t.sigma >> w >> cls;
    if (cls != "*") t.per_class = cls;
  }
  std::size_t n = 0;
  while (std::getline(f, line) && line != "payload") {
    std::istringstream is(line);
    std::string tag, name, dtype;
    is >> tag >> name >> dtype >> n;
  }
  t.g.assign(n, 0.0);
  f.read(reinterpret_cast<char*>(t.g.data()),
         static_cast<std::streamsize>(n * sizeof(double)));
  if (!f) throw std::runtime_error("truncated target cache " + path);
  return t;
}

}  // namespace gradmm
