#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradmm/admm.hpp"
#include "gradmm/model.hpp"

namespace gradmm {

enum class LabelCheckMode { kLmLikelihood, kExternalClassifier, kOff };

struct FilterConfig {
  int budget = 10;  // r, per class
  LabelCheckMode mode = LabelCheckMode::kLmLikelihood;
  double balance_tolerance = -1.0;  // < 0: 10% of global median match loss
};

struct FilterReport {
  // per stage, per class surviving counts
  std::map<std::string, int> input_counts;
  std::map<std::string, int> after_label_check;
  std::map<std::string, int> after_select_lowest;
  std::map<std::string, int> after_balance;
  std::vector<std::string> dropped;  // "stage:label:index reason"
  double balance_tolerance = 0.0;
  bool balance_warning = false;  // a class hit size 1 before the gap closed
};

// argmax over label tokens of p(label | text) under `checker`; ties go to the
// lexicographically first class (lowest label-token id).
inline std::string classify(const std::vector<int>& text_ids, ModelParams& checker,
                            const Vocab& vocab, int bos) {
  std::vector<int> prefix{bos};
  prefix.insert(prefix.end(), text_ids.begin(), text_ids.end());
  Tensor probs = next_token_probs(prefix, checker);
  const double* row = probs.data.data() +
                      static_cast<std::size_t>(probs.rows() - 1) * probs.cols();
  std::string best;
  double best_p = -1.0;
  for (const auto& [label, id] : vocab.label_tokens) {
    if (row[id] > best_p) {  // map iterates labels in order; ties keep the first
      best_p = row[id];
      best = label;
    }
  }
  return best;
}

inline bool label_check(const SyntheticCandidate& cand, ModelParams& checker, const Vocab& vocab,
                        LabelCheckMode mode) {
  if (mode == LabelCheckMode::kOff) return true;
  return classify(cand.ids, checker, vocab, vocab.bos) == cand.label;
}

// Per class, keep the <= r candidates with the smallest match loss; ties by
// original candidate index.
inline std::vector<SyntheticCandidate> select_lowest(std::vector<SyntheticCandidate> pool,
                                                     int r) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].label].push_back(i);
  std::vector<bool> keep(pool.size(), false);
  for (auto& [label, idx] : by_class) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return pool[a].match_loss < pool[b].match_loss;
    });
    for (std::size_t i = 0; i < idx.size() && i < static_cast<std::size_t>(r); ++i)
      keep[idx[i]] = true;
  }
  std::vector<SyntheticCandidate> out;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (keep[i]) out.push_back(std::move(pool[i]));
  return out;
}

// Repeatedly drop the highest-loss candidate from the class with the highest
// average match loss until the max-min average gap is within tol, refusing to
// empty a class.
inline std::vector<SyntheticCandidate> balance_classes(std::vector<SyntheticCandidate> pool,
                                                       double tol, bool* warning = nullptr) {
  if (warning) *warning = false;
  auto class_avgs = [&pool] {
    std::map<std::string, std::pair<double, int>> acc;
    for (const SyntheticCandidate& c : pool) {
      acc[c.label].first += c.match_loss;
      acc[c.label].second += 1;
    }
    std::map<std::string, double> avg;
    for (auto& [label, p] : acc) avg[label] = p.first / p.second;
    return avg;
  };
  for (;;) {
    auto avg = class_avgs();
    if (avg.size() < 2) break;
    auto hi = avg.begin();
    auto lo = avg.begin();
    for (auto it = avg.begin(); it != avg.end(); ++it) {
      if (it->second > hi->second) hi = it;
      if (it->second < lo->second) lo = it;
    }
    if (hi->second - lo->second <= tol) break;
    // Highest-loss candidate in the worst class.
    std::size_t victim = pool.size();
    int class_size = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i].label != hi->first) continue;
      ++class_size;
      if (victim == pool.size() || pool[i].match_loss > pool[victim].match_loss) victim = i;
    }
    if (class_size <= 1) {
      if (warning) *warning = true;
      break;
    }
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  return pool;
}

inline double default_balance_tolerance(const std::vector<SyntheticCandidate>& pool) {
  if (pool.empty()) return 0.0;
  std::vector<double> losses;
  for (const SyntheticCandidate& c : pool) losses.push_back(c.match_loss);
  std::sort(losses.begin(), losses.end());
  return 0.1 * losses[losses.size() / 2];
}

// Stage order is fixed: label check, lowest-loss selection, class balancing.
inline std::vector<SyntheticCandidate> run_filter(std::vector<SyntheticCandidate> pool,
                                                  ModelParams& checker, const Vocab& vocab,
                                                  const FilterConfig& cfg,
                                                  FilterReport* report = nullptr) {
  auto count = [](const std::vector<SyntheticCandidate>& p) {
    std::map<std::string, int> c;
    for (const SyntheticCandidate& cand : p) ++c[cand.label];
    return c;
  };
  if (report) report->input_counts = count(pool);

  std::vector<SyntheticCandidate> kept;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (label_check(pool[i], checker, vocab, cfg.mode)) {
      kept.push_back(std::move(pool[i]));
    } else if (report) {
      report->dropped.push_back("label_check:" + pool[i].label + ":" + std::to_string(i) +
                                " wrong predicted label");
    }
  }
  if (report) report->after_label_check = count(kept);

  kept = select_lowest(std::move(kept), cfg.budget);
  if (report) report->after_select_lowest = count(kept);

  double tol = cfg.balance_tolerance >= 0.0 ? cfg.balance_tolerance
                                            : default_balance_tolerance(kept);
  bool warn = false;
  kept = balance_classes(std::move(kept), tol, &warn);
  if (report) {
    report->after_balance = count(kept);
    report->balance_tolerance = tol;
    report->balance_warning = warn;
  }
  return kept;
}

inline void save_filter_report(const FilterReport& r, const std::string& path) {
  nlohmann::json j{{"input", r.input_counts},
                   {"after_label_check", r.after_label_check},
                   {"after_select_lowest", r.after_select_lowest},
                   {"after_balance", r.after_balance},
                   {"dropped", r.dropped},
                   {"balance_tolerance", r.balance_tolerance},
                   {"balance_warning", r.balance_warning}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write filter report " + path);
  f << j.dump(2) << "\n";
}

}  // namespace gradmm
