#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradmm/admm.hpp"
#include "gradmm/config.hpp"
#include "gradmm/data.hpp"
#include "gradmm/filter.hpp"
#include "gradmm/grad_target.hpp"
#include "gradmm/metrics.hpp"
#include "gradmm/model.hpp"
#include "gradmm/rng.hpp"
#include "gradmm/theory.hpp"

namespace gradmm::cli {

// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Context {
  Config cfg;
  std::string out_dir;
  std::uint64_t seed = 42;
  int jobs = 1;
  std::ostream* log = &std::cout;
  std::vector<std::string> written;

  std::string path(const std::string& name) const {
    return (std::filesystem::path(out_dir) / name).string();
  }

  void wrote(const std::string& name) { written.push_back(name); }

  // manifest.json accumulates the outputs of every command run into out_dir.
  void finish(const std::string& command) {
    nlohmann::json m;
    std::string mp = path("manifest.json");
    {
      std::ifstream f(mp);
      if (f) {
        try {
          f >> m;
        } catch (const nlohmann::json::exception&) {
          m = nlohmann::json::object();
        }
      }
    }
    m["config_hash"] = cfg.hash();
    std::sort(written.begin(), written.end());
    m["files"][command] = written;
    std::ofstream f(mp);
    if (!f) throw DataError("cannot write manifest " + mp);
    f << m.dump(2) << "\n";
  }
};

namespace detail {

template <typename Fn>
auto data_op(const std::string& what, Fn fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw DataError(what + ": " + e.what());
  }
}

inline std::vector<Example> load_corpus(Context& ctx, const std::string& which) {
  const std::string source = ctx.cfg.get_str("data.source", "toy");
  if (source == "toy") {
    int n = ctx.cfg.get_int("data." + which + "_n", which == "train" ? 64 : 32);
    if (n < 1) throw UsageError("data." + which + "_n must be >= 1");
    return toy::generate(Rng(ctx.seed), n, "toy-" + which);
  }
  if (source == "file") {
    std::string key = "data." + which;
    if (!ctx.cfg.has(key)) throw UsageError("data.source = file requires " + key);
    return data_op("loading " + ctx.cfg.get_str(key),
                   [&] { return load_jsonl(ctx.cfg.get_str(key)); });
  }
  throw UsageError("data.source must be 'toy' or 'file', got '" + source + "'");
}

inline ModelConfig model_config(const Config& cfg) {
  ModelConfig mc;
  mc.layers = cfg.get_int("model.layers", 2);
  mc.dim = cfg.get_int("model.dim", 64);
  mc.heads = cfg.get_int("model.heads", 2);
  mc.vocab_cap = cfg.get_int("model.vocab_cap", 512);
  mc.n_max = cfg.get_int("model.n_max", 32);
  mc.tied = cfg.get_bool("model.tied", false);
  if (mc.dim % mc.heads != 0) throw UsageError("model.dim must be divisible by model.heads");
  return mc;
}

inline Vocab load_vocab_at(const std::string& path) {
  return data_op("loading vocab " + path, [&] { return load_vocab(path); });
}

inline ModelParams load_ckpt_at(const std::string& path) {
  return data_op("loading checkpoint " + path, [&] { return load_checkpoint(path); });
}

inline std::vector<TokenSequence> encode_corpus(const std::vector<Example>& corpus,
                                                const Vocab& vocab, int n_max) {
  return data_op("encoding dataset", [&] {
    std::vector<TokenSequence> out;
    for (const Example& ex : corpus) out.push_back(encode_example(ex, vocab, n_max));
    return out;
  });
}

template <typename Fn>
auto numeric_op(Fn fn) {
  try {
    return fn();
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    if (msg.find("finite") != std::string::npos || msg.find("diverged") != std::string::npos ||
        msg.find("negative eigenvalue") != std::string::npos)
      throw NumericError(msg);
    throw;
  }
}

inline DPConfig dp_config(const Config& cfg) {
  DPConfig dp;
  dp.epsilon = cfg.get_double("dp.epsilon", 0.05);
  dp.delta = cfg.get_double("dp.delta", 1e-4);
  dp.clip = cfg.get_double("dp.clip", 1.0);
  return dp;
}

inline std::string dp_note(const DPConfig& dp) {
  if (std::isinf(dp.epsilon)) return "differential privacy disabled (epsilon = inf)";
  std::ostringstream os;
  os << "per-class gradient targets each consume the full (" << dp.epsilon << ", " << dp.delta
     << ") budget on disjoint per-class data; by parallel composition the overall release "
        "is ("
     << dp.epsilon << ", " << dp.delta << ")-DP";
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// pretrain: corpus -> vocab + base checkpoint (+ the corpus files themselves
// when the built-in toy generator is used).
// ---------------------------------------------------------------------------
inline void cmd_pretrain(Context& ctx) {
  std::vector<Example> train_corpus = detail::load_corpus(ctx, "train");
  std::vector<Example> test = detail::load_corpus(ctx, "test");
  if (train_corpus.empty()) throw DataError("pretrain: empty training corpus");
  ModelConfig mc = detail::model_config(ctx.cfg);
  Vocab vocab = build_vocab(train_corpus, mc.vocab_cap);
  ModelParams base = init_model(mc, vocab.size(), Rng(ctx.seed));

  std::vector<TokenSequence> seqs = pretrain_sequences(train_corpus, vocab, mc.n_max);
  TrainOptions opt;
  opt.steps = ctx.cfg.get_int("pretrain.steps", 300);
  opt.lr = ctx.cfg.get_double("pretrain.lr", 1e-3);
  opt.batch = ctx.cfg.get_int("pretrain.batch", 16);
  std::ofstream log_csv(ctx.path("pretrain_log.csv"));
  log_csv << "step,loss\n";
  opt.on_log = [&](const TrainLogEntry& e) {
    log_csv << e.step << "," << fmt(e.loss) << "\n";
  };
  ModelParams trained =
      detail::numeric_op([&] { return gradmm::train(base, seqs, opt, Rng(ctx.seed)); });

  save_vocab(vocab, ctx.path("vocab.txt"));
  save_checkpoint(trained, ctx.path("base.ckpt"));
  save_jsonl(train_corpus, ctx.path("train.jsonl"));
  save_jsonl(test, ctx.path("test.jsonl"));
  ctx.wrote("vocab.txt");
  ctx.wrote("base.ckpt");
  ctx.wrote("pretrain_log.csv");
  ctx.wrote("train.jsonl");
  ctx.wrote("test.jsonl");
  ctx.finish("pretrain");
  (*ctx.log) << "pretrain: " << vocab.size() << " tokens, " << opt.steps << " steps -> "
             << ctx.path("base.ckpt") << "\n";
}

// ---------------------------------------------------------------------------
// distill: real data + base model -> synthetic pool, filtered selection,
// iteration log, per-class target caches, filter report.
// ---------------------------------------------------------------------------
inline void cmd_distill(Context& ctx) {
  Vocab vocab = detail::load_vocab_at(ctx.cfg.get_str("distill.vocab", ctx.path("vocab.txt")));
  ModelParams base =
      detail::load_ckpt_at(ctx.cfg.get_str("distill.base", ctx.path("base.ckpt")));
  std::vector<Example> corpus;
  if (ctx.cfg.has("distill.data"))
    corpus = detail::data_op("loading " + ctx.cfg.get_str("distill.data"),
                             [&] { return load_jsonl(ctx.cfg.get_str("distill.data")); });
  else
    corpus = detail::data_op("loading " + ctx.path("train.jsonl"),
                             [&] { return load_jsonl(ctx.path("train.jsonl")); });
  if (corpus.empty()) throw DataError("distill: empty real dataset");
  std::vector<TokenSequence> real = detail::encode_corpus(corpus, vocab, base.cfg.n_max);

  DPConfig dp = detail::dp_config(ctx.cfg);
  ADMMConfig ac;
  ac.rho = ctx.cfg.get_double("admm.rho", 0.0);
  ac.iterations = ctx.cfg.get_int("admm.iterations", 30);
  ac.inner_steps = ctx.cfg.get_int("admm.inner_steps", 50);
  ac.inner_lr = ctx.cfg.get_double("admm.inner_lr", 0.008);
  ac.k = ctx.cfg.get_int("admm.k", 200);
  ac.n_tokens = ctx.cfg.get_int("admm.n_tokens", 0);
  ac.pool_per_class = ctx.cfg.get_int("admm.pool_per_class", 0);
  ac.jobs = ctx.jobs;
  const int budget = ctx.cfg.get_int("filter.budget", 10);
  if (budget < 1) throw UsageError("filter.budget must be >= 1");

  DistillResult result = detail::numeric_op(
      [&] { return distill(real, base, vocab, dp, ac, budget, Rng(ctx.seed)); });

  // Persist the (possibly noised) per-class targets alongside the pool.
  std::map<std::string, GradientTarget> targets = detail::numeric_op(
      [&] { return build_class_targets(real, base, dp, Rng(ctx.seed)); });
  for (auto& [label, t] : targets) {
    save_target(t, ctx.path("target_" + label + ".bin"));
    ctx.wrote("target_" + label + ".bin");
  }

  save_pool(result.pool, vocab, ctx.path("pool.jsonl"));
  save_iter_log(result.iter_log, ctx.path("iterations.csv"));

  FilterConfig fc;
  fc.budget = budget;
  std::string mode = ctx.cfg.get_str("filter.label_check", "lm");
  if (mode == "lm") fc.mode = LabelCheckMode::kLmLikelihood;
  else if (mode == "off") fc.mode = LabelCheckMode::kOff;
  else throw UsageError("filter.label_check must be 'lm' or 'off'");
  fc.balance_tolerance = ctx.cfg.get_double("filter.balance_tolerance", -1.0);
  FilterReport report;
  std::vector<SyntheticCandidate> kept = run_filter(result.pool, base, vocab, fc, &report);
  save_filter_report(report, ctx.path("filter_report.json"));

  std::vector<Example> synthetic;
  for (const SyntheticCandidate& c : kept)
    synthetic.push_back({detokenize(c.ids, vocab), c.label});
  save_jsonl(synthetic, ctx.path("synthetic.jsonl"));

  ctx.wrote("pool.jsonl");
  ctx.wrote("iterations.csv");
  ctx.wrote("filter_report.json");
  ctx.wrote("synthetic.jsonl");
  ctx.finish("distill");
  (*ctx.log) << "distill: rho " << result.rho << ", pool " << result.pool.size() << " -> kept "
             << kept.size() << " -> " << ctx.path("synthetic.jsonl") << "\n";
}

// ---------------------------------------------------------------------------
// finetune: base checkpoint + dataset -> fine-tuned checkpoint, with optional
// gradient-error tracking against a real reference set.
// ---------------------------------------------------------------------------
inline void cmd_finetune(Context& ctx) {
  Vocab vocab = detail::load_vocab_at(ctx.cfg.get_str("finetune.vocab", ctx.path("vocab.txt")));
  ModelParams base =
      detail::load_ckpt_at(ctx.cfg.get_str("finetune.base", ctx.path("base.ckpt")));
  std::string data_path = ctx.cfg.get_str("finetune.data", ctx.path("synthetic.jsonl"));
  std::vector<Example> corpus =
      detail::data_op("loading " + data_path, [&] { return load_jsonl(data_path); });
  if (corpus.empty()) throw DataError("finetune: empty dataset " + data_path);
  std::vector<TokenSequence> data = detail::encode_corpus(corpus, vocab, base.cfg.n_max);

  std::vector<TokenSequence> real;
  if (ctx.cfg.has("finetune.real")) {
    std::vector<Example> rc =
        detail::data_op("loading " + ctx.cfg.get_str("finetune.real"),
                        [&] { return load_jsonl(ctx.cfg.get_str("finetune.real")); });
    real = detail::encode_corpus(rc, vocab, base.cfg.n_max);
  }

  TrainOptions opt;
  opt.steps = ctx.cfg.get_int("finetune.steps", 200);
  opt.lr = ctx.cfg.get_double("finetune.lr", 1e-3);
  opt.batch = ctx.cfg.get_int("finetune.batch", 16);
  opt.linear_lr_decay = true;
  std::ofstream log_csv(ctx.path("train_log.csv"));
  log_csv << "step,loss\n";
  opt.on_log = [&](const TrainLogEntry& e) {
    log_csv << e.step << "," << fmt(e.loss) << "\n";
  };
  std::vector<GradErrorPoint> errors;
  if (!real.empty()) {
    opt.eval_every = ctx.cfg.get_int("finetune.eval_every", 20);
    opt.on_eval = [&](int step, ModelParams& p) {
      errors.push_back(grad_error_at(step, p, real, data));
    };
  }
  ModelParams tuned =
      detail::numeric_op([&] { return gradmm::train(base, data, opt, Rng(ctx.seed)); });

  std::string ckpt_name = ctx.cfg.get_str("finetune.out", "finetuned.ckpt");
  save_checkpoint(tuned, ctx.path(ckpt_name));
  ctx.wrote(ckpt_name);
  ctx.wrote("train_log.csv");
  if (!errors.empty()) {
    std::string series = ctx.cfg.get_str("finetune.series", "run");
    std::string fname = "grad_errors_" + series + ".csv";
    save_grad_error_csv(ctx.path(fname), {{series, errors}});
    ctx.wrote(fname);
  }
  ctx.finish("finetune");
  (*ctx.log) << "finetune: " << data.size() << " examples, " << opt.steps << " steps -> "
             << ctx.path(ckpt_name) << "\n";
}

// ---------------------------------------------------------------------------
// evaluate: checkpoint + test set (+ optional real/synthetic sets) -> metrics
// ---------------------------------------------------------------------------
inline void cmd_evaluate(Context& ctx) {
  Vocab vocab = detail::load_vocab_at(ctx.cfg.get_str("eval.vocab", ctx.path("vocab.txt")));
  ModelParams model =
      detail::load_ckpt_at(ctx.cfg.get_str("eval.model", ctx.path("finetuned.ckpt")));
  std::string test_path = ctx.cfg.get_str("eval.test", ctx.path("test.jsonl"));
  std::vector<Example> test_corpus =
      detail::data_op("loading " + test_path, [&] { return load_jsonl(test_path); });
  if (test_corpus.empty()) throw DataError("evaluate: empty test set " + test_path);
  std::vector<TokenSequence> test = detail::encode_corpus(test_corpus, vocab, model.cfg.n_max);

  std::vector<std::pair<std::string, double>> metrics;
  double acc = detail::numeric_op([&] { return accuracy(model, test, vocab); });
  metrics.push_back({"accuracy", acc});
  double ppl = 0.0;
  for (const TokenSequence& s : test) {
    std::vector<int> text(s.prompt.begin() + 1, s.prompt.end());
    ppl += log_perplexity(text, model, vocab.bos) / static_cast<double>(test.size());
  }
  metrics.push_back({"mean_log_ppl", ppl});

  ModelParams embed_model =
      ctx.cfg.has("eval.embed_model")
          ? detail::load_ckpt_at(ctx.cfg.get_str("eval.embed_model"))
          : model;

  std::vector<TokenSequence> real;
  if (ctx.cfg.has("eval.real") || std::filesystem::exists(ctx.path("train.jsonl"))) {
    std::string rp = ctx.cfg.get_str("eval.real", ctx.path("train.jsonl"));
    auto rc = detail::data_op("loading " + rp, [&] { return load_jsonl(rp); });
    real = detail::encode_corpus(rc, vocab, model.cfg.n_max);
  }
  std::vector<TokenSequence> syn;
  if (ctx.cfg.has("eval.syn") || std::filesystem::exists(ctx.path("synthetic.jsonl"))) {
    std::string sp = ctx.cfg.get_str("eval.syn", ctx.path("synthetic.jsonl"));
    auto sc = detail::data_op("loading " + sp, [&] { return load_jsonl(sp); });
    syn = detail::encode_corpus(sc, vocab, model.cfg.n_max);
  }

  if (!real.empty() && !syn.empty() && real.size() >= 2 && syn.size() >= 2) {
    EmbedSet er = embed_dataset(real, embed_model, "real");
    EmbedSet es = embed_dataset(syn, embed_model, "synthetic");
    metrics.push_back({"fid", detail::numeric_op([&] { return fid(es, er); })});
    std::vector<double> nd = nearest_real_distances(es, er);
    double mean_nd = 0.0, min_nd = nd[0];
    for (double v : nd) {
      mean_nd += v / static_cast<double>(nd.size());
      min_nd = std::min(min_nd, v);
    }
    metrics.push_back({"nearest_embed_mean", mean_nd});
    metrics.push_back({"nearest_embed_min", min_nd});
  }

  if (!real.empty() && real.size() >= 2 && test.size() >= 2) {
    auto losses = [&](const std::vector<TokenSequence>& set) {
      std::vector<double> out;
      for (const TokenSequence& s : set) out.push_back(nll_loss(s, model));
      return out;
    };
    std::vector<double> mem = losses(real);
    std::vector<double> non = losses(test);
    auto split = [](const std::vector<double>& v) {
      std::vector<double> cal, tst;
      for (std::size_t i = 0; i < v.size(); ++i) (i % 2 == 0 ? cal : tst).push_back(v[i]);
      return std::pair{cal, tst};
    };
    auto [mc, mt] = split(mem);
    auto [nc, nt] = split(non);
    metrics.push_back({"mia_advantage", mia_advantage(mc, nc, mt, nt)});
  }

  std::string metrics_name = ctx.cfg.get_str("eval.out", "metrics.csv");
  std::ofstream f(ctx.path(metrics_name));
  if (!f) throw DataError("cannot write " + ctx.path(metrics_name));
  f << "metric,value\n";
  for (const auto& [name, value] : metrics) f << name << "," << fmt(value) << "\n";
  ctx.wrote(metrics_name);
  ctx.finish("evaluate");
  for (const auto& [name, value] : metrics) (*ctx.log) << name << " = " << value << "\n";
}

// ---------------------------------------------------------------------------
// theory: randomized verification suites for the three guarantees.
// ---------------------------------------------------------------------------
inline void cmd_theory(Context& ctx) {
  const int n = ctx.cfg.get_int("theory.instances", 1000);
  if (n < 1) throw UsageError("theory.instances must be >= 1");
  Rng root(ctx.seed);
  SuiteReport lemma = run_suite(n, root, "lemma1", check_lemma1);
  SuiteReport theorem = run_suite(n, root, "theorem1", check_theorem1);
  SuiteReport corollary = run_suite(n, root, "corollary1", check_corollary1);
  save_suite_report(ctx.path("theory_report.json"),
                    {{"lemma1", lemma}, {"theorem1", theorem}, {"corollary1", corollary}});
  ctx.wrote("theory_report.json");
  ctx.finish("theory");
  auto show = [&](const std::string& name, const SuiteReport& r, bool inconclusive_capped) {
    bool ok = r.violations == 0 &&
              (!inconclusive_capped || r.inconclusive * 5 < r.instances);
    (*ctx.log) << name << ": " << (ok ? "ok" : "FAIL") << " (" << r.instances << " instances, "
               << r.violations << " violations, " << r.inconclusive << " inconclusive)\n";
    if (!ok) throw NumericError(name + " verification failed");
  };
  show("lemma1", lemma, false);
  show("theorem1", theorem, true);
  show("corollary1", corollary, false);
}

// ---------------------------------------------------------------------------
// report: aggregate whatever the out_dir already contains.
// ---------------------------------------------------------------------------
inline void cmd_report(Context& ctx) {
  nlohmann::json rep;
  rep["config"] = nlohmann::json::object();
  for (const auto& [k, v] : ctx.cfg.items()) rep["config"][k] = v;
  rep["config_hash"] = ctx.cfg.hash();
  rep["dp_note"] = detail::dp_note(detail::dp_config(ctx.cfg));

  auto try_json = [&](const std::string& name, const char* key) {
    std::ifstream f(ctx.path(name));
    if (!f) return;
    try {
      nlohmann::json j;
      f >> j;
      rep[key] = j;
    } catch (const nlohmann::json::exception&) {
      throw DataError("malformed " + ctx.path(name));
    }
  };
  try_json("filter_report.json", "filter");
  try_json("theory_report.json", "theory");

  auto try_metrics_csv = [&](const std::string& name, const char* key) {
    std::ifstream f(ctx.path(name));
    if (!f) return;
    std::string line;
    std::getline(f, line);  // header
    nlohmann::json m = nlohmann::json::object();
    while (std::getline(f, line)) {
      auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      m[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    rep[key] = m;
  };
  try_metrics_csv("metrics.csv", "metrics");

  // gradient error series, one file per fine-tuning run
  nlohmann::json series = nlohmann::json::object();
  for (const auto& entry : std::filesystem::directory_iterator(ctx.out_dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("grad_errors_", 0) != 0) continue;
    std::ifstream f(entry.path());
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
      std::istringstream is(line);
      std::string sname, step, last, full;
      std::getline(is, sname, ',');
      std::getline(is, step, ',');
      std::getline(is, last, ',');
      std::getline(is, full, ',');
      series[sname].push_back({{"step", std::stoi(step)},
                               {"last_layer_error", std::stod(last)},
                               {"full_error", std::stod(full)}});
    }
  }
  rep["grad_errors"] = series;

  std::ofstream jf(ctx.path("report.json"));
  if (!jf) throw DataError("cannot write " + ctx.path("report.json"));
  jf << rep.dump(2) << "\n";

  std::ofstream mf(ctx.path("report.md"));
  mf << "# Run report\n\n";
  mf << "Config hash: `" << ctx.cfg.hash() << "`\n\n";
  mf << "## Configuration\n\n```\n" << ctx.cfg.dump() << "```\n\n";
  if (rep.contains("metrics")) {
    mf << "## Metrics\n\n| metric | value |\n|---|---|\n";
    for (auto& [k, v] : rep["metrics"].items())
      mf << "| " << k << " | " << v.dump() << " |\n";
    mf << "\n";
  }
  if (rep.contains("filter")) {
    mf << "## Filtering\n\n```\n" << rep["filter"].dump(2) << "\n```\n\n";
  }
  if (rep.contains("theory")) {
    mf << "## Theory suites\n\n```\n" << rep["theory"].dump(2) << "\n```\n\n";
  }
  if (!series.empty()) {
    mf << "## Gradient matching error\n\n";
    for (auto& [sname, pts] : series.items()) {
      mf << "### " << sname << "\n\n| step | last-layer | full |\n|---|---|---|\n";
      for (auto& pt : pts)
        mf << "| " << pt["step"] << " | " << pt["last_layer_error"] << " | "
           << pt["full_error"] << " |\n";
      mf << "\n";
    }
  }
  mf << "## Privacy\n\n" << rep["dp_note"].get<std::string>() << "\n";
  ctx.wrote("report.json");
  ctx.wrote("report.md");
  ctx.finish("report");
  (*ctx.log) << "report: " << ctx.path("report.md") << "\n";
}

// ---------------------------------------------------------------------------
// argument parsing and exit-code mapping
// ---------------------------------------------------------------------------

inline int run_command(const std::string& command, Context& ctx) {
  try {
    std::filesystem::create_directories(ctx.out_dir);
    if (command == "pretrain") cmd_pretrain(ctx);
    else if (command == "distill") cmd_distill(ctx);
    else if (command == "finetune") cmd_finetune(ctx);
    else if (command == "evaluate") cmd_evaluate(ctx);
    else if (command == "theory") cmd_theory(ctx);
    else if (command == "report") cmd_report(ctx);
    else throw UsageError("unknown command '" + command + "'");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

inline int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const std::string usage =
      "usage: gradmm <pretrain|distill|finetune|evaluate|theory|report> --out DIR\n"
      "              [--config FILE] [--seed N] [--jobs N] [--set section.key=value]...\n";
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    std::cout << usage;
    return args.empty() ? 1 : 0;
  }
  std::string command = args[0];
  Context ctx;
  std::string config_path;
  std::vector<std::string> overrides;
  try {
    for (std::size_t i = 1; i < args.size(); ++i) {
      auto need_value = [&](const std::string& flag) -> std::string {
        if (i + 1 >= args.size()) throw UsageError(flag + " requires a value");
        return args[++i];
      };
      if (args[i] == "--out") ctx.out_dir = need_value("--out");
      else if (args[i] == "--config") config_path = need_value("--config");
      else if (args[i] == "--seed") ctx.seed = std::stoull(need_value("--seed"));
      else if (args[i] == "--jobs") ctx.jobs = std::stoi(need_value("--jobs"));
      else if (args[i] == "--set") overrides.push_back(need_value("--set"));
      else if (args[i] == "--help" || args[i] == "-h") {
        std::cout << usage;
        return 0;
      } else {
        throw UsageError("unknown flag '" + args[i] + "'");
      }
    }
    if (ctx.out_dir.empty()) throw UsageError("--out DIR is required");
    if (ctx.jobs < 1) throw UsageError("--jobs must be >= 1");
    if (!config_path.empty()) {
      try {
        ctx.cfg = Config::from_file(config_path);
      } catch (const std::exception& e) {
        throw DataError(e.what());
      }
    }
    for (const std::string& o : overrides) {
      try {
        ctx.cfg.set_from_assignment(o);
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n" << usage;
    return 1;
  }
  return run_command(command, ctx);
}

}  // namespace gradmm::cli
