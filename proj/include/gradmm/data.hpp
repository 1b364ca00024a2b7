#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gradmm/rng.hpp"

namespace gradmm {

struct Example {
  std::string text;
  std::string label;
};

struct Vocab {
  std::vector<std::string> tokens;
  int pad = 0, bos = 1, eos = 2, unk = 3;
  std::map<std::string, int> label_tokens;  // class name -> token id
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(tokens.size()); }

  int id_of(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? unk : it->second;
  }

  void rebuild_index() {
    index.clear();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (index.count(tokens[i]))
        throw std::invalid_argument("vocab: duplicate token '" + tokens[i] + "'");
      index[tokens[i]] = static_cast<int>(i);
    }
  }
};

struct TokenSequence {
  std::vector<int> prompt;
  std::vector<int> response;
  std::string label;
};

inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

inline std::vector<int> tokenize(const std::string& text, const Vocab& vocab) {
  std::vector<int> ids;
  for (const std::string& w : split_words(text)) ids.push_back(vocab.id_of(w));
  return ids;
}

inline std::string detokenize(const std::vector<int>& ids, const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out += ' ';
    out += vocab.tokens[static_cast<std::size_t>(id)];
  }
  return out;
}

// Word-level vocabulary from corpus frequency, capped, with specials and one
// label token per class.
inline Vocab build_vocab(const std::vector<Example>& corpus, int cap) {
  std::map<std::string, int> freq;
  std::map<std::string, bool> labels;
  for (const Example& ex : corpus) {
    for (const std::string& w : split_words(ex.text)) ++freq[w];
    if (!ex.label.empty()) labels[ex.label] = true;
  }
  Vocab v;
  v.tokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (const auto& [lab, _] : labels) {
    v.label_tokens[lab] = static_cast<int>(v.tokens.size());
    v.tokens.push_back("<" + lab + ">");
  }
  std::vector<std::pair<int, std::string>> by_freq;
  for (const auto& [w, c] : freq) by_freq.push_back({-c, w});
  std::sort(by_freq.begin(), by_freq.end());
  for (const auto& [negc, w] : by_freq) {
    if (static_cast<int>(v.tokens.size()) >= cap) break;
    v.tokens.push_back(w);
  }
  v.rebuild_index();
  return v;
}

inline void save_vocab(const Vocab& v, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write vocab file " + path);
  for (const std::string& t : v.tokens) f << t << "\n";
}

inline Vocab load_vocab(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read vocab file " + path);
  Vocab v;
  v.tokens.clear();
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) v.tokens.push_back(line);
  }
  for (std::size_t i = 0; i < v.tokens.size(); ++i) {
    const std::string& t = v.tokens[i];
    if (t.size() > 2 && t.front() == '<' && t.back() == '>' && t != "<pad>" && t != "<bos>" &&
        t != "<eos>" && t != "<unk>")
      v.label_tokens[t.substr(1, t.size() - 2)] = static_cast<int>(i);
  }
  v.rebuild_index();
  return v;
}

inline std::vector<Example> load_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read dataset " + path);
  std::vector<Example> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    out.push_back({j.at("text").get<std::string>(),
                   j.value("label", std::string())});
  }
  return out;
}

inline void save_jsonl(const std::vector<Example>& data, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write dataset " + path);
  for (const Example& ex : data) {
    nlohmann::json j{{"text", ex.text}, {"label", ex.label}};
    f << j.dump() << "\n";
  }
}

// SFT encoding: prompt = <bos> + text tokens, response = the single label token.
inline TokenSequence encode_example(const Example& ex, const Vocab& vocab, int n_max) {
  TokenSequence seq;
  seq.label = ex.label;
  seq.prompt.push_back(vocab.bos);
  for (int id : tokenize(ex.text, vocab)) seq.prompt.push_back(id);
  auto it = vocab.label_tokens.find(ex.label);
  if (it == vocab.label_tokens.end())
    throw std::invalid_argument("unknown label '" + ex.label + "'");
  seq.response.push_back(it->second);
  if (static_cast<int>(seq.prompt.size() + seq.response.size()) > n_max)
    seq.prompt.resize(static_cast<std::size_t>(n_max - 1));
  return seq;
}

// ---------------------------------------------------------------------------
// Toy two-class keyword sentiment corpus. Templated sentences with
// class-indicative adjectives; seeded and fully self-contained.
// ---------------------------------------------------------------------------

namespace toy {

inline const std::vector<std::string>& positive_words() {
  static const std::vector<std::string> w = {"great",    "wonderful", "amazing",
                                             "brilliant", "superb",    "charming",
                                             "excellent", "delightful"};
  return w;
}

inline const std::vector<std::string>& negative_words() {
  static const std::vector<std::string> w = {"terrible", "awful",   "boring", "dreadful",
                                             "dull",     "horrible", "bland",  "tedious"};
  return w;
}

inline const std::vector<std::string>& templates() {
  static const std::vector<std::string> t = {
      "the movie was * and *",
      "i found the plot * and the acting *",
      "a truly * film with a * story",
      "the cast felt * and the script was *",
      "what a * movie with such * scenes",
      "the story seemed * and quite *",
      "this film is * with * acting",
      "it was a * picture and a * script",
  };
  return t;
}

inline Example make_example(Rng& rng, bool positive) {
  const auto& tmpl = templates()[rng.uniform_int(templates().size())];
  const auto& words = positive ? positive_words() : negative_words();
  std::string text;
  for (char ch : tmpl) {
    if (ch == '*')
      text += words[rng.uniform_int(words.size())];
    else
      text.push_back(ch);
  }
  return {text, positive ? "positive" : "negative"};
}

inline std::vector<Example> generate(const Rng& root, int n, std::string_view stream) {
  Rng rng = root.split(stream);
  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(make_example(rng, i % 2 == 0));
  return out;
}

}  // namespace toy

}  // namespace gradmm
