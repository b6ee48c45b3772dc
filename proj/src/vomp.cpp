#include "topopred/vomp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "topopred/errors.hpp"

namespace topopred {

namespace {

Word subword(const Word& w, std::size_t begin, std::size_t len) {
  const auto& l = w.letters();
  return Word(std::vector<Letter>(l.begin() + begin, l.begin() + begin + len));
}

// Longest proper suffix: drop the oldest (first) letter.
Word drop_first(const Word& w) {
  return Word(std::vector<Letter>(w.letters().begin() + 1, w.letters().end()));
}

// Longest proper prefix: drop the newest (last) letter.
Word drop_last(const Word& w) {
  return Word(std::vector<Letter>(w.letters().begin(), w.letters().end() - 1));
}

Word prepend(Letter a, const Word& w) {
  std::vector<Letter> l;
  l.reserve(w.size() + 1);
  l.push_back(a);
  l.insert(l.end(), w.letters().begin(), w.letters().end());
  return Word(std::move(l));
}

Word append(const Word& w, Letter a) {
  std::vector<Letter> l = w.letters();
  l.push_back(a);
  return Word(std::move(l));
}

std::vector<Letter> alphabet_letters(int alphabet_size) {
  const int n = alphabet_size / 2;
  std::vector<Letter> letters;
  letters.reserve(alphabet_size);
  for (int a = -n; a <= n; ++a)
    if (a != 0) letters.push_back(a);
  return letters;
}

// Inserts w and all of its suffixes; tree paths always run through them.
void add_suffix_path(std::set<Word>& contexts, const Word& w) {
  for (std::size_t len = 0; len <= w.size(); ++len)
    contexts.insert(subword(w, w.size() - len, len));
}

}  // namespace

long CorpusStats::subword_total(int len) const {
  long total = 0;
  for (const auto& [word_len, count] : length_counts) {
    if (len == 0)
      total += count * (word_len + 1);
    else if (word_len >= len)
      total += count * (word_len - len + 1);
  }
  return total;
}

int CorpusStats::max_signature_length() const {
  return length_counts.empty() ? 0 : length_counts.rbegin()->first;
}

CorpusStats collect_stats(const std::vector<Word>& corpus, int max_order,
                          int alphabet_size) {
  if (corpus.empty()) throw EmptyCorpus("cannot collect statistics from an empty corpus");
  if (max_order < 1) throw std::invalid_argument("max_order must be >= 1");
  if (alphabet_size < 2 || alphabet_size % 2 != 0)
    throw std::invalid_argument("alphabet_size must be a positive even number");

  CorpusStats stats;
  stats.alphabet_size = alphabet_size;
  stats.max_order = max_order;
  stats.corpus_size = static_cast<long>(corpus.size());
  const int n = alphabet_size / 2;

  for (const Word& w : corpus) {
    if (!w.reduced()) throw std::invalid_argument("corpus words must be reduced");
    for (Letter l : w.letters())
      if (l > n || l < -n)
        throw std::invalid_argument("corpus letter outside the alphabet");

    const int len = static_cast<int>(w.size());
    ++stats.length_counts[len];

    for (int i = 0; i < len; ++i)
      for (int l = 1; l <= max_order + 1 && i + l <= len; ++l)
        ++stats.word_counts[subword(w, i, l)];
    stats.word_counts[Word{}] += len + 1;

    // Every occurrence of a context has exactly one continuation: the
    // following letter, or the end symbol at the word's end.
    for (int j = 0; j <= len; ++j) {
      const int next = (j == len) ? kEndSymbol : w.letters()[j];
      for (int l = 0; l <= max_order && l <= j; ++l)
        ++stats.next_counts[subword(w, j - l, l)][next];
    }
  }
  return stats;
}

double laplace_word_prob(const Word& p, const CorpusStats& stats) {
  const auto it = stats.word_counts.find(p);
  const long count = it == stats.word_counts.end() ? 0 : it->second;
  const long complement =
      std::max(0L, stats.subword_total(static_cast<int>(p.size())) - count);
  return static_cast<double>(count + 1) /
         static_cast<double>(complement + stats.alphabet_size);
}

double laplace_next_prob(int symbol, const Word& p, const CorpusStats& stats) {
  long count = 0;
  long total = 0;
  if (const auto it = stats.next_counts.find(p); it != stats.next_counts.end()) {
    for (const auto& [sym, c] : it->second) {
      total += c;
      if (sym == symbol) count = c;
    }
  }
  return static_cast<double>(count + 1) /
         static_cast<double>(total + stats.alphabet_size + 1);
}

std::map<int, double> next_distribution(const Word& p, const CorpusStats& stats) {
  std::map<int, double> dist;
  dist[kEndSymbol] = laplace_next_prob(kEndSymbol, p, stats);
  for (Letter a : alphabet_letters(stats.alphabet_size))
    dist[a] = laplace_next_prob(a, p, stats);
  return dist;
}

double kl_criterion(const Word& ap, const Word& p, const CorpusStats& stats) {
  if (ap.empty() || drop_first(ap) != p)
    throw std::invalid_argument("kl_criterion expects p to be the longest proper suffix of ap");
  const std::map<int, double> child = next_distribution(ap, stats);
  const std::map<int, double> parent = next_distribution(p, stats);
  double kl = 0.0;
  for (const auto& [sym, pc] : child) kl += pc * std::log(pc / parent.at(sym));
  if (kl < 0.0) kl = 0.0;  // roundoff only, KL is nonnegative
  return laplace_word_prob(ap, stats) * kl;
}

const PstNode* PstNode::child(Letter a) const {
  const auto it = children.find(a);
  return it == children.end() ? nullptr : it->second.get();
}

namespace {

PstNode materialize_tree(const std::set<Word>& contexts, const CorpusStats& stats,
                         const Word& context) {
  PstNode node;
  node.context = context;
  node.next_probs = next_distribution(context, stats);
  for (Letter a : alphabet_letters(stats.alphabet_size)) {
    const Word extended = prepend(a, context);
    if (contexts.count(extended)) {
      auto child = std::make_unique<PstNode>(materialize_tree(contexts, stats, extended));
      node.children.emplace(a, std::move(child));
    }
  }
  return node;
}

void collect_contexts(const PstNode& node, std::set<Word>& out) {
  out.insert(node.context);
  for (const auto& [a, child] : node.children) collect_contexts(*child, out);
}

}  // namespace

PstNode build_pst(const CorpusStats& stats, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");

  std::set<Word> contexts;
  contexts.insert(Word{});

  std::deque<Word> candidates;
  std::set<Word> enqueued;
  for (Letter a : alphabet_letters(stats.alphabet_size)) {
    const Word w({a});
    if (laplace_word_prob(w, stats) >= epsilon) {
      candidates.push_back(w);
      enqueued.insert(w);
    }
  }

  while (!candidates.empty()) {
    const Word p = candidates.front();
    candidates.pop_front();
    if (kl_criterion(p, drop_first(p), stats) >= epsilon) add_suffix_path(contexts, p);
    if (static_cast<int>(p.size()) < stats.max_order) {
      for (Letter a : alphabet_letters(stats.alphabet_size)) {
        const Word extended = prepend(a, p);
        // Sub-words of reduced corpus words are reduced; unreduced
        // candidates can never gather counts.
        if (!extended.reduced() || enqueued.count(extended)) continue;
        if (laplace_word_prob(extended, stats) >= epsilon) {
          candidates.push_back(extended);
          enqueued.insert(extended);
        }
      }
    }
  }

  return materialize_tree(contexts, stats, Word{});
}

PstNode build_pst(const std::vector<Word>& corpus, double epsilon, int max_order,
                  int alphabet_size) {
  return build_pst(collect_stats(corpus, max_order, alphabet_size), epsilon);
}

double LengthDistribution::prob(int length) const {
  const auto it = probs.find(length);
  return it == probs.end() ? 0.0 : it->second;
}

LengthDistribution estimate_length_distribution(const CorpusStats& stats) {
  LengthDistribution dist;
  const int max_len = stats.max_signature_length();
  const double denom =
      static_cast<double>(stats.corpus_size) + static_cast<double>(max_len + 1);
  for (int k = 0; k <= max_len; ++k) {
    const auto it = stats.length_counts.find(k);
    const long count = it == stats.length_counts.end() ? 0 : it->second;
    dist.probs[k] = static_cast<double>(count + 1) / denom;
  }
  return dist;
}

int Psa::state_index(const Word& context) const {
  const auto it = std::lower_bound(
      states.begin(), states.end(), context,
      [](const PsaState& s, const Word& w) { return s.context < w; });
  if (it == states.end() || !(it->context == context)) return -1;
  return static_cast<int>(it - states.begin());
}

int Psa::step(int state, Letter a) const {
  return states[state].transitions.at(a);
}

Psa complete_to_psa(const PstNode& root, const CorpusStats& stats, double epsilon) {
  std::set<Word> contexts;
  collect_contexts(root, contexts);

  // Close under one-shorter prefixes so the longest-suffix walk stays
  // consistent with the full history.
  bool changed = true;
  while (changed) {
    changed = false;
    const std::set<Word> snapshot = contexts;
    for (const Word& w : snapshot) {
      if (w.empty()) continue;
      const Word prefix = drop_last(w);
      if (!contexts.count(prefix)) {
        add_suffix_path(contexts, prefix);
        changed = true;
      }
    }
  }

  Psa psa;
  psa.max_order = stats.max_order;
  psa.epsilon = epsilon;
  psa.alphabet_size = stats.alphabet_size;
  psa.max_signature_length = stats.max_signature_length();
  psa.states.reserve(contexts.size());
  for (const Word& w : contexts) {
    PsaState state;
    state.context = w;
    state.next_probs = next_distribution(w, stats);
    psa.states.push_back(std::move(state));
  }

  const auto longest_suffix_state = [&](const Word& w) {
    Word probe = w;
    while (!contexts.count(probe)) probe = drop_first(probe);
    return psa.state_index(probe);
  };

  for (PsaState& state : psa.states)
    for (Letter a : alphabet_letters(stats.alphabet_size))
      state.transitions[a] = longest_suffix_state(append(state.context, a));

  psa.initial_state = psa.state_index(Word{});
  return psa;
}

double sequence_prob(const Word& h, const Psa& psa) {
  if (!h.reduced()) throw std::invalid_argument("sequence_prob expects a reduced word");
  if (static_cast<int>(h.size()) > psa.max_signature_length) return 0.0;
  const int n = psa.alphabet_size / 2;
  int state = psa.initial_state;
  double prob = 1.0;
  for (Letter a : h.letters()) {
    if (a > n || a < -n) return 0.0;  // letter outside the model's alphabet
    prob *= psa.states[state].next_probs.at(a);
    state = psa.step(state, a);
  }
  return prob * psa.states[state].next_probs.at(kEndSymbol);
}

ClassPosterior posterior_over_full(const Word& p, const Psa& psa,
                                   const LengthDistribution& lengths,
                                   const std::vector<Word>& support,
                                   bool weight_by_length) {
  ClassPosterior posterior;
  if (support.empty()) {
    posterior.fallback = true;
    return posterior;
  }
  double total = 0.0;
  for (const Word& h : support) {
    double mass = 0.0;
    if (is_compatible(h, p)) {
      mass = sequence_prob(h, psa);
      if (weight_by_length) mass *= lengths.prob(static_cast<int>(h.size()));
    }
    posterior.probs[h] = mass;
    total += mass;
  }
  if (total <= 0.0) {
    posterior.fallback = true;
    total = 0.0;
    for (const Word& h : support) {
      double mass = sequence_prob(h, psa);
      if (weight_by_length) mass *= lengths.prob(static_cast<int>(h.size()));
      posterior.probs[h] = mass;
      total += mass;
    }
    if (total <= 0.0) {  // no usable mass at all, fall back to uniform
      for (auto& [h, prob] : posterior.probs) prob = 1.0;
      total = static_cast<double>(posterior.probs.size());
    }
  }
  for (auto& [h, prob] : posterior.probs) prob /= total;
  return posterior;
}

namespace {

nlohmann::json word_to_json(const Word& w) { return nlohmann::json(w.letters()); }

Word word_from_json(const nlohmann::json& j) {
  return Word(j.get<std::vector<Letter>>());
}

}  // namespace

std::string vomp_to_json(const VompModel& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["model"] = "vomp-psa";
  j["epsilon"] = model.psa.epsilon;
  j["max_order"] = model.psa.max_order;
  j["alphabet_size"] = model.psa.alphabet_size;
  j["max_signature_length"] = model.psa.max_signature_length;
  j["initial_state"] = model.psa.initial_state;
  nlohmann::json states = nlohmann::json::array();
  for (const PsaState& s : model.psa.states) {
    nlohmann::json js;
    js["context"] = word_to_json(s.context);
    nlohmann::json probs = nlohmann::json::array();
    for (const auto& [sym, prob] : s.next_probs)
      probs.push_back(nlohmann::json::array({sym, prob}));
    js["next_probs"] = std::move(probs);
    nlohmann::json trans = nlohmann::json::array();
    for (const auto& [a, target] : s.transitions)
      trans.push_back(nlohmann::json::array({a, target}));
    js["transitions"] = std::move(trans);
    states.push_back(std::move(js));
  }
  j["states"] = std::move(states);
  nlohmann::json lengths = nlohmann::json::array();
  for (const auto& [k, prob] : model.lengths.probs)
    lengths.push_back(nlohmann::json::array({k, prob}));
  j["length_distribution"] = std::move(lengths);
  return j.dump(2) + "\n";
}

VompModel vomp_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("model").get<std::string>() != "vomp-psa")
    throw Error("not a vomp-psa model file");
  VompModel model;
  model.psa.epsilon = j.at("epsilon").get<double>();
  model.psa.max_order = j.at("max_order").get<int>();
  model.psa.alphabet_size = j.at("alphabet_size").get<int>();
  model.psa.max_signature_length = j.at("max_signature_length").get<int>();
  model.psa.initial_state = j.at("initial_state").get<int>();
  for (const auto& js : j.at("states")) {
    PsaState s;
    s.context = word_from_json(js.at("context"));
    for (const auto& entry : js.at("next_probs"))
      s.next_probs[entry[0].get<int>()] = entry[1].get<double>();
    for (const auto& entry : js.at("transitions"))
      s.transitions[entry[0].get<Letter>()] = entry[1].get<int>();
    model.psa.states.push_back(std::move(s));
  }
  for (const auto& entry : j.at("length_distribution"))
    model.lengths.probs[entry[0].get<int>()] = entry[1].get<double>();
  return model;
}

void save_vomp(const VompModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file: " + path);
  out << vomp_to_json(model);
}

VompModel load_vomp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return vomp_from_json(buf.str());
}

}  // namespace topopred
