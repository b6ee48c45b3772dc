#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "topopred/topology.hpp"

namespace topopred {

/// Pseudo-symbol marking the end of a signature word. Sits alongside the
/// 2n letters in every continuation distribution so that whole-word
/// probabilities are well defined.
inline constexpr int kEndSymbol = 0;

/// Sub-word occurrence counts over a corpus of reduced signature words.
struct CorpusStats {
  std::map<Word, long> word_counts;                  // F(p), |p| <= max_order + 1
  std::map<Word, std::map<int, long>> next_counts;   // F(a|p), context |p| <= max_order
  std::map<int, long> length_counts;                 // histogram of |h|
  int alphabet_size = 0;                             // 2n
  long corpus_size = 0;                              // K
  int max_order = 0;                                 // L

  /// Total number of length-len sub-word occurrences across the corpus.
  long subword_total(int len) const;
  int max_signature_length() const;
};

CorpusStats collect_stats(const std::vector<Word>& corpus, int max_order, int alphabet_size);

/// Rule-of-succession estimate of seeing sub-word p:
/// (F(p) + 1) / (F(p^C) + |A|), with F(p^C) the count of all other
/// sub-words of the same length. A thresholding heuristic, not a
/// normalized distribution.
double laplace_word_prob(const Word& p, const CorpusStats& stats);

/// Add-one smoothed probability that `symbol` (a letter or kEndSymbol)
/// follows context p, normalized over the 2n+1 continuation symbols.
double laplace_next_prob(int symbol, const Word& p, const CorpusStats& stats);

/// Full continuation distribution at context p (letters and kEndSymbol).
/// Sums to one exactly.
std::map<int, double> next_distribution(const Word& p, const CorpusStats& stats);

/// Predictive-gain score for extending context p to ap:
/// P(ap) * KL(P(.|ap) || P(.|p)) over the continuation alphabet.
/// Requires p to be the longest proper suffix of ap.
double kl_criterion(const Word& ap, const Word& p, const CorpusStats& stats);

/// Prediction suffix tree node. The child under letter a carries context
/// (a ++ context), i.e. children extend the remembered history backwards.
struct PstNode {
  Word context;
  std::map<Letter, std::unique_ptr<PstNode>> children;
  std::map<int, double> next_probs;  // includes kEndSymbol

  const PstNode* child(Letter a) const;
  bool leaf() const { return children.empty(); }
};

PstNode build_pst(const CorpusStats& stats, double epsilon);
PstNode build_pst(const std::vector<Word>& corpus, double epsilon, int max_order,
                  int alphabet_size);

/// Smoothed distribution over training word lengths 0..L_max.
struct LengthDistribution {
  std::map<int, double> probs;

  double prob(int length) const;
  int max_length() const { return probs.empty() ? 0 : probs.rbegin()->first; }
};

LengthDistribution estimate_length_distribution(const CorpusStats& stats);

struct PsaState {
  Word context;
  std::map<int, double> next_probs;      // transition probabilities + end symbol
  std::map<Letter, int> transitions;     // letter -> index of next state
};

/// Variable-order Markov model in automaton form. States are the contexts
/// of the completed suffix tree; reading letter a from state s moves to
/// the longest suffix of (s ++ a) that is a state, which always exists
/// because the context set is suffix-closed.
struct Psa {
  std::vector<PsaState> states;  // sorted by context
  int initial_state = 0;         // index of the empty context
  int max_order = 0;
  double epsilon = 0.0;
  int alphabet_size = 0;
  int max_signature_length = 0;

  int state_index(const Word& context) const;  // -1 when absent
  int step(int state, Letter a) const;
};

/// Closes the tree so every context's one-shorter prefix is present, then
/// takes all contexts as automaton states.
Psa complete_to_psa(const PstNode& root, const CorpusStats& stats, double epsilon);

/// Probability of the whole word h: walk the automaton from the empty
/// context multiplying transition probabilities, then the end-symbol
/// probability at the final state. Zero for |h| beyond the longest
/// training signature.
double sequence_prob(const Word& h, const Psa& psa);

struct ClassPosterior {
  std::map<Word, double> probs;
  bool fallback = false;  // no support word was compatible with the prefix
};

/// P(h | p) over the given support: proportional to P(h) * P(|h|) for
/// compatible h (incompatible entries get exactly zero), normalized.
/// With weight_by_length false the length factor is dropped.
/// When nothing is compatible, returns the unconditioned normalized
/// distribution over the support and sets the fallback flag.
ClassPosterior posterior_over_full(const Word& p, const Psa& psa,
                                   const LengthDistribution& lengths,
                                   const std::vector<Word>& support,
                                   bool weight_by_length = true);

struct VompModel {
  Psa psa;
  LengthDistribution lengths;
};

std::string vomp_to_json(const VompModel& model);
VompModel vomp_from_json(const std::string& text);
void save_vomp(const VompModel& model, const std::string& path);
VompModel load_vomp(const std::string& path);

}  // namespace topopred
