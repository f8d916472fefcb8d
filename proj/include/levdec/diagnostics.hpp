#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "levdec/edit.hpp"
#include "levdec/engine.hpp"
#include "levdec/errors.hpp"
#include "levdec/rng.hpp"
#include "levdec/sentence.hpp"

namespace levdec {

// ---------------------------------------------------------------------------
// Length per refinement stage.

struct StageLengthRow {
  std::string tag;
  std::size_t traces = 0;        // traces that reached this stage
  double mean_len = 0.0;         // content tokens, placeholders included
  double mean_len_nostop = 0.0;  // after stop-word stripping
};

struct IterLengthStats {
  std::vector<StageLengthRow> rows;  // stage order, then "final"

  const StageLengthRow* find(const std::string& tag) const {
    for (const auto& row : rows) {
      if (row.tag == tag) return &row;
    }
    return nullptr;
  }
};

inline IterLengthStats iteration_length_stats(const std::vector<DecodeTrace>& traces,
                                              const StopList& stoplist, const Vocab& vocab) {
  if (traces.empty()) throw ContractError("iteration_length_stats: no traces");
  struct Acc {
    std::size_t count = 0;
    std::size_t len = 0;
    std::size_t len_nostop = 0;
  };
  std::map<std::pair<int, int>, Acc> acc;  // (round, stage kind) -> sums
  Acc final_acc;
  const auto measure = [&](const Sentence& content, Acc& a) {
    a.count += 1;
    a.len += content.size();
    a.len_nostop += strip_stopwords(content, stoplist, vocab).size();
  };
  for (const auto& trace : traces) {
    for (const auto& stage : trace.stages) {
      measure(strip_sentinels(stage.snapshot), acc[{stage.round, static_cast<int>(stage.kind)}]);
    }
    measure(trace.final, final_acc);
  }

  IterLengthStats stats;
  for (const auto& [key, a] : acc) {
    DecodeStage tag_stage{static_cast<StageKind>(key.second), key.first, {}};
    stats.rows.push_back({tag_stage.tag(), a.count,
                          static_cast<double>(a.len) / static_cast<double>(a.count),
                          static_cast<double>(a.len_nostop) / static_cast<double>(a.count)});
  }
  stats.rows.push_back({"final", final_acc.count,
                        static_cast<double>(final_acc.len) / static_cast<double>(final_acc.count),
                        static_cast<double>(final_acc.len_nostop) /
                            static_cast<double>(final_acc.count)});
  return stats;
}

// ---------------------------------------------------------------------------
// Duplication and invalid words.

// Number of positions whose token equals its left neighbour: "a b b b c"
// has two.
inline std::size_t count_duplicates(const Sentence& s) {
  std::size_t count = 0;
  for (std::size_t i = 1; i < s.size(); ++i) count += (s.ids[i] == s.ids[i - 1]);
  return count;
}

inline std::size_t count_duplicates(const Sentence& s, const StopList& stoplist,
                                    const Vocab& vocab) {
  return count_duplicates(strip_stopwords(s, stoplist, vocab));
}

struct InvalidWordStats {
  std::size_t invalid_words = 0;
  std::size_t sentences_with_invalid = 0;
  std::size_t total_words = 0;
};

// A merged word is invalid iff absent from the word-level lexicon built
// from the training targets.
inline InvalidWordStats count_invalid_words(const std::vector<Sentence>& hypotheses,
                                            const std::unordered_set<std::string>& lexicon,
                                            const Vocab& vocab) {
  InvalidWordStats stats;
  for (const auto& hyp : hypotheses) {
    std::size_t invalid_here = 0;
    for (const auto& word : merge_to_words(hyp, vocab).words) {
      stats.total_words += 1;
      if (lexicon.find(word) == lexicon.end()) ++invalid_here;
    }
    stats.invalid_words += invalid_here;
    if (invalid_here > 0) stats.sentences_with_invalid += 1;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Subword statistics.

struct SubwordStats {
  double sub_ratio = 0.0;       // subword tokens / all tokens
  double mean_sub_count = 0.0;  // per sentence
  double mean_tok_count = 0.0;  // per sentence
  std::size_t total_sub = 0;
  std::size_t total_tok = 0;
};

inline SubwordStats subword_stats(const std::vector<Sentence>& hypotheses) {
  if (hypotheses.empty()) throw ContractError("subword_stats: empty corpus");
  SubwordStats stats;
  for (const auto& s : hypotheses) {
    stats.total_tok += s.size();
    for (std::size_t i = 0; i < s.size(); ++i) stats.total_sub += is_subword_token(s, i);
  }
  const double n = static_cast<double>(hypotheses.size());
  stats.mean_sub_count = static_cast<double>(stats.total_sub) / n;
  stats.mean_tok_count = static_cast<double>(stats.total_tok) / n;
  stats.sub_ratio = stats.total_tok == 0
                        ? 0.0
                        : static_cast<double>(stats.total_sub) / static_cast<double>(stats.total_tok);
  return stats;
}

// ---------------------------------------------------------------------------
// Probe sets: incomplete sentences with gold insertion labels.

enum class ProbeKind { kSubword, kFullword, kRandom };

inline const char* probe_kind_name(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::kSubword: return "subword";
    case ProbeKind::kFullword: return "fullword";
    case ProbeKind::kRandom: return "random";
  }
  return "?";
}

struct Probe {
  std::size_t sentence_id = 0;
  Sentence init;                                // surviving tokens
  std::vector<int> gold_counts;                 // per init gap
  std::vector<std::vector<TokenId>> gold_fills; // per init gap, in order
};

struct ProbeSet {
  ProbeKind kind = ProbeKind::kRandom;
  double ratio = 0.0;
  std::vector<Probe> probes;
  std::vector<std::size_t> skipped;  // sentences with no eligible token
};

// Deletes ceil(ratio * eligible) uniformly chosen eligible tokens from
// each reference. Gold labels are tracked by position and cross-checked
// against the minimal edit script.
inline ProbeSet make_probe_set(const std::vector<Sentence>& references, ProbeKind kind,
                               double ratio, std::uint64_t seed, const Vocab& vocab) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ContractError("make_probe_set: ratio outside (0, 1]");
  ProbeSet set;
  set.kind = kind;
  set.ratio = ratio;
  const std::uint64_t grid_seed =
      splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(kind) << 32) +
                                   static_cast<std::uint64_t>(ratio * 1000.0)));
  for (std::size_t id = 0; id < references.size(); ++id) {
    const Sentence& ref = references[id];
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const bool sub = is_subword_token(ref, i);
      if (kind == ProbeKind::kRandom || (kind == ProbeKind::kSubword && sub) ||
          (kind == ProbeKind::kFullword && !sub)) {
        eligible.push_back(i);
      }
    }
    if (eligible.empty()) {
      set.skipped.push_back(id);
      continue;
    }
    const auto k = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(eligible.size())));
    Rng rng = split_rng(grid_seed, RngStream::kProbe, id);
    const auto picks = rng.choose(eligible.size(), k);
    std::vector<std::uint8_t> dropped(ref.size(), 0);
    for (std::size_t p : picks) dropped[eligible[p]] = 1;

    Probe probe;
    probe.sentence_id = id;
    probe.gold_counts.assign(1, 0);
    probe.gold_fills.assign(1, {});
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (dropped[i]) {
        probe.gold_counts.back() += 1;
        probe.gold_fills.back().push_back(ref.ids[i]);
      } else {
        probe.init.push_back(ref.ids[i], ref.continues_at(i));
        probe.gold_counts.push_back(0);
        probe.gold_fills.emplace_back();
      }
    }

    // Cross-check the tracked labels against the DP script.
    const EditLabels script = edit_labels_uncapped(probe.init, ref);
    int tracked_total = 0;
    for (int c : probe.gold_counts) tracked_total += c;
    bool ok = script.cost() == tracked_total && tracked_total == static_cast<int>(k);
    for (auto d : script.del_labels) ok = ok && d == 0;
    if (ok) {
      EditLabels tracked;
      tracked.del_labels.assign(probe.init.size(), 0);
      tracked.ins_counts = probe.gold_counts;
      for (const auto& fills : probe.gold_fills) {
        tracked.fill_tokens.insert(tracked.fill_tokens.end(), fills.begin(), fills.end());
      }
      ok = apply_edit(probe.init, tracked, vocab) == ref;
    }
    if (!ok) throw Error("make_probe_set: gold labels disagree with the edit script");
    set.probes.push_back(std::move(probe));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Placeholder-length prediction accuracy.

// Fraction of gaps whose predicted count equals the gold count.
inline double pld_accuracy(const std::vector<int>& pred, const std::vector<int>& gold) {
  if (pred.size() != gold.size()) throw ContractError("pld_accuracy: gap counts differ");
  if (pred.empty()) throw ContractError("pld_accuracy: no gaps");
  std::size_t hit = 0;
  for (std::size_t g = 0; g < pred.size(); ++g) hit += (pred[g] == gold[g]);
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

// Alternative reading: restrict to gaps with a nonzero gold count.
inline std::optional<double> pld_accuracy_nonzero(const std::vector<int>& pred,
                                                  const std::vector<int>& gold) {
  if (pred.size() != gold.size()) throw ContractError("pld_accuracy: gap counts differ");
  std::size_t hit = 0, considered = 0;
  for (std::size_t g = 0; g < pred.size(); ++g) {
    if (gold[g] == 0) continue;
    ++considered;
    hit += (pred[g] == gold[g]);
  }
  if (considered == 0) return std::nullopt;
  return static_cast<double>(hit) / static_cast<double>(considered);
}

// ---------------------------------------------------------------------------
// Order-insensitive matched tokens per gap.

struct MatchedTokens {
  std::size_t matched = 0;    // sum of per-gap multiset intersections
  std::size_t gold_total = 0; // gold fill tokens
  std::size_t gaps = 0;       // init length + 1
  std::size_t gold_gaps = 0;  // gaps with nonzero gold
};

namespace detail {

// Leftmost-greedy anchor positions of `anchors` inside `host`; throws if
// the anchors are not a subsequence.
inline std::vector<std::size_t> anchor_positions(const Sentence& anchors, const Sentence& host,
                                                 const char* what) {
  std::vector<std::size_t> pos;
  std::size_t j = 0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    while (j < host.size() && host.ids[j] != anchors.ids[i]) ++j;
    if (j == host.size()) {
      throw Error(std::string("matched_tokens: init is not a subsequence of the ") + what);
    }
    pos.push_back(j++);
  }
  return pos;
}

inline std::vector<std::vector<TokenId>> gap_segments(const Sentence& host,
                                                      const std::vector<std::size_t>& anchors) {
  std::vector<std::vector<TokenId>> segments(anchors.size() + 1);
  std::size_t g = 0;
  for (std::size_t i = 0; i < host.size(); ++i) {
    if (g < anchors.size() && i == anchors[g]) {
      ++g;
      continue;
    }
    segments[g].push_back(host.ids[i]);
  }
  return segments;
}

inline std::size_t multiset_intersection(std::vector<TokenId> a, std::vector<TokenId> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<TokenId> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return both.size();
}

}  // namespace detail

// Counts fill tokens matched regardless of order, gap by gap, with the
// init tokens as anchors: init "a d", reference "a b c d", prediction
// "a c b d" matches 2.
inline MatchedTokens matched_tokens(const Sentence& init, const Sentence& predicted,
                                    const Sentence& reference) {
  const auto pred_anchors = detail::anchor_positions(init, predicted, "prediction");
  const auto ref_anchors = detail::anchor_positions(init, reference, "reference");
  const auto pred_segments = detail::gap_segments(predicted, pred_anchors);
  const auto ref_segments = detail::gap_segments(reference, ref_anchors);

  MatchedTokens result;
  result.gaps = init.size() + 1;
  for (std::size_t g = 0; g < result.gaps; ++g) {
    result.gold_total += ref_segments[g].size();
    if (!ref_segments[g].empty()) result.gold_gaps += 1;
    result.matched += detail::multiset_intersection(pred_segments[g], ref_segments[g]);
  }
  return result;
}

inline double matched_token_count(const Sentence& init, const Sentence& predicted,
                                  const Sentence& reference) {
  return static_cast<double>(matched_tokens(init, predicted, reference).matched);
}

// ---------------------------------------------------------------------------
// Fill precision / recall by token class.

enum class TokenClass { kSubword, kFullword, kAll };

struct FillToken {
  TokenId id;
  bool subword;
};

struct PrecisionRecall {
  std::optional<double> precision;  // nullopt when nothing was predicted
  std::optional<double> recall;     // nullopt when there is no gold
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

// Classifies the tokens at `positions` within their host sentence, where
// subword status depends on neighbours.
inline std::vector<FillToken> classify_tokens(const Sentence& host,
                                              const std::vector<std::size_t>& positions) {
  std::vector<FillToken> out;
  out.reserve(positions.size());
  for (std::size_t p : positions) out.push_back({host.ids[p], is_subword_token(host, p)});
  return out;
}

inline PrecisionRecall fill_precision_recall(std::span<const FillToken> predicted,
                                             std::span<const FillToken> gold, TokenClass cls) {
  const auto keep = [cls](const FillToken& t) {
    return cls == TokenClass::kAll || (cls == TokenClass::kSubword) == t.subword;
  };
  std::vector<TokenId> p, g;
  for (const auto& t : predicted) {
    if (keep(t)) p.push_back(t.id);
  }
  for (const auto& t : gold) {
    if (keep(t)) g.push_back(t.id);
  }
  PrecisionRecall result;
  result.predicted = p.size();
  result.gold = g.size();
  result.matched = detail::multiset_intersection(std::move(p), std::move(g));
  if (result.predicted > 0) {
    result.precision = static_cast<double>(result.matched) / static_cast<double>(result.predicted);
  }
  if (result.gold > 0) {
    result.recall = static_cast<double>(result.matched) / static_cast<double>(result.gold);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Corruption generators.

// Random permutation used to assign mismatched targets as decoding
// initializations. Fixed points are re-rolled once by swapping with a
// random other position, then accepted.
inline std::vector<std::size_t> corrupt_no_accuracy(std::size_t count, Rng& rng) {
  if (count < 2) throw ContractError("corrupt_no_accuracy: need at least two sentences");
  std::vector<std::size_t> perm(count);
  for (std::size_t i = 0; i < count; ++i) perm[i] = i;
  rng.shuffle(perm);
  for (std::size_t i = 0; i < count; ++i) {
    if (perm[i] != i) continue;
    std::size_t j = rng.below(count - 1);
    if (j >= i) ++j;
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

// Shuffles word-level units (subword groups move together) and
// re-flattens to BPE tokens.
inline Sentence corrupt_no_fluency(const Sentence& reference, Rng& rng) {
  auto groups = word_group_ranges(reference);
  rng.shuffle(groups);
  Sentence out;
  for (const auto& [begin, end] : groups) {
    for (std::size_t i = begin; i < end; ++i) {
      out.push_back(reference.ids[i], reference.continues_at(i));
    }
  }
  return out;
}

}  // namespace levdec
