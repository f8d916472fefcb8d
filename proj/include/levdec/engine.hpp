#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "levdec/errors.hpp"
#include "levdec/policy.hpp"
#include "levdec/rng.hpp"
#include "levdec/sentence.hpp"
#include "levdec/vocab.hpp"

namespace levdec {

// Per-gap chosen insertion count.
using GapInsertion = std::vector<int>;

struct DecodeOptions {
  int max_rounds = 10;
  // Initial content sentence; nullopt = start empty.
  std::optional<Sentence> init;
  // First-iteration length override, applied only when init is empty.
  std::optional<int> external_length_iter1;
  // Second-iteration multinomial length sampling seed.
  std::optional<std::uint64_t> sample_seed_iter2;
  // Softmax deletion threshold in [0, 1]; nullopt = argmax.
  std::optional<double> deletion_threshold;
};

enum class StageKind { kDel, kPld, kTok };

struct DecodeStage {
  StageKind kind;
  int round;          // 1-based
  Sentence snapshot;  // with sentinels

  std::string tag() const {
    const char* base = kind == StageKind::kDel ? "del_" : kind == StageKind::kPld ? "pld_" : "tok_";
    return base + std::to_string(round);
  }
};

enum class Termination { kFixpoint, kMaxRounds };

struct DecodeTrace {
  std::vector<DecodeStage> stages;
  int rounds_executed = 0;
  // Completed rounds before the fixpoint-detection pass; equals
  // rounds_executed when stopped by the round limit.
  int iterations = 0;
  Termination termination = Termination::kMaxRounds;
  Sentence final;  // content only
};

// Deletion mask from the softmax threshold rule: delete token i iff
// softmax(scores_i)[delete] > tau. tau = 0.5 reproduces argmax with
// keep-on-tie.
inline std::vector<std::uint8_t> threshold_delete(const DeleteScores& scores, double tau) {
  if (tau < 0.0 || tau > 1.0) throw ContractError("threshold_delete: tau outside [0, 1]");
  std::vector<std::uint8_t> mask(scores.size(), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto p = softmax(std::span<const double>(scores[i].data(), 2));
    mask[i] = p[1] > tau ? 1 : 0;
  }
  return mask;
}

inline std::vector<std::uint8_t> argmax_delete(const DeleteScores& scores) {
  std::vector<std::uint8_t> mask(scores.size(), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    mask[i] = scores[i][1] > scores[i][0] ? 1 : 0;  // keep on tie
  }
  return mask;
}

// Per-gap class drawn from softmax(score).
inline GapInsertion sample_gap_lengths(const GapScores& scores, Rng& rng) {
  GapInsertion counts(scores.size(), 0);
  for (std::size_t g = 0; g < scores.size(); ++g) {
    for (double s : scores[g]) {
      if (!std::isfinite(s)) throw ContractError("sample_gap_lengths: non-finite score");
    }
    counts[g] = static_cast<int>(rng.sample_softmax(scores[g]));
  }
  return counts;
}

namespace detail {

inline std::size_t argmax_index(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;  // smallest index on tie
  }
  return best;
}

inline Sentence apply_delete_mask(const Sentence& state, const std::vector<std::uint8_t>& mask) {
  Sentence out;
  out.push_back(kBos, false);
  for (std::size_t i = 1; i + 1 < state.size(); ++i) {
    if (!mask[i - 1]) out.push_back(state.ids[i], state.continues_at(i));
  }
  out.push_back(kEos, false);
  return out;
}

inline Sentence insert_placeholders(const Sentence& state, const GapInsertion& counts) {
  const std::size_t n = content_length(state);
  if (counts.size() != n + 1) throw ContractError("insert_placeholders: bad gap count");
  Sentence out;
  out.push_back(kBos, false);
  for (std::size_t g = 0; g <= n; ++g) {
    for (int k = 0; k < counts[g]; ++k) out.push_back(kPld, false);
    if (g < n) out.push_back(state.ids[g + 1], state.continues_at(g + 1));
  }
  out.push_back(kEos, false);
  return out;
}

inline GapInsertion argmax_gap_counts(const GapScores& scores) {
  GapInsertion counts(scores.size(), 0);
  for (std::size_t g = 0; g < scores.size(); ++g) {
    counts[g] = static_cast<int>(argmax_index(scores[g]));
  }
  return counts;
}

// Fills every <pld> with the highest-scoring vocabulary token; reserved
// ids are never candidates.
inline Sentence fill_placeholders(const Sentence& state, const FillScores& scores,
                                  const Vocab& vocab) {
  Sentence out;
  out.push_back(kBos, false);
  std::size_t slot = 0;
  for (std::size_t i = 1; i + 1 < state.size(); ++i) {
    if (state.ids[i] != kPld) {
      out.push_back(state.ids[i], state.continues_at(i));
      continue;
    }
    if (slot >= scores.size()) throw ContractError("fill_placeholders: too few score slots");
    const auto& slot_scores = scores[slot++];
    if (slot_scores.size() <= static_cast<std::size_t>(kNumReserved)) {
      throw ContractError("fill_placeholders: no non-reserved candidates");
    }
    std::size_t best = kNumReserved;
    for (std::size_t c = kNumReserved + 1; c < slot_scores.size(); ++c) {
      if (slot_scores[c] > slot_scores[best]) best = c;
    }
    const TokenId id = static_cast<TokenId>(best);
    out.push_back(id, vocab.continues(id));
  }
  out.push_back(kEos, false);
  return out;
}

inline DecodeTrace decode_impl(const Sentence& source, const Policy& policy, const Vocab& vocab,
                               const DecodeOptions& options, std::size_t sentence_id,
                               const std::optional<GapInsertion>& forced_counts_round1) {
  if (options.max_rounds < 0) throw ContractError("decode: negative max_rounds");
  if (options.deletion_threshold &&
      (*options.deletion_threshold < 0.0 || *options.deletion_threshold > 1.0)) {
    throw ContractError("decode: deletion threshold outside [0, 1]");
  }
  const ScoreContext ctx{sentence_id, &source};
  const bool init_empty = !options.init || options.init->empty();

  DecodeTrace trace;
  Sentence state = with_sentinels(options.init ? *options.init : Sentence{});

  for (int round = 1; round <= options.max_rounds; ++round) {
    const Sentence pre = state;

    // Deletion. An empty state deletes nothing; sentinels are never
    // deletion candidates.
    if (content_length(state) > 0) {
      const PolicyScores scored = policy.score(state, ctx, Head::kDelete);
      if (!scored.del || scored.del->size() != content_length(state)) {
        throw ContractError("policy returned malformed deletion scores");
      }
      const auto mask = options.deletion_threshold
                            ? threshold_delete(*scored.del, *options.deletion_threshold)
                            : argmax_delete(*scored.del);
      state = apply_delete_mask(state, mask);
    }
    trace.stages.push_back({StageKind::kDel, round, state});

    // Placeholder insertion.
    GapInsertion counts;
    if (round == 1 && forced_counts_round1) {
      counts = *forced_counts_round1;
    } else if (round == 1 && options.external_length_iter1 && init_empty) {
      counts.assign(content_length(state) + 1, 0);
      counts[0] = std::clamp(*options.external_length_iter1, 0, kMaxInsert);
    } else {
      const PolicyScores scored = policy.score(state, ctx, Head::kLength);
      if (!scored.gap || scored.gap->size() != content_length(state) + 1) {
        throw ContractError("policy returned malformed gap scores");
      }
      if (round == 2 && options.sample_seed_iter2) {
        Rng rng = split_rng(*options.sample_seed_iter2, RngStream::kGapSample, sentence_id);
        counts = sample_gap_lengths(*scored.gap, rng);
      } else {
        counts = argmax_gap_counts(*scored.gap);
      }
    }
    state = insert_placeholders(state, counts);
    trace.stages.push_back({StageKind::kPld, round, state});

    // Token fill.
    if (count_placeholders(state) > 0) {
      const PolicyScores scored = policy.score(state, ctx, Head::kToken);
      if (!scored.fill || scored.fill->size() != count_placeholders(state)) {
        throw ContractError("policy returned malformed fill scores");
      }
      state = fill_placeholders(state, *scored.fill, vocab);
    }
    trace.stages.push_back({StageKind::kTok, round, state});

    trace.rounds_executed = round;
    if (state == pre) {
      trace.termination = Termination::kFixpoint;
      trace.iterations = round - 1;
      trace.final = strip_sentinels(state);
      return trace;
    }
  }
  trace.termination = Termination::kMaxRounds;
  trace.iterations = trace.rounds_executed;
  trace.final = strip_sentinels(state);
  return trace;
}

}  // namespace detail

// One full refinement run: rounds of deletion, placeholder insertion, and
// token fill until the sentence stops changing or max_rounds is reached.
inline DecodeTrace decode(const Sentence& source, const Policy& policy, const Vocab& vocab,
                          const DecodeOptions& options, std::size_t sentence_id = 0) {
  return detail::decode_impl(source, policy, vocab, options, sentence_id, std::nullopt);
}

// Expands the k best first-round length configurations and refines each
// independently. Rank 1 is stage-for-stage identical to decode(). With a
// single gap the candidates are the k best classes of that gap; with
// several gaps they are the k best single-gap perturbations of the argmax
// configuration, ranked by score loss.
inline std::vector<DecodeTrace> decode_topk_lengths(const Sentence& source, const Policy& policy,
                                                    const Vocab& vocab, int k,
                                                    const DecodeOptions& options,
                                                    std::size_t sentence_id = 0) {
  if (k < 1) throw ContractError("decode_topk_lengths: k must be >= 1");
  if (options.external_length_iter1) {
    throw ContractError("decode_topk_lengths: external length override is exclusive with top-k");
  }
  const ScoreContext ctx{sentence_id, &source};

  // Replay the round-1 deletion to find the state the length head sees.
  Sentence state = with_sentinels(options.init ? *options.init : Sentence{});
  if (content_length(state) > 0) {
    const PolicyScores scored = policy.score(state, ctx, Head::kDelete);
    if (!scored.del || scored.del->size() != content_length(state)) {
      throw ContractError("policy returned malformed deletion scores");
    }
    const auto mask = options.deletion_threshold
                          ? threshold_delete(*scored.del, *options.deletion_threshold)
                          : argmax_delete(*scored.del);
    state = detail::apply_delete_mask(state, mask);
  }
  const PolicyScores scored = policy.score(state, ctx, Head::kLength);
  if (!scored.gap || scored.gap->size() != content_length(state) + 1) {
    throw ContractError("policy returned malformed gap scores");
  }
  const GapScores& gap_scores = *scored.gap;
  const GapInsertion base = detail::argmax_gap_counts(gap_scores);

  std::vector<GapInsertion> candidates;
  if (gap_scores.size() == 1) {
    std::vector<std::size_t> classes(gap_scores[0].size());
    for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = c;
    std::sort(classes.begin(), classes.end(), [&](std::size_t a, std::size_t b) {
      if (gap_scores[0][a] != gap_scores[0][b]) return gap_scores[0][a] > gap_scores[0][b];
      return a < b;
    });
    for (std::size_t j = 0; j < classes.size() && static_cast<int>(j) < k; ++j) {
      candidates.push_back({static_cast<int>(classes[j])});
    }
  } else {
    candidates.push_back(base);
    // (loss, gap, class) triples for every single-gap deviation.
    std::vector<std::tuple<double, std::size_t, std::size_t>> deviations;
    for (std::size_t g = 0; g < gap_scores.size(); ++g) {
      const double best = gap_scores[g][static_cast<std::size_t>(base[g])];
      for (std::size_t c = 0; c < gap_scores[g].size(); ++c) {
        if (static_cast<int>(c) == base[g]) continue;
        deviations.emplace_back(best - gap_scores[g][c], g, c);
      }
    }
    std::sort(deviations.begin(), deviations.end());
    for (const auto& [loss, g, c] : deviations) {
      if (static_cast<int>(candidates.size()) >= k) break;
      GapInsertion counts = base;
      counts[g] = static_cast<int>(c);
      candidates.push_back(std::move(counts));
    }
  }

  std::vector<DecodeTrace> traces;
  traces.reserve(candidates.size());
  for (const auto& counts : candidates) {
    traces.push_back(detail::decode_impl(source, policy, vocab, options, sentence_id, counts));
  }
  return traces;
}

}  // namespace levdec
