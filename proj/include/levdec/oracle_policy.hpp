#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "levdec/edit.hpp"
#include "levdec/errors.hpp"
#include "levdec/policy.hpp"

namespace levdec {

// Exact-edit policy: scores +1 for the class labeled by the minimal edit
// script against the reference and -1 otherwise. Decoding with it from any
// initialization reproduces the reference.
class OraclePolicy final : public Policy {
public:
  using ReferenceLookup = std::function<const Sentence&(std::size_t)>;

  OraclePolicy(ReferenceLookup lookup, std::size_t vocab_size)
      : lookup_(std::move(lookup)), vocab_size_(vocab_size) {}

  PolicyScores score(const Sentence& state, const ScoreContext& ctx,
                     Head head) const override {
    require_state(state);
    const Sentence& reference = lookup_(ctx.sentence_id);
    PolicyScores out;
    switch (head) {
      case Head::kDelete:
        out.del = delete_scores(state, reference);
        break;
      case Head::kLength:
        out.gap = gap_scores(state, reference);
        break;
      case Head::kToken:
        out.fill = fill_scores(state, reference);
        break;
    }
    return out;
  }

private:
  static Sentence content_without_plds(const Sentence& state) {
    Sentence base;
    for (std::size_t i = 1; i + 1 < state.size(); ++i) {
      if (state.ids[i] == kPld) continue;
      base.push_back(state.ids[i], state.continues_at(i));
    }
    return base;
  }

  DeleteScores delete_scores(const Sentence& state, const Sentence& reference) const {
    const Sentence base = strip_sentinels(state);
    const EditLabels labels = edit_labels_uncapped(base, reference);
    DeleteScores scores(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      const bool del = labels.del_labels[i] != 0;
      scores[i] = {del ? -1.0 : 1.0, del ? 1.0 : -1.0};
    }
    return scores;
  }

  GapScores gap_scores(const Sentence& state, const Sentence& reference) const {
    const Sentence base = strip_sentinels(state);
    const EditLabels labels = edit_labels_uncapped(base, reference);
    GapScores scores(labels.ins_counts.size());
    for (std::size_t g = 0; g < scores.size(); ++g) {
      const int label = std::min(labels.ins_counts[g], kMaxInsert);
      scores[g].assign(kMaxInsert + 1, -1.0);
      scores[g][static_cast<std::size_t>(label)] = 1.0;
    }
    return scores;
  }

  FillScores fill_scores(const Sentence& state, const Sentence& reference) const {
    if (count_placeholders(state) == 0) {
      throw ContractError("token head queried on a state without <pld>");
    }
    const Sentence base = content_without_plds(state);
    const EditLabels labels = edit_labels_uncapped(base, reference);

    // Fills grouped per base gap, in order.
    std::vector<std::vector<TokenId>> gap_fills(labels.ins_counts.size());
    std::size_t fill_at = 0;
    for (std::size_t g = 0; g < gap_fills.size(); ++g) {
      for (int k = 0; k < labels.ins_counts[g]; ++k) {
        gap_fills[g].push_back(labels.fill_tokens[fill_at++]);
      }
    }

    FillScores scores;
    std::size_t base_pos = 0;  // next non-pld content index
    std::size_t slot_in_gap = 0;
    for (std::size_t i = 1; i + 1 < state.size(); ++i) {
      if (state.ids[i] != kPld) {
        ++base_pos;
        slot_in_gap = 0;
        continue;
      }
      const auto& fills = gap_fills[base_pos];
      TokenId label;
      if (!fills.empty()) {
        // Surplus placeholders repeat the last wanted fill; the next
        // deletion pass removes the duplicates.
        label = fills[std::min(slot_in_gap, fills.size() - 1)];
      } else {
        label = fallback_fill(reference);
      }
      std::vector<double> slot(vocab_size_, -1.0);
      slot[static_cast<std::size_t>(label)] = 1.0;
      scores.push_back(std::move(slot));
      ++slot_in_gap;
    }
    return scores;
  }

  // Placeholder the script wants nothing for: fall back to the first
  // reference token, or the first non-reserved id.
  TokenId fallback_fill(const Sentence& reference) const {
    if (!reference.empty()) return reference.ids.front();
    return vocab_size_ > static_cast<std::size_t>(kNumReserved) ? kNumReserved : kUnk;
  }

  ReferenceLookup lookup_;
  std::size_t vocab_size_;
};

// Convenience factory over an indexed reference list. Throws on unknown
// sentence ids.
inline std::shared_ptr<OraclePolicy> make_oracle_policy(
    std::shared_ptr<const std::vector<Sentence>> references, std::size_t vocab_size) {
  auto lookup = [references](std::size_t id) -> const Sentence& {
    if (id >= references->size()) {
      throw ContractError("oracle policy: unknown sentence id " + std::to_string(id));
    }
    return (*references)[id];
  };
  return std::make_shared<OraclePolicy>(lookup, vocab_size);
}

}  // namespace levdec
