#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "levdec/errors.hpp"
#include "levdec/rng.hpp"
#include "levdec/sentence.hpp"

namespace levdec {

// Per-reference-token drop mask, true = dropped.
using DropMask = std::vector<std::uint8_t>;

// Drop pass at a fixed per-token probability.
inline std::pair<Sentence, DropMask> rollin_drop_with_ratio(const Sentence& reference,
                                                            double ratio, Rng& rng) {
  DropMask mask(reference.size(), 0);
  Sentence survivors;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (rng.uniform01() < ratio) {
      mask[i] = 1;
    } else {
      survivors.push_back(reference.ids[i], reference.continues_at(i));
    }
  }
  return {std::move(survivors), std::move(mask)};
}

// Drops each token independently with a per-sentence probability r drawn
// once from U[0,1]. Returns the survivors and the mask.
inline std::pair<Sentence, DropMask> rollin_drop(const Sentence& reference, Rng& rng) {
  const double ratio = rng.uniform01();
  return rollin_drop_with_ratio(reference, ratio, rng);
}

// Replaces dropped positions by <pld>, keeping everything else.
inline Sentence rollin_mask(const Sentence& reference, const DropMask& mask) {
  if (mask.size() != reference.size()) {
    throw ContractError("rollin_mask: mask length does not match reference");
  }
  Sentence out;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (mask[i]) {
      out.push_back(kPld, false);
    } else {
      out.push_back(reference.ids[i], reference.continues_at(i));
    }
  }
  return out;
}

// Draws one token per slot from softmax(scores), temperature 1. Used to
// build the deletion head's roll-in from token-head predictions.
inline std::vector<TokenId> rollin_model_sample(
    const std::vector<std::vector<double>>& slot_scores, Rng& rng) {
  std::vector<TokenId> sampled;
  sampled.reserve(slot_scores.size());
  for (const auto& scores : slot_scores) {
    if (scores.empty()) throw ContractError("rollin_model_sample: slot with no candidates");
    for (double s : scores) {
      if (!std::isfinite(s)) throw ContractError("rollin_model_sample: non-finite score");
    }
    sampled.push_back(static_cast<TokenId>(rng.sample_softmax(scores)));
  }
  return sampled;
}

}  // namespace levdec
