#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "levdec/errors.hpp"
#include "levdec/sentence.hpp"

namespace levdec {

// Supervision triple realizing a minimal edit script in the
// delete-then-insert action space. Gaps are indexed against the roll-in:
// gap g sits before roll-in token g, and gap n sits after the last token,
// so an empty roll-in has exactly one gap.
struct EditLabels {
  std::vector<std::uint8_t> del_labels;  // per roll-in token, 1 = delete
  std::vector<int> ins_counts;           // per gap, roll-in length + 1 entries
  std::vector<TokenId> fill_tokens;      // per inserted slot, gap-by-gap left to right

  int total_insertions() const {
    int total = 0;
    for (int c : ins_counts) total += c;
    return total;
  }

  int cost() const {
    int deletions = 0;
    for (auto d : del_labels) deletions += d;
    return deletions + total_insertions();
  }
};

// Token-level edit distance with unit insert/delete costs; a substitution
// is a delete plus an insert and costs 2.
inline int levenshtein_distance(const Sentence& a, const Sentence& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int del = prev[j] + 1;
      const int ins = cur[j - 1] + 1;
      cur[j] = std::min(del, ins);
      if (a.ids[i - 1] == b.ids[j - 1]) cur[j] = std::min(cur[j], prev[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace detail {

// Full DP table backtrace. Preference order at each cell: diagonal on a
// token match, then up (delete), then left (insert). This fixes one
// deterministic minimal script; insertions end up attached to the gap
// before the next surviving token.
inline EditLabels minimal_edit_script(const Sentence& rollin, const Sentence& reference) {
  const std::size_t n = rollin.size(), m = reference.size();
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1));
  for (std::size_t j = 0; j <= m; ++j) dp[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    dp[i][0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      dp[i][j] = std::min(dp[i - 1][j] + 1, dp[i][j - 1] + 1);
      if (rollin.ids[i - 1] == reference.ids[j - 1]) {
        dp[i][j] = std::min(dp[i][j], dp[i - 1][j - 1]);
      }
    }
  }

  EditLabels labels;
  labels.del_labels.assign(n, 0);
  labels.ins_counts.assign(n + 1, 0);

  // Collect (gap, token) insertions walking backward, then reverse so
  // fills read left to right.
  std::vector<std::pair<std::size_t, TokenId>> inserts;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && rollin.ids[i - 1] == reference.ids[j - 1] &&
        dp[i][j] == dp[i - 1][j - 1]) {
      --i;
      --j;
    } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
      labels.del_labels[i - 1] = 1;
      --i;
    } else {
      inserts.emplace_back(i, reference.ids[j - 1]);
      --j;
    }
  }
  for (auto it = inserts.rbegin(); it != inserts.rend(); ++it) {
    labels.ins_counts[it->first] += 1;
    labels.fill_tokens.push_back(it->second);
  }
  return labels;
}

}  // namespace detail

// Minimal-cost edit script from `rollin` to `reference`; deterministic tie
// breaking (matching tokens are kept; diagonal-first backtrace). Errors if
// any single gap needs more than kMaxInsert insertions.
inline EditLabels optimal_edit_labels(const Sentence& rollin, const Sentence& reference) {
  EditLabels labels = detail::minimal_edit_script(rollin, reference);
  for (std::size_t g = 0; g < labels.ins_counts.size(); ++g) {
    if (labels.ins_counts[g] > kMaxInsert) {
      throw ScriptOverflowError("insertion count " + std::to_string(labels.ins_counts[g]) +
                                " at gap " + std::to_string(g) + " exceeds " +
                                std::to_string(kMaxInsert));
    }
  }
  return labels;
}

// Same script without the per-gap cap, for callers that clamp (the oracle
// policy's length head).
inline EditLabels edit_labels_uncapped(const Sentence& rollin, const Sentence& reference) {
  return detail::minimal_edit_script(rollin, reference);
}

// Applies a script: deletions first, then gap insertions left to right.
// Fill continuation flags are taken from the vocabulary.
inline Sentence apply_edit(const Sentence& rollin, const EditLabels& labels, const Vocab& vocab) {
  const std::size_t n = rollin.size();
  if (labels.del_labels.size() != n || labels.ins_counts.size() != n + 1) {
    throw ContractError("apply_edit: labels not shaped for roll-in");
  }
  if (labels.total_insertions() != static_cast<int>(labels.fill_tokens.size())) {
    throw ContractError("apply_edit: fill count does not match insertion counts");
  }
  Sentence out;
  std::size_t fill_at = 0;
  for (std::size_t g = 0; g <= n; ++g) {
    for (int k = 0; k < labels.ins_counts[g]; ++k) {
      const TokenId id = labels.fill_tokens[fill_at++];
      out.push_back(id, vocab.continues(id));
    }
    if (g < n && labels.del_labels[g] == 0) {
      out.push_back(rollin.ids[g], rollin.continues_at(g));
    }
  }
  return out;
}

}  // namespace levdec
