#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "levdec/errors.hpp"
#include "levdec/sentence.hpp"

namespace levdec {

inline constexpr int kBleuOrder = 4;

// Corpus-level BLEU: modified n-gram precisions (percent), brevity
// penalty, composite score in [0, 100].
struct BleuReport {
  std::array<double, kBleuOrder> precisions = {0, 0, 0, 0};
  double brevity_penalty = 1.0;
  double score = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

enum class BleuLevel { kBpe, kWord };

namespace detail {

// Generic corpus-level accumulation over token sequences.
template <typename Token>
BleuReport bleu_over(const std::vector<std::vector<Token>>& hyps,
                     const std::vector<std::vector<Token>>& refs) {
  if (hyps.empty()) throw ContractError("bleu: empty hypothesis corpus");
  if (hyps.size() != refs.size()) {
    throw AlignmentError("bleu: hypothesis and reference counts differ");
  }

  std::array<std::size_t, kBleuOrder> matched = {0, 0, 0, 0};
  std::array<std::size_t, kBleuOrder> total = {0, 0, 0, 0};
  std::size_t hyp_len = 0, ref_len = 0;

  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto& hyp = hyps[s];
    const auto& ref = refs[s];
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (int n = 1; n <= kBleuOrder; ++n) {
      if (hyp.size() < static_cast<std::size_t>(n)) continue;
      std::map<std::vector<Token>, std::size_t> ref_counts;
      if (ref.size() >= static_cast<std::size_t>(n)) {
        for (std::size_t i = 0; i + n <= ref.size(); ++i) {
          ref_counts[std::vector<Token>(ref.begin() + i, ref.begin() + i + n)] += 1;
        }
      }
      std::map<std::vector<Token>, std::size_t> hyp_counts;
      for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
        hyp_counts[std::vector<Token>(hyp.begin() + i, hyp.begin() + i + n)] += 1;
      }
      total[n - 1] += hyp.size() - n + 1;
      for (const auto& [gram, count] : hyp_counts) {
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  BleuReport report;
  report.hyp_length = hyp_len;
  report.ref_length = ref_len;
  if (hyp_len == 0) {
    report.brevity_penalty = 0.0;
    report.score = 0.0;
    return report;
  }
  report.brevity_penalty =
      hyp_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  bool any_zero = false;
  double log_precision = 0.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    const double p =
        total[n] == 0 ? 0.0 : static_cast<double>(matched[n]) / static_cast<double>(total[n]);
    report.precisions[n] = 100.0 * p;
    if (p == 0.0) {
      any_zero = true;
    } else {
      log_precision += std::log(p);
    }
  }
  report.score =
      any_zero ? 0.0
               : 100.0 * report.brevity_penalty * std::exp(log_precision / kBleuOrder);
  return report;
}

}  // namespace detail

// BPE level compares token ids; word level merges subword pieces first.
// No smoothing: a zero precision at any order zeroes the score.
inline BleuReport bleu(const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references, BleuLevel level,
                       const Vocab& vocab) {
  if (level == BleuLevel::kBpe) {
    std::vector<std::vector<TokenId>> hyps, refs;
    hyps.reserve(hypotheses.size());
    refs.reserve(references.size());
    for (const auto& h : hypotheses) hyps.push_back(h.ids);
    for (const auto& r : references) refs.push_back(r.ids);
    return detail::bleu_over(hyps, refs);
  }
  std::vector<std::vector<std::string>> hyps, refs;
  hyps.reserve(hypotheses.size());
  refs.reserve(references.size());
  for (const auto& h : hypotheses) hyps.push_back(merge_to_words(h, vocab).words);
  for (const auto& r : references) refs.push_back(merge_to_words(r, vocab).words);
  return detail::bleu_over(hyps, refs);
}

}  // namespace levdec
