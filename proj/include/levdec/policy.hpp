#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "levdec/errors.hpp"
#include "levdec/sentence.hpp"

namespace levdec {

// The three decoder heads.
enum class Head { kDelete, kLength, kToken };

// Score families a decoder step consumes. Shapes are relative to the
// queried state (with sentinels): one 2-way entry per content token, one
// (kMaxInsert+1)-way entry per gap, one |V|-way entry per <pld> slot.
using DeleteScores = std::vector<std::array<double, 2>>;  // [keep, delete]
using GapScores = std::vector<std::vector<double>>;
using FillScores = std::vector<std::vector<double>>;

struct PolicyScores {
  std::optional<DeleteScores> del;
  std::optional<GapScores> gap;
  std::optional<FillScores> fill;
};

// Identifies the sentence being decoded. The oracle policy resolves the
// reference through the id; learned policies only read the source.
struct ScoreContext {
  std::size_t sentence_id = 0;
  const Sentence* source = nullptr;
};

// State helpers. Engine states carry <s> ... </s> sentinels.
inline Sentence with_sentinels(const Sentence& content) {
  Sentence s;
  s.ids.reserve(content.size() + 2);
  s.cont.reserve(content.size() + 2);
  s.push_back(kBos, false);
  for (std::size_t i = 0; i < content.size(); ++i) {
    s.push_back(content.ids[i], content.continues_at(i));
  }
  s.push_back(kEos, false);
  return s;
}

inline Sentence strip_sentinels(const Sentence& state) {
  if (state.size() < 2 || state.ids.front() != kBos || state.ids.back() != kEos) {
    throw ContractError("strip_sentinels: state lacks sentinels");
  }
  Sentence content;
  for (std::size_t i = 1; i + 1 < state.size(); ++i) {
    content.push_back(state.ids[i], state.continues_at(i));
  }
  return content;
}

inline std::size_t content_length(const Sentence& state) {
  if (state.size() < 2) throw ContractError("content_length: state lacks sentinels");
  return state.size() - 2;
}

inline std::size_t count_placeholders(const Sentence& s) {
  std::size_t count = 0;
  for (TokenId id : s.ids) count += (id == kPld);
  return count;
}

inline std::vector<double> softmax(std::span<const double> scores) {
  double max_score = scores[0];
  for (double s : scores) max_score = std::max(max_score, s);
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - max_score);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

// Scoring interface consumed by the refinement engine. Implementations
// must be pure: identical arguments give identical scores.
class Policy {
public:
  virtual ~Policy() = default;

  // Scores for exactly the queried head. The state carries sentinels.
  // Querying the token head on a state without <pld> is a contract error.
  virtual PolicyScores score(const Sentence& state, const ScoreContext& ctx,
                             Head head) const = 0;

protected:
  static void require_state(const Sentence& state) {
    if (state.size() < 2 || state.ids.front() != kBos || state.ids.back() != kEos) {
      throw ContractError("policy: state must carry sentinels");
    }
  }
};

}  // namespace levdec
