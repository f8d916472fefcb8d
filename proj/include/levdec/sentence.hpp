#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "levdec/errors.hpp"
#include "levdec/vocab.hpp"

namespace levdec {

// Token-id sequence with per-token continuation flags. Corpus sentences
// store content tokens only; the decoder adds sentinels to its working
// states. The continuation flag is kept per token (rather than looked up
// from the vocabulary) so it survives <unk> substitution at ingestion.
struct Sentence {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> cont;

  Sentence() = default;
  explicit Sentence(std::vector<TokenId> token_ids, std::vector<std::uint8_t> flags)
      : ids(std::move(token_ids)), cont(std::move(flags)) {}

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }

  void push_back(TokenId id, bool continues) {
    ids.push_back(id);
    cont.push_back(continues ? 1 : 0);
  }

  bool continues_at(std::size_t i) const { return cont[i] != 0; }

  friend bool operator==(const Sentence& a, const Sentence& b) {
    return a.ids == b.ids && a.cont == b.cont;
  }
};

// Encodes space-split surface tokens; out-of-vocabulary surfaces map to
// <unk> but keep the continuation flag of the original surface. Literal
// sentinel or placeholder surfaces in the text also become <unk>: corpus
// sentences never contain <pld> or sentinels.
inline Sentence encode_tokens(const std::vector<std::string>& surfaces, const Vocab& vocab) {
  Sentence s;
  s.ids.reserve(surfaces.size());
  s.cont.reserve(surfaces.size());
  for (const auto& surface : surfaces) {
    TokenId id = vocab.id_of(surface);
    if (id == kBos || id == kEos || id == kPld) id = kUnk;
    s.push_back(id, surface_continues(surface));
  }
  return s;
}

inline Sentence sentence_from_ids(const std::vector<TokenId>& ids, const Vocab& vocab) {
  Sentence s;
  s.ids.reserve(ids.size());
  s.cont.reserve(ids.size());
  for (TokenId id : ids) s.push_back(id, vocab.continues(id));
  return s;
}

inline std::string sentence_surface(const Sentence& s, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) out += ' ';
    out += vocab.surface_of(s.ids[i]);
  }
  return out;
}

// A token is a subword token iff it carries the continuation marker or
// follows a token that does: all three pieces of "a@@ b@@ c" count.
inline bool is_subword_token(const Sentence& s, std::size_t index) {
  if (index >= s.size()) throw ContractError("is_subword_token: index out of range");
  if (s.continues_at(index)) return true;
  return index > 0 && s.continues_at(index - 1);
}

// Half-open [begin, end) token ranges of the word-level units of a
// sentence: maximal runs joined by continuation markers.
inline std::vector<std::pair<std::size_t, std::size_t>> word_group_ranges(const Sentence& s) {
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.continues_at(i)) {
      groups.emplace_back(begin, i + 1);
      begin = i + 1;
    }
  }
  if (begin < s.size()) groups.emplace_back(begin, s.size());  // dangling marker at end
  return groups;
}

struct MergedWords {
  std::vector<std::string> words;
  // True when the sentence ended on a continuation marker and the last
  // piece was kept as a word anyway.
  bool dangling = false;
};

inline std::string strip_marker(const std::string& surface) {
  if (surface_continues(surface)) {
    return surface.substr(0, surface.size() - kContinuationMarker.size());
  }
  return surface;
}

// Joins consecutive tokens while the left one carries "@@", stripping the
// marker. A trailing continuation piece becomes a word as-is and is flagged.
inline MergedWords merge_to_words(const Sentence& s, const Vocab& vocab) {
  MergedWords out;
  for (const auto& [begin, end] : word_group_ranges(s)) {
    std::string word;
    for (std::size_t i = begin; i < end; ++i) {
      word += strip_marker(vocab.surface_of(s.ids[i]));
    }
    out.words.push_back(std::move(word));
  }
  out.dangling = !s.empty() && s.continues_at(s.size() - 1);
  return out;
}

// Set of word-level surfaces, matched exactly against merged words.
class StopList {
public:
  StopList() = default;
  explicit StopList(std::vector<std::string> words) {
    for (auto& w : words) words_.insert(std::move(w));
  }

  void insert(const std::string& word) { words_.insert(word); }
  bool contains(const std::string& word) const { return words_.count(word) > 0; }
  bool empty() const { return words_.empty(); }
  std::size_t size() const { return words_.size(); }

private:
  std::unordered_set<std::string> words_;
};

// Removes every maximal BPE-token group whose merged word is stop-listed.
// Other tokens are unchanged and keep their order.
inline Sentence strip_stopwords(const Sentence& s, const StopList& stoplist, const Vocab& vocab) {
  if (stoplist.empty()) return s;
  Sentence out;
  for (const auto& [begin, end] : word_group_ranges(s)) {
    std::string word;
    for (std::size_t i = begin; i < end; ++i) {
      word += strip_marker(vocab.surface_of(s.ids[i]));
    }
    if (stoplist.contains(word)) continue;
    for (std::size_t i = begin; i < end; ++i) out.push_back(s.ids[i], s.continues_at(i));
  }
  return out;
}

}  // namespace levdec
