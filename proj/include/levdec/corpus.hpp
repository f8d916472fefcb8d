#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "levdec/errors.hpp"
#include "levdec/sentence.hpp"
#include "levdec/vocab.hpp"

namespace levdec {

namespace detail {

inline bool valid_utf8(const std::string& line) {
  std::size_t i = 0;
  while (i < line.size()) {
    const unsigned char c = static_cast<unsigned char>(line[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      if (c < 0xC2) return false;  // overlong
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      if (c > 0xF4) return false;
    } else {
      return false;
    }
    if (i + extra >= line.size() && extra > 0) return false;  // truncated
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(line[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

inline std::vector<std::vector<std::string>> read_token_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  std::vector<std::vector<std::string>> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!valid_utf8(line)) {
      throw FormatError(path + ": undecodable bytes at line " + std::to_string(line_no));
    }
    lines.push_back(split_tokens(line));
  }
  return lines;
}

}  // namespace detail

// Aligned source/target token lists, optionally with an alternate target
// list (distilled output or translation-memory match) of the same count.
// Raw surfaces are kept so the vocabulary can be built from the corpus
// itself; sentences are encoded against a Vocab on demand.
class ParallelCorpus {
public:
  ParallelCorpus() = default;
  ParallelCorpus(std::vector<std::vector<std::string>> src,
                 std::vector<std::vector<std::string>> tgt,
                 std::optional<std::vector<std::vector<std::string>>> alt = std::nullopt)
      : src_(std::move(src)), tgt_(std::move(tgt)), alt_(std::move(alt)) {
    if (src_.size() != tgt_.size()) {
      throw AlignmentError("corpus line counts differ: " + std::to_string(src_.size()) +
                           " vs " + std::to_string(tgt_.size()));
    }
    if (alt_ && alt_->size() != src_.size()) {
      throw AlignmentError("alternate target line count differs: " +
                           std::to_string(alt_->size()) + " vs " + std::to_string(src_.size()));
    }
  }

  std::size_t size() const { return src_.size(); }
  bool has_alt() const { return alt_.has_value(); }

  const std::vector<std::string>& source_tokens(std::size_t i) const { return src_[i]; }
  const std::vector<std::string>& target_tokens(std::size_t i) const { return tgt_[i]; }
  const std::vector<std::string>& alt_tokens(std::size_t i) const {
    if (!alt_) throw ContractError("corpus has no alternate targets");
    return (*alt_)[i];
  }

  Sentence source(std::size_t i, const Vocab& vocab) const { return encode_tokens(src_[i], vocab); }
  Sentence target(std::size_t i, const Vocab& vocab) const { return encode_tokens(tgt_[i], vocab); }
  Sentence alt(std::size_t i, const Vocab& vocab) const {
    if (!alt_) throw ContractError("corpus has no alternate targets");
    return encode_tokens((*alt_)[i], vocab);
  }

private:
  std::vector<std::vector<std::string>> src_;
  std::vector<std::vector<std::string>> tgt_;
  std::optional<std::vector<std::vector<std::string>>> alt_;
};

// Loads UTF-8 corpus files, one sentence per line, tokens separated by
// spaces. Line i of each file forms pair i; an empty line yields an empty
// sentence so alignment is preserved.
inline ParallelCorpus load_parallel_corpus(const std::string& src_path,
                                           const std::string& tgt_path,
                                           const std::optional<std::string>& alt_tgt_path = {}) {
  auto src = detail::read_token_lines(src_path);
  auto tgt = detail::read_token_lines(tgt_path);
  if (src.size() != tgt.size()) {
    throw AlignmentError(src_path + " and " + tgt_path + " line counts differ: " +
                         std::to_string(src.size()) + " vs " + std::to_string(tgt.size()));
  }
  std::optional<std::vector<std::vector<std::string>>> alt;
  if (alt_tgt_path) {
    alt = detail::read_token_lines(*alt_tgt_path);
    if (alt->size() != src.size()) {
      throw AlignmentError(*alt_tgt_path + " line count differs: " +
                           std::to_string(alt->size()) + " vs " + std::to_string(src.size()));
    }
  }
  return ParallelCorpus(std::move(src), std::move(tgt), std::move(alt));
}

// Builds the shared vocabulary over all attached sides of the corpus.
// Keeps the most frequent surfaces up to `cap` total ids (reserved ids
// included); frequency ties go to the surface seen first.
inline Vocab build_vocab(const ParallelCorpus& corpus, std::size_t cap) {
  if (cap <= static_cast<std::size_t>(kNumReserved)) {
    throw ContractError("build_vocab: cap must exceed the reserved id count");
  }
  if (corpus.size() == 0) throw ContractError("build_vocab: empty corpus");

  std::unordered_map<std::string, std::uint64_t> freq;
  std::unordered_map<std::string, std::uint64_t> first_seen;
  std::uint64_t order = 0;
  const auto count = [&](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) {
      auto [it, inserted] = freq.emplace(t, 0);
      it->second += 1;
      if (inserted) first_seen.emplace(t, order);
      ++order;
    }
  };
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    count(corpus.source_tokens(i));
    count(corpus.target_tokens(i));
    if (corpus.has_alt()) count(corpus.alt_tokens(i));
  }

  std::vector<const std::string*> surfaces;
  surfaces.reserve(freq.size());
  for (const auto& [surface, _] : freq) surfaces.push_back(&surface);
  std::sort(surfaces.begin(), surfaces.end(), [&](const std::string* a, const std::string* b) {
    const auto fa = freq.at(*a), fb = freq.at(*b);
    if (fa != fb) return fa > fb;
    return first_seen.at(*a) < first_seen.at(*b);
  });

  Vocab vocab;
  const std::size_t keep = cap - static_cast<std::size_t>(kNumReserved);
  for (std::size_t i = 0; i < surfaces.size() && i < keep; ++i) {
    vocab.add(*surfaces[i]);
  }
  return vocab;
}

// Word-level lexicon of the training targets, used by the invalid-word
// counter. Dangling-marker pieces merge the same way merge_to_words does.
inline std::unordered_set<std::string> build_word_lexicon(const ParallelCorpus& corpus,
                                                          const Vocab& vocab) {
  std::unordered_set<std::string> lexicon;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Sentence tgt = corpus.target(i, vocab);
    for (auto& word : merge_to_words(tgt, vocab).words) lexicon.insert(std::move(word));
  }
  return lexicon;
}

// Text persistence for a built vocabulary: non-reserved surfaces in id
// order, one per line. Loading reconstructs identical id assignment.
inline void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write vocab file: " + path);
  for (std::size_t id = kNumReserved; id < vocab.size(); ++id) {
    out << vocab.surface_of(static_cast<TokenId>(id)) << '\n';
  }
  out.close();
  if (out.fail()) throw FormatError("failed writing vocab file: " + path);
}

inline Vocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open vocab file: " + path);
  Vocab vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) vocab.add(line);
  }
  return vocab;
}

inline StopList load_stoplist(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open stop-word file: " + path);
  StopList list;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = detail::split_tokens(line);
    if (!tokens.empty()) list.insert(tokens.front());
  }
  return list;
}

}  // namespace levdec
