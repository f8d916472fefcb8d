#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "levdec/corpus.hpp"
#include "levdec/edit.hpp"
#include "levdec/errors.hpp"
#include "levdec/policy.hpp"
#include "levdec/rng.hpp"
#include "levdec/rollin.hpp"

namespace levdec {

namespace feat {

inline constexpr std::uint64_t kFamilyStateWindow = 1;
inline constexpr std::uint64_t kFamilyPosition = 2;
inline constexpr std::uint64_t kFamilySourceLength = 3;
inline constexpr std::uint64_t kFamilySourceWindow = 4;
inline constexpr std::uint64_t kFamilySourceBag = 5;
inline constexpr std::uint64_t kFamilyWindowBigram = 6;
inline constexpr std::uint64_t kFamilyWindowLength = 7;
inline constexpr std::uint64_t kFamilyStateSourcePair = 8;
inline constexpr std::uint64_t kFamilyMatchIndicator = 9;

inline std::uint64_t hash3(std::uint64_t family, std::uint64_t a, std::uint64_t b) {
  return splitmix64(family * 0xd1b54a32d192ed03ULL ^ splitmix64(a * 0x8cb92ba72f3d8dd7ULL + b));
}

inline std::uint64_t pack(std::uint64_t a, std::uint64_t b) { return (a << 32) | (b & 0xffffffffULL); }

}  // namespace feat

// Deterministic hashed features for one query position. `position_or_gap`
// is a content position for the deletion and token heads and a gap index
// for the length head. The state carries sentinels. The information
// sources are state token ids in a +-2 window, the relative position
// bucket, the source length bucket, and a source unigram sample (a window
// around the length-proportional aligned position plus evenly spaced bag
// tokens); window/length and state/source conjunctions are hashed as
// additional features over the same sources.
inline std::vector<std::uint64_t> featurize(const Sentence& state, const Sentence& source,
                                            std::size_t position_or_gap, Head head) {
  const std::size_t n = state.size() >= 2 ? state.size() - 2 : 0;  // content length
  const std::size_t m = source.size();
  std::vector<std::uint64_t> feats;
  feats.reserve(32);

  const auto state_token = [&](std::ptrdiff_t idx) -> std::uint64_t {
    if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(state.size())) return 0xffffffffULL;
    return static_cast<std::uint64_t>(state.ids[static_cast<std::size_t>(idx)]);
  };
  const auto source_token = [&](std::ptrdiff_t idx) -> std::uint64_t {
    if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(m)) return 0xffffffffULL;
    return static_cast<std::uint64_t>(source.ids[static_cast<std::size_t>(idx)]);
  };

  const std::size_t len_bucket = m <= 32 ? m : 33 + std::min<std::size_t>((m - 33) / 8, 23);

  std::size_t slots;  // denominator for the relative position bucket
  std::size_t aligned;
  if (head == Head::kLength) {
    slots = n + 1;
    // Gap g sits between content tokens g-1 and g, so its aligned source
    // index is g: on a complete state the pair features line up exactly.
    aligned = (position_or_gap * m) / std::max<std::size_t>(n, 1);
    // Window straddles state indices g and g+1.
    const std::ptrdiff_t g = static_cast<std::ptrdiff_t>(position_or_gap);
    for (int off = -1; off <= 2; ++off) {
      feats.push_back(feat::hash3(feat::kFamilyStateWindow, static_cast<std::uint64_t>(off + 2),
                                  state_token(g + off)));
    }
    // The adjacent pair, alone and conjoined with the source length: the
    // pair identifies the context (in particular <s>,</s> marks the empty
    // state) and the conjunction lets the length class depend on it.
    const std::uint64_t pair = feat::pack(state_token(g), state_token(g + 1));
    feats.push_back(feat::hash3(feat::kFamilyWindowBigram, pair, 0));
    feats.push_back(feat::hash3(feat::kFamilyWindowLength, pair, len_bucket));
    // Match detectors across the gap: each side against its aligned
    // source neighbour, as identity pairs and as equality indicators
    // (the indicators generalize across token identities).
    const std::uint64_t left_tok = state_token(g);
    const std::uint64_t right_tok = state_token(g + 1);
    const std::uint64_t src_left = source_token(static_cast<std::ptrdiff_t>(aligned) - 1);
    const std::uint64_t src_right = source_token(static_cast<std::ptrdiff_t>(aligned));
    const auto indicator = [](std::uint64_t a, std::uint64_t b) -> std::uint64_t {
      if (a == 0xffffffffULL || b == 0xffffffffULL) return 2;
      return a == b ? 1 : 0;
    };
    feats.push_back(feat::hash3(feat::kFamilyStateSourcePair, feat::pack(left_tok, src_left), 1));
    feats.push_back(feat::hash3(feat::kFamilyStateSourcePair, feat::pack(right_tok, src_right), 2));
    const std::uint64_t left_ind = indicator(left_tok, src_left);
    const std::uint64_t right_ind = indicator(right_tok, src_right);
    feats.push_back(feat::hash3(feat::kFamilyMatchIndicator, 1, left_ind));
    feats.push_back(feat::hash3(feat::kFamilyMatchIndicator, 2, right_ind));
    feats.push_back(feat::hash3(feat::kFamilyMatchIndicator, 3, left_ind * 3 + right_ind));
  } else {
    slots = std::max<std::size_t>(n, 1);
    aligned = (position_or_gap * m) / std::max<std::size_t>(n, 1);
    const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(position_or_gap) + 1;  // state index
    for (int off = -2; off <= 2; ++off) {
      feats.push_back(feat::hash3(feat::kFamilyStateWindow, static_cast<std::uint64_t>(off + 2),
                                  state_token(center + off)));
    }
    // Neighbour bigrams and the (state token, aligned source token) pair
    // with its equality indicator; the deletion head's match detector.
    feats.push_back(feat::hash3(feat::kFamilyWindowBigram,
                                feat::pack(state_token(center - 1), state_token(center)), 1));
    feats.push_back(feat::hash3(feat::kFamilyWindowBigram,
                                feat::pack(state_token(center), state_token(center + 1)), 2));
    const std::uint64_t cur_tok = state_token(center);
    const std::uint64_t src_tok = source_token(static_cast<std::ptrdiff_t>(aligned));
    feats.push_back(feat::hash3(feat::kFamilyStateSourcePair, feat::pack(cur_tok, src_tok), 0));
    const std::uint64_t ind =
        (cur_tok == 0xffffffffULL || src_tok == 0xffffffffULL) ? 2 : (cur_tok == src_tok ? 1 : 0);
    feats.push_back(feat::hash3(feat::kFamilyMatchIndicator, 0, ind));
  }

  const std::size_t bucket = (16 * position_or_gap) / std::max<std::size_t>(slots, 1);
  feats.push_back(feat::hash3(feat::kFamilyPosition, bucket, 0));
  feats.push_back(feat::hash3(feat::kFamilySourceLength, len_bucket, 0));

  // Aligned source window, length-proportional.
  for (int off = -2; off <= 2; ++off) {
    feats.push_back(feat::hash3(feat::kFamilySourceWindow, static_cast<std::uint64_t>(off + 2),
                     source_token(static_cast<std::ptrdiff_t>(aligned) + off)));
  }

  // Evenly spaced source unigram sample; content-free for the length
  // head, which only counts.
  if (head != Head::kLength) {
    const std::size_t bag = std::min<std::size_t>(m, 8);
    for (std::size_t i = 0; i < bag; ++i) {
      feats.push_back(feat::hash3(feat::kFamilySourceBag, source_token(
                          static_cast<std::ptrdiff_t>((i * m) / bag)), 0));
    }
  }
  return feats;
}

struct LinearPolicyConfig {
  std::uint32_t hash_bits = 18;  // weight table size is 2^hash_bits per head
  double learning_rate = 0.1;
};

struct EpochLoss {
  double del = 0.0;
  double pld = 0.0;
  double tok = 0.0;
  double total = 0.0;
};

// One training example for one head: hashed features, gold class, class
// count.
struct HeadExample {
  std::vector<std::uint64_t> feats;
  int label = 0;
};

// Feature-hashed linear model with one weight table per head. A class
// enters the table through a salted rehash of each feature, so all classes
// share one table of dimension D. Heads share features but not weights.
class LinearPolicy final : public Policy {
public:
  LinearPolicy(std::size_t vocab_size, LinearPolicyConfig config = {})
      : config_(config),
        dim_(std::size_t{1} << config.hash_bits),
        vocab_size_(vocab_size),
        w_del_(dim_, 0.0),
        w_pld_(dim_, 0.0),
        w_tok_(dim_, 0.0),
        b_del_(2, 0.0),
        b_pld_(static_cast<std::size_t>(kMaxInsert) + 1, 0.0),
        b_tok_(vocab_size, 0.0) {}

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t hash_dim() const { return dim_; }
  const LinearPolicyConfig& config() const { return config_; }

  PolicyScores score(const Sentence& state, const ScoreContext& ctx,
                     Head head) const override {
    require_state(state);
    if (!ctx.source) throw ContractError("linear policy: missing source");
    const Sentence& source = *ctx.source;
    const std::size_t n = content_length(state);
    PolicyScores out;
    switch (head) {
      case Head::kDelete: {
        DeleteScores scores(n);
        for (std::size_t p = 0; p < n; ++p) {
          const auto feats = featurize(state, source, p, head);
          scores[p] = {class_score(w_del_, b_del_, feats, 0),
                       class_score(w_del_, b_del_, feats, 1)};
        }
        out.del = std::move(scores);
        break;
      }
      case Head::kLength: {
        GapScores scores(n + 1);
        for (std::size_t g = 0; g <= n; ++g) {
          const auto feats = featurize(state, source, g, head);
          scores[g] = all_class_scores(w_pld_, b_pld_, feats);
        }
        out.gap = std::move(scores);
        break;
      }
      case Head::kToken: {
        if (count_placeholders(state) == 0) {
          throw ContractError("token head queried on a state without <pld>");
        }
        FillScores scores;
        for (std::size_t p = 0; p < n; ++p) {
          if (state.ids[p + 1] != kPld) continue;
          const auto feats = featurize(state, source, p, head);
          scores.push_back(all_class_scores(w_tok_, b_tok_, feats));
        }
        out.fill = std::move(scores);
        break;
      }
    }
    return out;
  }

  // Loss of one example under the current weights.
  double example_loss(Head head, const HeadExample& ex) const {
    const auto z = all_class_scores(table(head), biases(head), ex.feats);
    const auto p = softmax(z);
    return -std::log(std::max(p[static_cast<std::size_t>(ex.label)], 1e-300));
  }

  // One plain-SGD step; returns the pre-update loss.
  double example_update(Head head, const HeadExample& ex) {
    std::vector<double>& w = table(head);
    std::vector<double>& b = biases(head);
    const auto z = all_class_scores(w, b, ex.feats);
    const auto p = softmax(z);
    const double loss = -std::log(std::max(p[static_cast<std::size_t>(ex.label)], 1e-300));
    const double lr = config_.learning_rate;
    for (std::size_t c = 0; c < z.size(); ++c) {
      const double g = p[c] - (static_cast<int>(c) == ex.label ? 1.0 : 0.0);
      if (g == 0.0) continue;
      b[c] -= lr * g;
      for (std::uint64_t f : ex.feats) w[slot(f, c)] -= lr * g;
    }
    return loss;
  }

  // Direct table access for persistence and gradient checks.
  std::vector<double>& table(Head head) {
    return head == Head::kDelete ? w_del_ : head == Head::kLength ? w_pld_ : w_tok_;
  }
  const std::vector<double>& table(Head head) const {
    return head == Head::kDelete ? w_del_ : head == Head::kLength ? w_pld_ : w_tok_;
  }
  std::vector<double>& biases(Head head) {
    return head == Head::kDelete ? b_del_ : head == Head::kLength ? b_pld_ : b_tok_;
  }
  const std::vector<double>& biases(Head head) const {
    return head == Head::kDelete ? b_del_ : head == Head::kLength ? b_pld_ : b_tok_;
  }

  // Table slots one example touches, with the analytic d(loss)/d(weight).
  std::vector<std::pair<std::size_t, double>> example_weight_gradient(
      Head head, const HeadExample& ex) const {
    const auto z = all_class_scores(table(head), biases(head), ex.feats);
    const auto p = softmax(z);
    std::vector<std::pair<std::size_t, double>> grad;
    for (std::size_t c = 0; c < z.size(); ++c) {
      const double g = p[c] - (static_cast<int>(c) == ex.label ? 1.0 : 0.0);
      for (std::uint64_t f : ex.feats) grad.emplace_back(slot(f, c), g);
    }
    // Collapse duplicate slots (hash collisions within the example).
    std::sort(grad.begin(), grad.end());
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& [idx, g] : grad) {
      if (!out.empty() && out.back().first == idx) {
        out.back().second += g;
      } else {
        out.emplace_back(idx, g);
      }
    }
    return out;
  }

  std::size_t slot(std::uint64_t raw_feature, std::size_t cls) const {
    return static_cast<std::size_t>(
               splitmix64(raw_feature ^ splitmix64(cls * 0xa0761d6478bd642fULL))) &
           (dim_ - 1);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write model file: " + path);
    out.write(kMagic, 8);
    write_u32(out, config_.hash_bits);
    write_u32(out, static_cast<std::uint32_t>(vocab_size_));
    write_u32(out, static_cast<std::uint32_t>(kMaxInsert));
    write_f64(out, config_.learning_rate);
    for (const auto* w : {&w_del_, &w_pld_, &w_tok_}) write_doubles(out, *w);
    for (const auto* b : {&b_del_, &b_pld_, &b_tok_}) write_doubles(out, *b);
    if (!out) throw FormatError("failed writing model file: " + path);
  }

  static LinearPolicy load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file: " + path);
    char magic[8] = {};
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
      throw FormatError("not a model file (bad magic): " + path);
    }
    LinearPolicyConfig config;
    config.hash_bits = read_u32(in);
    const std::uint32_t vocab_size = read_u32(in);
    const std::uint32_t lmax = read_u32(in);
    if (lmax != static_cast<std::uint32_t>(kMaxInsert)) {
      throw FormatError("model built for a different insertion range");
    }
    config.learning_rate = read_f64(in);
    LinearPolicy model(vocab_size, config);
    for (auto* w : {&model.w_del_, &model.w_pld_, &model.w_tok_}) read_doubles(in, *w);
    for (auto* b : {&model.b_del_, &model.b_pld_, &model.b_tok_}) read_doubles(in, *b);
    if (!in) throw FormatError("truncated model file: " + path);
    return model;
  }

private:
  double class_score(const std::vector<double>& w, const std::vector<double>& b,
                     const std::vector<std::uint64_t>& feats, std::size_t cls) const {
    double z = b[cls];
    for (std::uint64_t f : feats) z += w[slot(f, cls)];
    return z;
  }

  std::vector<double> all_class_scores(const std::vector<double>& w, const std::vector<double>& b,
                                       const std::vector<std::uint64_t>& feats) const {
    std::vector<double> z(b.size());
    for (std::size_t c = 0; c < b.size(); ++c) z[c] = class_score(w, b, feats, c);
    return z;
  }

  static void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_f64(std::ofstream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    const std::uint64_t n = v.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  static std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static double read_f64(std::ifstream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static void read_doubles(std::ifstream& in, std::vector<double>& v) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n != v.size()) throw FormatError("model table size mismatch");
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

  static constexpr const char kMagic[9] = "LVPOLY01";

  LinearPolicyConfig config_;
  std::size_t dim_;
  std::size_t vocab_size_;
  std::vector<double> w_del_, w_pld_, w_tok_;
  std::vector<double> b_del_, b_pld_, b_tok_;
};

// Builds the three per-head example sets for one sentence pair following
// the roll-in/roll-out scheme: the length and token heads are supervised
// from a random drop of the reference (survivors and the <pld>-masked
// sentence), the deletion head from the masked state with every <pld>
// replaced by a token sampled from the current model's predictions.
struct SentenceExamples {
  std::vector<HeadExample> del;
  std::vector<HeadExample> pld;
  std::vector<HeadExample> tok;
};

inline SentenceExamples make_training_examples(const LinearPolicy& model, const Sentence& source,
                                               const Sentence& reference, const Vocab& vocab,
                                               Rng& drop_rng, Rng& sample_rng) {
  SentenceExamples ex;
  const auto [dropped, mask] = rollin_drop(reference, drop_rng);

  // Length head, roll-in policy 2: gap labels from the minimal script.
  {
    const Sentence state = with_sentinels(dropped);
    const EditLabels labels = edit_labels_uncapped(dropped, reference);
    for (std::size_t g = 0; g < labels.ins_counts.size(); ++g) {
      ex.pld.push_back({featurize(state, source, g, Head::kLength),
                        std::min(labels.ins_counts[g], kMaxInsert)});
    }
  }

  // Token head, roll-in policy 3: slot labels are the dropped tokens.
  const Sentence masked = rollin_mask(reference, mask);
  const Sentence masked_state = with_sentinels(masked);
  for (std::size_t p = 0; p < masked.size(); ++p) {
    if (masked.ids[p] != kPld) continue;
    ex.tok.push_back({featurize(masked_state, source, p, Head::kToken),
                      static_cast<int>(reference.ids[p])});
  }

  // Deletion head, roll-in policy 1: sample token predictions (argmax
  // would reduce variety), rebuild the sentence, label with the script.
  Sentence filled = masked;
  if (count_placeholders(masked) > 0) {
    const PolicyScores scored =
        model.score(masked_state, ScoreContext{0, &source}, Head::kToken);
    std::vector<std::vector<double>> candidates;
    for (const auto& slot_scores : *scored.fill) {
      candidates.emplace_back(slot_scores.begin() + kNumReserved, slot_scores.end());
    }
    const auto sampled = rollin_model_sample(candidates, sample_rng);
    std::size_t s = 0;
    for (std::size_t p = 0; p < filled.size(); ++p) {
      if (filled.ids[p] != kPld) continue;
      const TokenId id = sampled[s++] + kNumReserved;
      filled.ids[p] = id;
      filled.cont[p] = vocab.continues(id) ? 1 : 0;
    }
  }
  {
    const Sentence state = with_sentinels(filled);
    const EditLabels labels = edit_labels_uncapped(filled, reference);
    for (std::size_t p = 0; p < filled.size(); ++p) {
      ex.del.push_back({featurize(state, source, p, Head::kDelete),
                        labels.del_labels[p] ? 1 : 0});
    }
  }
  return ex;
}

// Trains with plain SGD, one pass per epoch in corpus order. When the
// corpus carries an alternate target list, `use_alt` trains against it.
// Returns the per-epoch average sentence loss, split by head.
inline std::vector<EpochLoss> train(LinearPolicy& model, const ParallelCorpus& corpus,
                                    const Vocab& vocab, std::uint64_t seed, int epochs,
                                    bool use_alt = false) {
  if (corpus.size() == 0) throw ContractError("train: empty corpus");
  if (use_alt && !corpus.has_alt()) throw ContractError("train: corpus has no alternate targets");
  std::vector<EpochLoss> curve;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    EpochLoss sums;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const Sentence source = corpus.source(i, vocab);
      const Sentence reference = use_alt ? corpus.alt(i, vocab) : corpus.target(i, vocab);
      const std::uint64_t stream_index =
          static_cast<std::uint64_t>(epoch) * corpus.size() + i;
      Rng drop_rng = split_rng(seed, RngStream::kRollinDrop, stream_index);
      Rng sample_rng = split_rng(seed, RngStream::kRollinSample, stream_index);
      const SentenceExamples ex =
          make_training_examples(model, source, reference, vocab, drop_rng, sample_rng);
      for (const auto& e : ex.del) sums.del += model.example_update(Head::kDelete, e);
      for (const auto& e : ex.pld) sums.pld += model.example_update(Head::kLength, e);
      for (const auto& e : ex.tok) sums.tok += model.example_update(Head::kToken, e);
    }
    EpochLoss avg;
    avg.del = sums.del / static_cast<double>(corpus.size());
    avg.pld = sums.pld / static_cast<double>(corpus.size());
    avg.tok = sums.tok / static_cast<double>(corpus.size());
    avg.total = avg.del + avg.pld + avg.tok;
    curve.push_back(avg);
  }
  return curve;
}

}  // namespace levdec
