#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "levdec/engine.hpp"
#include "levdec/linear_policy.hpp"
#include "levdec/oracle_policy.hpp"

#include "test_support.hpp"

using namespace levdec;
using test_support::TempDir;
using test_support::make_vocab;
using test_support::sent;

namespace {

struct OracleSetup {
  Vocab vocab;
  std::shared_ptr<std::vector<Sentence>> refs;
  std::shared_ptr<OraclePolicy> policy;
};

OracleSetup oracle_setup(const std::vector<std::string>& references) {
  OracleSetup setup;
  setup.vocab = make_vocab({"a", "b", "c", "d", "e", "f", "g", "h"});
  setup.refs = std::make_shared<std::vector<Sentence>>();
  for (const auto& text : references) setup.refs->push_back(sent(setup.vocab, text));
  setup.policy = make_oracle_policy(setup.refs, setup.vocab.size());
  return setup;
}

// Copy-task corpus shared by the training tests.
struct CopyTask {
  ParallelCorpus corpus;
  Vocab vocab;
  std::vector<std::vector<std::string>> test_lines;
};

CopyTask copy_task(std::uint64_t seed, int train_n, int test_n) {
  Rng gen(seed);
  auto make_line = [&]() {
    std::vector<std::string> line;
    const std::size_t len = 3 + gen.below(6);
    for (std::size_t i = 0; i < len; ++i) line.push_back("t" + std::to_string(gen.below(20)));
    return line;
  };
  std::vector<std::vector<std::string>> train_lines, test_lines;
  for (int i = 0; i < train_n; ++i) train_lines.push_back(make_line());
  for (int i = 0; i < test_n; ++i) test_lines.push_back(make_line());
  return {ParallelCorpus(train_lines, train_lines), Vocab{}, std::move(test_lines)};
}

}  // namespace

TEST_CASE("oracle deletion head keeps every reference token") {
  auto setup = oracle_setup({"a b c d"});
  const Sentence state = with_sentinels((*setup.refs)[0]);
  const auto scores = setup.policy->score(state, {0, &(*setup.refs)[0]}, Head::kDelete);
  REQUIRE(scores.del.has_value());
  REQUIRE(scores.del->size() == 4);
  for (const auto& s : *scores.del) REQUIRE(s[0] > s[1]);  // keep beats delete
}

TEST_CASE("oracle length head on the empty state wants the clamped reference length") {
  auto setup = oracle_setup({"a b c d e"});
  const Sentence empty_state = with_sentinels(Sentence{});
  const auto scores = setup.policy->score(empty_state, {0, nullptr}, Head::kLength);
  REQUIRE(scores.gap.has_value());
  REQUIRE(scores.gap->size() == 1);
  const auto& gap = (*scores.gap)[0];
  REQUIRE(gap.size() == static_cast<std::size_t>(kMaxInsert) + 1);
  std::size_t best = 0;
  for (std::size_t c = 1; c < gap.size(); ++c) {
    if (gap[c] > gap[best]) best = c;
  }
  REQUIRE(best == 5);

  // A reference longer than the class range clamps to kMaxInsert.
  Sentence long_ref;
  for (int i = 0; i < kMaxInsert + 40; ++i) long_ref.push_back(kNumReserved, false);
  auto refs = std::make_shared<std::vector<Sentence>>(std::vector<Sentence>{long_ref});
  auto policy = make_oracle_policy(refs, setup.vocab.size());
  const auto long_scores = policy->score(empty_state, {0, nullptr}, Head::kLength);
  const auto& long_gap = (*long_scores.gap)[0];
  std::size_t long_best = 0;
  for (std::size_t c = 1; c < long_gap.size(); ++c) {
    if (long_gap[c] > long_gap[long_best]) long_best = c;
  }
  REQUIRE(long_best == static_cast<std::size_t>(kMaxInsert));
}

TEST_CASE("oracle length head marks a single dropped token's gap") {
  auto setup = oracle_setup({"a b c"});
  // State "a c": the gap before c wants exactly one insertion.
  const Sentence state = with_sentinels(sent(setup.vocab, "a c"));
  const auto scores = setup.policy->score(state, {0, nullptr}, Head::kLength);
  REQUIRE(scores.gap->size() == 3);
  const auto argmax = [](const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < v.size(); ++c) {
      if (v[c] > v[best]) best = c;
    }
    return best;
  };
  REQUIRE(argmax((*scores.gap)[0]) == 0);
  REQUIRE(argmax((*scores.gap)[1]) == 1);
  REQUIRE(argmax((*scores.gap)[2]) == 0);
}

TEST_CASE("oracle token head requires a placeholder and fills the dropped token") {
  auto setup = oracle_setup({"a b c"});
  const Sentence no_pld = with_sentinels(sent(setup.vocab, "a b c"));
  REQUIRE_THROWS_AS(setup.policy->score(no_pld, {0, nullptr}, Head::kToken), ContractError);

  Sentence masked = sent(setup.vocab, "a c");
  masked.ids.insert(masked.ids.begin() + 1, kPld);
  masked.cont.insert(masked.cont.begin() + 1, 0);
  const auto scores = setup.policy->score(with_sentinels(masked), {0, nullptr}, Head::kToken);
  REQUIRE(scores.fill->size() == 1);
  const auto& slot = (*scores.fill)[0];
  REQUIRE(slot.size() == setup.vocab.size());
  std::size_t best = 0;
  for (std::size_t c = 1; c < slot.size(); ++c) {
    if (slot[c] > slot[best]) best = c;
  }
  REQUIRE(static_cast<TokenId>(best) == setup.vocab.id_of("b"));
}

TEST_CASE("oracle rejects unknown sentence ids") {
  auto setup = oracle_setup({"a"});
  const Sentence state = with_sentinels(Sentence{});
  REQUIRE_THROWS_AS(setup.policy->score(state, {5, nullptr}, Head::kLength), ContractError);
}

TEST_CASE("decoding at the reference is a fixpoint for the oracle") {
  auto setup = oracle_setup({"a b c d e"});
  DecodeOptions options;
  options.init = (*setup.refs)[0];
  const DecodeTrace trace =
      decode((*setup.refs)[0], *setup.policy, setup.vocab, options, 0);
  REQUIRE(trace.termination == Termination::kFixpoint);
  REQUIRE(trace.rounds_executed == 1);
  REQUIRE(trace.iterations == 0);
  REQUIRE(trace.final == (*setup.refs)[0]);
}

TEST_CASE("featurize is deterministic and context-sensitive") {
  Vocab vocab = make_vocab({"a", "b", "c", "d", "e"});
  const Sentence source = sent(vocab, "a b c d");
  const Sentence state = with_sentinels(sent(vocab, "a b c d"));

  for (Head head : {Head::kDelete, Head::kLength, Head::kToken}) {
    const auto f1 = featurize(state, source, 1, head);
    const auto f2 = featurize(state, source, 1, head);
    REQUIRE(f1 == f2);
    REQUIRE_FALSE(f1.empty());
  }

  // Window at the sentence start stays in bounds and still yields features.
  const auto boundary = featurize(state, source, 0, Head::kDelete);
  REQUIRE_FALSE(boundary.empty());

  // Changing one window token changes the feature set.
  Sentence other = sent(vocab, "a e c d");
  const auto fa = featurize(state, source, 1, Head::kDelete);
  const auto fb = featurize(with_sentinels(other), source, 1, Head::kDelete);
  REQUIRE(fa != fb);
}

TEST_CASE("linear policy produces finite scores of the right shape") {
  Vocab vocab = make_vocab({"a", "b", "c", "d", "e"});
  LinearPolicyConfig config;
  config.hash_bits = 12;
  LinearPolicy model(vocab.size(), config);
  const Sentence source = sent(vocab, "a b c");
  Sentence content = sent(vocab, "a b");
  content.ids.insert(content.ids.begin() + 1, kPld);
  content.cont.insert(content.cont.begin() + 1, 0);
  const Sentence state = with_sentinels(content);
  const ScoreContext ctx{0, &source};

  const auto del = model.score(state, ctx, Head::kDelete);
  REQUIRE(del.del->size() == 3);
  const auto gap = model.score(state, ctx, Head::kLength);
  REQUIRE(gap.gap->size() == 4);
  for (const auto& g : *gap.gap) {
    REQUIRE(g.size() == static_cast<std::size_t>(kMaxInsert) + 1);
    for (double v : g) REQUIRE(std::isfinite(v));
  }
  const auto fill = model.score(state, ctx, Head::kToken);
  REQUIRE(fill.fill->size() == 1);
  REQUIRE((*fill.fill)[0].size() == vocab.size());

  // Identical queries return identical scores.
  const auto gap2 = model.score(state, ctx, Head::kLength);
  REQUIRE(*gap.gap == *gap2.gap);
}

TEST_CASE("training for zero epochs changes nothing") {
  auto task = copy_task(3, 20, 0);
  const Vocab vocab = build_vocab(task.corpus, 64);
  LinearPolicyConfig config;
  config.hash_bits = 12;
  LinearPolicy model(vocab.size(), config);
  const auto before = model.table(Head::kLength);
  const auto curve = train(model, task.corpus, vocab, 1, 0);
  REQUIRE(curve.empty());
  REQUIRE(model.table(Head::kLength) == before);
}

TEST_CASE("training on the copy task reduces the total loss") {
  auto task = copy_task(17, 80, 0);
  const Vocab vocab = build_vocab(task.corpus, 64);
  LinearPolicy model(vocab.size(), {});
  const auto curve = train(model, task.corpus, vocab, 9, 3);
  REQUIRE(curve.size() == 3);
  REQUIRE(curve.back().total < curve.front().total);
}

TEST_CASE("per-epoch loss is the sum of the per-head losses") {
  auto task = copy_task(21, 30, 0);
  const Vocab vocab = build_vocab(task.corpus, 64);
  LinearPolicy model(vocab.size(), {});
  const auto curve = train(model, task.corpus, vocab, 5, 2);
  for (const auto& epoch : curve) {
    REQUIRE(std::abs(epoch.total - (epoch.del + epoch.pld + epoch.tok)) < 1e-9);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  Vocab vocab = make_vocab({"a", "b", "c", "d", "e", "f"});
  LinearPolicyConfig config;
  config.hash_bits = 10;
  const Sentence source = sent(vocab, "a b c d");
  Rng rng(2718);

  const auto check_head = [&](Head head, const HeadExample& ex) {
    LinearPolicy model(vocab.size(), config);
    // Random nonzero starting point.
    for (double& w : model.table(head)) w = (rng.uniform01() - 0.5) * 0.2;
    for (double& b : model.biases(head)) b = (rng.uniform01() - 0.5) * 0.2;

    const auto grad = model.example_weight_gradient(head, ex);
    REQUIRE(grad.size() >= 10);
    std::size_t checked = 0;
    for (std::size_t pick = 0; pick < grad.size() && checked < 12; pick += 1 + rng.below(3)) {
      const auto [idx, analytic] = grad[pick];
      if (std::abs(analytic) < 1e-8) continue;
      const double h = 1e-5;
      const double saved = model.table(head)[idx];
      model.table(head)[idx] = saved + h;
      const double up = model.example_loss(head, ex);
      model.table(head)[idx] = saved - h;
      const double down = model.example_loss(head, ex);
      model.table(head)[idx] = saved;
      const double numeric = (up - down) / (2 * h);
      REQUIRE(std::abs(numeric - analytic) / std::max(std::abs(analytic), 1e-12) < 1e-4);
      ++checked;
    }
    REQUIRE(checked >= 10);
  };

  Sentence content = sent(vocab, "a b d");
  const Sentence state = with_sentinels(content);
  check_head(Head::kDelete, {featurize(state, source, 1, Head::kDelete), 1});
  check_head(Head::kLength, {featurize(state, source, 2, Head::kLength), 3});

  Sentence masked = content;
  masked.ids[1] = kPld;
  masked.cont[1] = 0;
  const Sentence masked_state = with_sentinels(masked);
  check_head(Head::kToken, {featurize(masked_state, source, 1, Head::kToken),
                            vocab.id_of("c")});
}

TEST_CASE("model persistence round-trips") {
  TempDir tmp;
  Vocab vocab = make_vocab({"a", "b", "c"});
  LinearPolicyConfig config;
  config.hash_bits = 8;
  LinearPolicy model(vocab.size(), config);
  Rng rng(4);
  for (double& w : model.table(Head::kDelete)) w = rng.uniform01();
  for (double& w : model.table(Head::kLength)) w = rng.uniform01();
  for (double& w : model.table(Head::kToken)) w = rng.uniform01();
  for (double& b : model.biases(Head::kToken)) b = rng.uniform01();

  const std::string path = tmp.file("model.bin");
  model.save(path);
  const LinearPolicy loaded = LinearPolicy::load(path);
  REQUIRE(loaded.vocab_size() == model.vocab_size());
  REQUIRE(loaded.hash_dim() == model.hash_dim());
  REQUIRE(loaded.table(Head::kDelete) == model.table(Head::kDelete));
  REQUIRE(loaded.table(Head::kLength) == model.table(Head::kLength));
  REQUIRE(loaded.table(Head::kToken) == model.table(Head::kToken));
  REQUIRE(loaded.biases(Head::kToken) == model.biases(Head::kToken));

  test_support::write_file(tmp.file("junk.bin"), "NOTAMODELFILE###");
  REQUIRE_THROWS_AS(LinearPolicy::load(tmp.file("junk.bin")), FormatError);
}

TEST_CASE("trained policy decodes the copy task from scratch") {
  auto task = copy_task(12345, 200, 100);
  const Vocab vocab = build_vocab(task.corpus, 64);
  LinearPolicy model(vocab.size(), {});
  const auto curve = train(model, task.corpus, vocab, 7, 5);
  REQUIRE(curve.back().total < curve.front().total);

  int exact = 0;
  for (const auto& line : task.test_lines) {
    const Sentence src = encode_tokens(line, vocab);
    const DecodeTrace trace = decode(src, model, vocab, {}, 0);
    exact += (trace.final == src);
  }
  REQUIRE(exact >= 90);
}
