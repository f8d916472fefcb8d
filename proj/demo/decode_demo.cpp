// Minimal walkthrough: build a toy corpus in memory, decode with the
// exact-edit policy, and print each refinement stage.

#include <iostream>
#include <memory>

#include "levdec/levdec.hpp"

int main() {
  using namespace levdec;

  const std::vector<std::vector<std::string>> src = {
      {"the", "small", "c@@", "at"}, {"a", "dog", "bark@@", "s"}};
  const std::vector<std::vector<std::string>> tgt = {
      {"le", "petit", "ch@@", "at"}, {"un", "chien", "ab@@", "oie"}};
  const ParallelCorpus corpus(src, tgt);
  const Vocab vocab = build_vocab(corpus, 64);

  auto refs = std::make_shared<std::vector<Sentence>>();
  for (std::size_t i = 0; i < corpus.size(); ++i) refs->push_back(corpus.target(i, vocab));
  const auto policy = make_oracle_policy(refs, vocab.size());

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const DecodeTrace trace = decode(corpus.source(i, vocab), *policy, vocab, {}, i);
    std::cout << "sentence " << i << " ("
              << (trace.termination == Termination::kFixpoint ? "fixpoint" : "round limit")
              << ", " << trace.iterations << " iterations)\n";
    for (const auto& stage : trace.stages) {
      std::cout << "  " << stage.tag() << ": " << sentence_surface(stage.snapshot, vocab) << "\n";
    }
    std::cout << "  final: " << sentence_surface(trace.final, vocab) << "\n";
  }
  return 0;
}
