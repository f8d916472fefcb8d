#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "levdec/experiment.hpp"

#include "test_support.hpp"

using namespace levdec;
using test_support::TempDir;
using test_support::read_file;
using test_support::write_file;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LEVDEC_CLI_PATH) + " " + args + " 2>/dev/null";
  return std::system(cmd.c_str());
}

// Small deterministic corpus with subword structure. Tokens are distinct
// within each sentence so minimal edit scripts are unambiguous and the
// oracle's gap placement matches position tracking exactly.
void write_corpus(const TempDir& tmp, int pairs = 30) {
  Rng rng(404);
  std::ostringstream src, tgt;
  for (int i = 0; i < pairs; ++i) {
    const std::size_t len = 4 + rng.below(5);
    const std::size_t start = rng.below(10);
    for (std::size_t k = 0; k < len; ++k) {
      if (k) {
        src << ' ';
        tgt << ' ';
      }
      const auto id = (start + k) % 12;
      src << "s" << id;
      if ((start + k) % 4 == 0) {
        tgt << "p" << id << "@@ q" << id;
      } else {
        tgt << "w" << id;
      }
    }
    src << '\n';
    tgt << '\n';
  }
  write_file(tmp.file("src.txt"), src.str());
  write_file(tmp.file("tgt.txt"), tgt.str());
  write_file(tmp.file("stop.txt"), "w1\nw2\n");
}

ExperimentConfig base_config(const TempDir& tmp, const std::string& out) {
  ExperimentConfig config;
  config.src_path = tmp.file("src.txt");
  config.tgt_path = tmp.file("tgt.txt");
  config.stopword_path = tmp.file("stop.txt");
  config.vocab_cap = 500;
  config.out_dir = tmp.file(out);
  config.seed = 11;
  return config;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("decode command writes the full report set") {
  TempDir tmp;
  write_corpus(tmp);
  ExperimentConfig config = base_config(tmp, "out");
  cmd_decode(config);

  const auto jsonl = read_lines(tmp.file("out/traces.jsonl"));
  REQUIRE(jsonl.size() == 30);
  for (const auto& line : jsonl) {
    const auto j = nlohmann::json::parse(line);  // every line parses alone
    REQUIRE(j.contains("id"));
    REQUIRE(j.contains("stages"));
    REQUIRE(j.contains("rounds"));
    REQUIRE(j.contains("termination"));
    REQUIRE(j.contains("final"));
    REQUIRE(j["termination"] == "fixpoint");
  }

  // Oracle decoding scores BLEU 100 at both levels.
  const auto bleu_lines = read_lines(tmp.file("out/bleu.tsv"));
  REQUIRE(bleu_lines.size() == 3);
  REQUIRE(bleu_lines[0].substr(0, 5) == "level");
  REQUIRE(bleu_lines[1].substr(0, 12) == "bpe\t100.0000");
  REQUIRE(bleu_lines[2].substr(0, 13) == "word\t100.0000");

  const auto length_lines = read_lines(tmp.file("out/lengths.tsv"));
  REQUIRE(length_lines.size() >= 4);
  REQUIRE(length_lines[0] == "stage\tsentences\tmean_len\tmean_len_nostop");
  REQUIRE(length_lines[1].substr(0, 4) == "ref\t");

  REQUIRE(std::filesystem::exists(tmp.file("out/duplication.tsv")));
  const auto invalid_lines = read_lines(tmp.file("out/invalid_words.tsv"));
  REQUIRE(invalid_lines.size() == 2);
  REQUIRE(invalid_lines[1].substr(0, 2) == "0\t");  // oracle output is all in-lexicon
}

TEST_CASE("decode accepts an external length predictor") {
  TempDir tmp;
  write_corpus(tmp, 10);
  ExperimentConfig config = base_config(tmp, "lp");
  config.length_pred = "ratio";
  cmd_decode(config);
  // The oracle repairs the forced first-iteration length.
  const auto bleu_lines = read_lines(tmp.file("lp/bleu.tsv"));
  REQUIRE(bleu_lines[1].substr(0, 12) == "bpe\t100.0000");
}

TEST_CASE("probe-subword metric toggles run and change the accuracy column") {
  TempDir tmp;
  write_corpus(tmp, 10);
  ExperimentConfig config = base_config(tmp, "tg1");
  config.probe_ratios_word = {0.25};
  config.probe_ratios_random = {0.5};
  cmd_probe_subword(config);

  ExperimentConfig toggled = config;
  toggled.out_dir = tmp.file("tg2");
  toggled.pld_acc_nonzero = true;
  toggled.match_denom_all_gaps = true;
  cmd_probe_subword(toggled);

  // Same shapes either way; with the oracle both readings are perfect.
  const auto base = read_lines(tmp.file("tg1/probe_subword.tsv"));
  const auto alt = read_lines(tmp.file("tg2/probe_subword.tsv"));
  REQUIRE(base.size() == alt.size());
  REQUIRE(base[0] == alt[0]);
}

TEST_CASE("decode honours the round limit") {
  TempDir tmp;
  write_corpus(tmp, 10);
  ExperimentConfig config = base_config(tmp, "out");
  config.max_rounds = 1;
  cmd_decode(config);
  for (const auto& line : read_lines(tmp.file("out/traces.jsonl"))) {
    const auto j = nlohmann::json::parse(line);
    REQUIRE(j["stages"].size() <= 3);
  }
}

TEST_CASE("train writes a model, vocab, and loss curve; decode loads them") {
  TempDir tmp;
  // Copy task so the linear policy has something to learn.
  std::ostringstream text;
  Rng rng(777);
  for (int i = 0; i < 60; ++i) {
    const std::size_t len = 3 + rng.below(5);
    for (std::size_t k = 0; k < len; ++k) {
      if (k) text << ' ';
      text << "t" << rng.below(12);
    }
    text << '\n';
  }
  write_file(tmp.file("src.txt"), text.str());
  write_file(tmp.file("tgt.txt"), text.str());

  ExperimentConfig config;
  config.src_path = tmp.file("src.txt");
  config.tgt_path = tmp.file("tgt.txt");
  config.vocab_cap = 64;
  config.out_dir = tmp.file("run");
  config.seed = 5;
  config.epochs = 3;
  cmd_train(config);

  REQUIRE(std::filesystem::exists(tmp.file("run/model.bin")));
  REQUIRE(std::filesystem::exists(tmp.file("run/model.bin.vocab")));
  const auto curve = read_lines(tmp.file("run/loss_curve.tsv"));
  REQUIRE(curve.size() == 4);
  REQUIRE(curve[0] == "epoch\tdel_loss\tpld_loss\ttok_loss\ttotal_loss");

  ExperimentConfig decode_config = config;
  decode_config.policy = "linear";
  decode_config.model_path = tmp.file("run/model.bin");
  decode_config.out_dir = tmp.file("decoded");
  cmd_decode(decode_config);
  REQUIRE(std::filesystem::exists(tmp.file("decoded/bleu.tsv")));
}

TEST_CASE("train with zero epochs writes initial weights and an empty curve") {
  TempDir tmp;
  write_corpus(tmp, 8);
  ExperimentConfig config = base_config(tmp, "zero");
  config.epochs = 0;
  cmd_train(config);
  REQUIRE(std::filesystem::exists(tmp.file("zero/model.bin")));
  REQUIRE(read_lines(tmp.file("zero/loss_curve.tsv")).size() == 1);  // header only

  const LinearPolicy model = LinearPolicy::load(tmp.file("zero/model.bin"));
  for (double w : model.table(Head::kDelete)) REQUIRE(w == 0.0);
}

TEST_CASE("train can target the alternate reference file") {
  TempDir tmp;
  write_file(tmp.file("src.txt"), "a b\nc d\n");
  write_file(tmp.file("tgt.txt"), "x x\ny y\n");
  write_file(tmp.file("alt.txt"), "z z\nz z\n");
  ExperimentConfig config;
  config.src_path = tmp.file("src.txt");
  config.tgt_path = tmp.file("tgt.txt");
  config.alt_path = tmp.file("alt.txt");
  config.vocab_cap = 32;
  config.seed = 3;
  config.epochs = 4;
  config.train_on_alt = true;
  config.dump_labels = true;
  config.out_dir = tmp.file("alt_run");
  cmd_train(config);

  // The supervision dump targets the alternate sentences: fills only ever
  // name the alt token "z".
  const auto labels = read_lines(tmp.file("alt_run/labels.jsonl"));
  REQUIRE(labels.size() == 2);
  for (const auto& line : labels) {
    const auto j = nlohmann::json::parse(line);
    for (const auto& fill : j["fills"]) REQUIRE(fill.get<std::string>() == "z");
  }
}

TEST_CASE("tm initialization decodes from the alternate target") {
  TempDir tmp;
  write_file(tmp.file("src.txt"), "s1 s2 s3\ns4 s5\n");
  write_file(tmp.file("tgt.txt"), "w1 w2 w3\nw4 w5\n");
  write_file(tmp.file("alt.txt"), "w3 w2\nw4\n");
  ExperimentConfig config;
  config.src_path = tmp.file("src.txt");
  config.tgt_path = tmp.file("tgt.txt");
  config.alt_path = tmp.file("alt.txt");
  config.vocab_cap = 64;
  config.seed = 1;
  config.init = "tm";
  config.out_dir = tmp.file("tm");
  cmd_decode(config);

  const auto jsonl = read_lines(tmp.file("tm/traces.jsonl"));
  const auto first = nlohmann::json::parse(jsonl[0]);
  // The round-1 deletion stage starts from the TM sentence, not empty.
  const auto& del1 = first["stages"][0];
  REQUIRE(del1["tag"] == "del_1");
  REQUIRE(del1["tokens"].size() > 2);  // sentinels plus surviving TM tokens

  ExperimentConfig missing = config;
  missing.alt_path = std::nullopt;
  missing.out_dir = tmp.file("tm2");
  REQUIRE_THROWS_AS(cmd_decode(missing), ContractError);
}

TEST_CASE("probe-length emits rank and predictor rows") {
  TempDir tmp;
  write_corpus(tmp, 12);
  ExperimentConfig config = base_config(tmp, "pl");
  config.topk = 5;
  cmd_probe_length(config);

  const auto lines = read_lines(tmp.file("pl/probe_length.tsv"));
  REQUIRE(lines[0] ==
          "config\titer_num\tpld1_len\tpld2_len\tfinal_len\ttok1_bleu\ttok1_bp\tfinal_bleu\t"
          "final_bp");
  std::vector<std::string> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    labels.push_back(lines[i].substr(0, lines[i].find('\t')));
  }
  REQUIRE(labels == std::vector<std::string>{"rank_1", "rank_2", "rank_3", "rank_4", "rank_5",
                                             "srclen", "ratio", "linreg", "tgtlen"});

  // The oracle repairs any forced first length: tgtlen row ends at BLEU 100.
  const auto& tgtlen = lines[lines.size() - 1];
  REQUIRE(tgtlen.find("\t100.0000\t") != std::string::npos);

  const auto fits = read_lines(tmp.file("pl/length_predictors.tsv"));
  REQUIRE(fits[0] == "ratio\tcoef\tintercept\tr2");
  REQUIRE(fits.size() == 2);
}

TEST_CASE("probe-subword grids cover kinds and ratios with oracle-perfect scores") {
  TempDir tmp;
  write_corpus(tmp, 15);
  ExperimentConfig config = base_config(tmp, "ps");
  cmd_probe_subword(config);

  const auto lines = read_lines(tmp.file("ps/probe_subword.tsv"));
  REQUIRE(lines.size() == 1 + 5 + 5 + 10);  // header + grids
  int subword_rows = 0, fullword_rows = 0, random_rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    std::string kind, ratio, sentences, skipped, acc, matched, per_gap, precision, recall;
    std::getline(row, kind, '\t');
    std::getline(row, ratio, '\t');
    std::getline(row, sentences, '\t');
    std::getline(row, skipped, '\t');
    std::getline(row, acc, '\t');
    std::getline(row, matched, '\t');
    std::getline(row, per_gap, '\t');
    std::getline(row, precision, '\t');
    std::getline(row, recall, '\t');
    subword_rows += kind == "subword";
    fullword_rows += kind == "fullword";
    random_rows += kind == "random";
    if (sentences != "0") {
      REQUIRE(acc == "1.0000");  // the oracle predicts every gap count
      REQUIRE(precision == "1.0000");
      REQUIRE(recall == "1.0000");
    }
  }
  REQUIRE(subword_rows == 5);
  REQUIRE(fullword_rows == 5);
  REQUIRE(random_rows == 10);
}

TEST_CASE("probe-deletion writes corruption tables and a monotone threshold sweep") {
  TempDir tmp;
  write_corpus(tmp, 12);
  ExperimentConfig config = base_config(tmp, "pd");
  cmd_probe_deletion(config);

  REQUIRE(std::filesystem::exists(tmp.file("pd/deletion_no_accuracy.tsv")));
  const auto fluency = read_lines(tmp.file("pd/deletion_no_fluency.tsv"));
  REQUIRE(fluency.size() == 2);
  // The oracle repairs any initialization.
  REQUIRE(fluency[1].find("\t100.0000\t") != std::string::npos);

  const auto sweep = read_lines(tmp.file("pd/deletion_threshold.tsv"));
  REQUIRE(sweep.size() == 1 + 19);  // header + 0.05..0.95
  double prev = -1.0;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    std::istringstream row(sweep[i]);
    std::string tau, del1, del2;
    std::getline(row, tau, '\t');
    std::getline(row, del1, '\t');
    std::getline(row, del2, '\t');
    const double len = std::stod(del2);
    REQUIRE(len >= prev);  // post-deletion length grows with tau
    prev = len;
  }
}

TEST_CASE("corrupt command writes usable target files") {
  TempDir tmp;
  write_corpus(tmp, 10);
  ExperimentConfig config = base_config(tmp, "c1");
  cmd_corrupt(config, "no-accuracy");
  const auto permuted = read_lines(tmp.file("c1/corrupt_no-accuracy.txt"));
  auto original = read_lines(tmp.file("tgt.txt"));
  REQUIRE(permuted.size() == original.size());
  auto sorted_p = permuted;
  auto sorted_o = original;
  std::sort(sorted_p.begin(), sorted_p.end());
  std::sort(sorted_o.begin(), sorted_o.end());
  REQUIRE(sorted_p == sorted_o);  // sentence multiset preserved
  REQUIRE(permuted != original);

  cmd_corrupt(config, "no-fluency");
  const auto shuffled = read_lines(tmp.file("c1/corrupt_no-fluency.txt"));
  REQUIRE(shuffled.size() == original.size());
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    auto a = test_support::split_ws(shuffled[i]);
    auto b = test_support::split_ws(original[i]);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    REQUIRE(a == b);  // token multiset per line preserved
  }

  REQUIRE_THROWS_AS(cmd_corrupt(config, "sideways"), ContractError);
}

TEST_CASE("report summarizes the corpus and fitted predictors") {
  TempDir tmp;
  write_corpus(tmp, 10);
  ExperimentConfig config = base_config(tmp, "rep");
  cmd_report(config);
  const auto lines = read_lines(tmp.file("rep/report.tsv"));
  REQUIRE(lines.size() == 2);
  REQUIRE(lines[0].substr(0, 5) == "pairs");
  REQUIRE(lines[1].substr(0, 3) == "10\t");
}

TEST_CASE("cli binary runs end to end with deterministic outputs") {
  TempDir tmp;
  write_corpus(tmp, 12);

  const std::string common = "--src " + tmp.file("src.txt") + " --tgt " + tmp.file("tgt.txt") +
                             " --stopwords " + tmp.file("stop.txt") + " --seed 9 ";

  SECTION("exit codes") {
    REQUIRE(run_cli("decode " + common + " --out-dir " + tmp.file("a")) == 0);
    // Missing corpus file: nonzero exit.
    REQUIRE(run_cli("decode --src /nonexistent --tgt /nonexistent --out-dir " +
                    tmp.file("x")) != 0);
    // Unknown subcommand: nonzero exit.
    REQUIRE(run_cli("frobnicate") != 0);
  }

  SECTION("same seed gives byte-identical outputs") {
    REQUIRE(run_cli("probe-subword " + common + " --out-dir " + tmp.file("r1")) == 0);
    REQUIRE(run_cli("probe-subword " + common + " --out-dir " + tmp.file("r2")) == 0);
    REQUIRE(read_file(tmp.file("r1/probe_subword.tsv")) ==
            read_file(tmp.file("r2/probe_subword.tsv")));

    REQUIRE(run_cli("decode " + common + " --sample-iter2 --out-dir " + tmp.file("s1")) == 0);
    REQUIRE(run_cli("decode " + common + " --sample-iter2 --out-dir " + tmp.file("s2")) == 0);
    REQUIRE(read_file(tmp.file("s1/traces.jsonl")) == read_file(tmp.file("s2/traces.jsonl")));

    REQUIRE(run_cli("decode " + common + " --out-dir " + tmp.file("d1")) == 0);
    REQUIRE(run_cli("decode " + common + " --out-dir " + tmp.file("d2")) == 0);
    for (const char* name : {"traces.jsonl", "bleu.tsv", "lengths.tsv", "duplication.tsv",
                             "invalid_words.tsv"}) {
      REQUIRE(read_file(tmp.file(std::string("d1/") + name)) ==
              read_file(tmp.file(std::string("d2/") + name)));
    }
  }

  SECTION("config file keys are overridden by flags") {
    write_file(tmp.file("run.cfg"), "src=" + tmp.file("src.txt") + "\ntgt=" +
                                        tmp.file("tgt.txt") + "\nseed=9\nmax-rounds=1\n");
    REQUIRE(run_cli("decode --config " + tmp.file("run.cfg") + " --out-dir " +
                    tmp.file("cfg1")) == 0);
    for (const auto& line : read_lines(tmp.file("cfg1/traces.jsonl"))) {
      REQUIRE(nlohmann::json::parse(line)["stages"].size() <= 3);
    }
    REQUIRE(run_cli("decode --config " + tmp.file("run.cfg") + " --max-rounds 10 --out-dir " +
                    tmp.file("cfg2")) == 0);
    bool any_multi_round = false;
    for (const auto& line : read_lines(tmp.file("cfg2/traces.jsonl"))) {
      any_multi_round =
          any_multi_round || nlohmann::json::parse(line)["stages"].size() > 3;
    }
    REQUIRE(any_multi_round);
  }
}
