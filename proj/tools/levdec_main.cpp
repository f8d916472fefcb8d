// Command-line surface for the edit-based refinement decoder: corpus
// loading, policy training, decoding, probe batteries, and TSV reports.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "levdec/levdec.hpp"

namespace {

struct CliOptions {
  levdec::ExperimentConfig config;
  std::string config_path;
  std::string corrupt_mode = "no-accuracy";
};

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
  auto& config = opt.config;
  cmd->add_option("--config", opt.config_path, "Flat key=value config file");
  cmd->add_option("--src", config.src_path, "Source corpus file");
  cmd->add_option("--tgt", config.tgt_path, "Target corpus file");
  cmd->add_option("--alt", config.alt_path,
                  "Alternate target file (distilled output or TM match)");
  cmd->add_option("--stopwords", config.stopword_path, "Stop-word file, one word per line");
  cmd->add_option("--vocab-cap", config.vocab_cap, "Vocabulary size cap, reserved ids included");
  cmd->add_option("--seed", config.seed, "Seed governing all randomness");
  cmd->add_option("--out-dir", config.out_dir, "Output directory");
  cmd->add_option("--policy", config.policy, "Scoring policy: oracle | linear");
  cmd->add_option("--model", config.model_path, "Linear policy model file");
  cmd->add_option("--vocab", config.vocab_path, "Vocab file (defaults to <model>.vocab)");
  cmd->add_option("--init", config.init, "Decoding initialization: empty | tm");
  cmd->add_option("--max-rounds", config.max_rounds, "Refinement round limit");
  cmd->add_option("--topk", config.topk, "First-iteration length candidates");
  cmd->add_option("--length-pred", config.length_pred,
                  "External first-iteration length: srclen | ratio | linreg | tgtlen");
  cmd->add_option("--del-threshold", config.del_threshold, "Softmax deletion threshold");
  cmd->add_flag("--sample-iter2", config.sample_iter2,
                "Sample second-round lengths from softmax(score)");
}

bool parse_bool(const std::string& value) {
  return value == "1" || value == "true" || value == "yes" || value == "on";
}

// Applies one config-file key. Returns false for unknown keys.
bool apply_config_key(CliOptions& opt, const std::string& key, const std::string& value) {
  auto& config = opt.config;
  if (key == "src") config.src_path = value;
  else if (key == "tgt") config.tgt_path = value;
  else if (key == "alt") config.alt_path = value;
  else if (key == "stopwords") config.stopword_path = value;
  else if (key == "vocab-cap") config.vocab_cap = std::stoul(value);
  else if (key == "seed") config.seed = std::stoull(value);
  else if (key == "out-dir") config.out_dir = value;
  else if (key == "policy") config.policy = value;
  else if (key == "model") config.model_path = value;
  else if (key == "vocab") config.vocab_path = value;
  else if (key == "init") config.init = value;
  else if (key == "max-rounds") config.max_rounds = std::stoi(value);
  else if (key == "topk") config.topk = std::stoi(value);
  else if (key == "length-pred") config.length_pred = value;
  else if (key == "del-threshold") config.del_threshold = std::stod(value);
  else if (key == "sample-iter2") config.sample_iter2 = parse_bool(value);
  else if (key == "epochs") config.epochs = std::stoi(value);
  else if (key == "lr") config.learning_rate = std::stod(value);
  else if (key == "hash-bits") config.hash_bits = static_cast<std::uint32_t>(std::stoul(value));
  else if (key == "train-on-alt") config.train_on_alt = parse_bool(value);
  else if (key == "dump-labels") config.dump_labels = parse_bool(value);
  else if (key == "pld-acc-nonzero") config.pld_acc_nonzero = parse_bool(value);
  else if (key == "match-all-gaps") config.match_denom_all_gaps = parse_bool(value);
  else if (key == "tau-min") config.tau_min = std::stod(value);
  else if (key == "tau-max") config.tau_max = std::stod(value);
  else if (key == "tau-step") config.tau_step = std::stod(value);
  else if (key == "mode") opt.corrupt_mode = value;
  else return false;
  return true;
}

// Flat key=value file; keys already given on the command line win.
void load_config_file(CLI::App* cmd, CliOptions& opt) {
  if (opt.config_path.empty()) return;
  std::ifstream in(opt.config_path);
  if (!in) throw levdec::FormatError("cannot open config file: " + opt.config_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw levdec::FormatError(opt.config_path + ": expected key=value at line " +
                                std::to_string(line_no));
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    const auto* option = cmd->get_option_no_throw("--" + key);
    if (option && option->count() > 0) continue;  // flag overrides config
    if (!apply_config_key(opt, key, value)) {
      throw levdec::FormatError(opt.config_path + ": unknown key '" + key + "' at line " +
                                std::to_string(line_no));
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edit-based iterative-refinement decoder and diagnostics"};
  app.require_subcommand(1);

  CliOptions opt;
  auto& config = opt.config;

  auto* train = app.add_subcommand("train", "Train the linear policy");
  add_common_flags(train, opt);
  train->add_option("--epochs", config.epochs, "Training epochs");
  train->add_option("--lr", config.learning_rate, "SGD learning rate");
  train->add_option("--hash-bits", config.hash_bits, "log2 of the feature-hash dimension");
  train->add_flag("--train-on-alt", config.train_on_alt,
                  "Use the alternate target file as training references");
  train->add_flag("--dump-labels", config.dump_labels, "Write a JSONL supervision dump");

  auto* decode = app.add_subcommand("decode", "Decode and report length/duplication tables");
  add_common_flags(decode, opt);

  auto* probe_length = app.add_subcommand("probe-length", "Top-k and external length probes");
  add_common_flags(probe_length, opt);

  auto* probe_subword = app.add_subcommand("probe-subword",
                                           "Subword / full-word / random deletion probes");
  add_common_flags(probe_subword, opt);
  probe_subword->add_option("--word-ratios", config.probe_ratios_word,
                            "Deletion ratios for subword/fullword probes");
  probe_subword->add_option("--random-ratios", config.probe_ratios_random,
                            "Deletion ratios for random probes");
  probe_subword->add_flag("--pld-acc-nonzero", config.pld_acc_nonzero,
                          "Score placeholder accuracy only on gaps with nonzero gold");
  probe_subword->add_flag("--match-all-gaps", config.match_denom_all_gaps,
                          "Average matched tokens over all gaps instead of gold-filled gaps");

  auto* probe_deletion = app.add_subcommand(
      "probe-deletion", "No-accuracy / no-fluency initializations and threshold sweep");
  add_common_flags(probe_deletion, opt);
  probe_deletion->add_option("--tau-min", config.tau_min, "Sweep start");
  probe_deletion->add_option("--tau-max", config.tau_max, "Sweep end");
  probe_deletion->add_option("--tau-step", config.tau_step, "Sweep step");

  auto* corrupt = app.add_subcommand("corrupt", "Write a corrupted target file");
  add_common_flags(corrupt, opt);
  corrupt->add_option("--mode", opt.corrupt_mode, "no-accuracy | no-fluency");

  auto* report = app.add_subcommand("report", "Corpus and length-predictor summary");
  add_common_flags(report, opt);

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* active = app.get_subcommands().front();
    load_config_file(active, opt);
    if (train->parsed()) {
      levdec::cmd_train(config);
    } else if (decode->parsed()) {
      levdec::cmd_decode(config);
    } else if (probe_length->parsed()) {
      levdec::cmd_probe_length(config);
    } else if (probe_subword->parsed()) {
      levdec::cmd_probe_subword(config);
    } else if (probe_deletion->parsed()) {
      levdec::cmd_probe_deletion(config);
    } else if (corrupt->parsed()) {
      levdec::cmd_corrupt(config, opt.corrupt_mode);
    } else if (report->parsed()) {
      levdec::cmd_report(config);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
