#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "levdec/bleu.hpp"
#include "levdec/corpus.hpp"
#include "levdec/diagnostics.hpp"
#include "levdec/edit.hpp"
#include "levdec/engine.hpp"
#include "levdec/errors.hpp"
#include "levdec/length_predictor.hpp"
#include "levdec/linear_policy.hpp"
#include "levdec/oracle_policy.hpp"
#include "levdec/policy.hpp"
#include "levdec/report_io.hpp"

namespace levdec {

// Everything one command run needs: corpus paths, decode options, probe
// parameters, output directory, and the single seed that governs all
// randomness.
struct ExperimentConfig {
  std::string src_path;
  std::string tgt_path;
  std::optional<std::string> alt_path;
  std::optional<std::string> stopword_path;
  std::size_t vocab_cap = 32000;

  std::string policy = "oracle";  // oracle | linear
  std::optional<std::string> model_path;
  std::optional<std::string> vocab_path;  // defaults to <model>.vocab for linear

  std::string init = "empty";  // empty | tm
  int max_rounds = 10;
  int topk = 5;
  std::optional<std::string> length_pred;  // srclen | ratio | linreg | tgtlen
  std::optional<double> del_threshold;
  bool sample_iter2 = false;  // multinomial length choice in round 2

  std::uint64_t seed = 1;
  std::string out_dir;

  // Training.
  int epochs = 5;
  double learning_rate = 0.1;
  std::uint32_t hash_bits = 18;
  bool train_on_alt = false;
  bool dump_labels = false;

  // Probe grids.
  std::vector<double> probe_ratios_word = {0.05, 0.10, 0.15, 0.20, 0.25};
  std::vector<double> probe_ratios_random = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  bool pld_acc_nonzero = false;     // restrict accuracy to gaps with gold > 0
  bool match_denom_all_gaps = false;  // per-gap matched mean over all gaps

  // Deletion threshold sweep.
  double tau_min = 0.05;
  double tau_max = 0.95;
  double tau_step = 0.05;
};

// Loaded, encoded experiment inputs.
struct ExperimentData {
  ParallelCorpus corpus;
  Vocab vocab;
  StopList stoplist;
  std::vector<Sentence> sources;
  std::vector<Sentence> targets;
  std::optional<std::vector<Sentence>> alts;
  std::shared_ptr<Policy> policy;
};

namespace detail {

inline std::string out_path(const ExperimentConfig& config, const std::string& name) {
  std::filesystem::create_directories(config.out_dir);
  return (std::filesystem::path(config.out_dir) / name).string();
}

}  // namespace detail

inline ExperimentData load_experiment_data(const ExperimentConfig& config,
                                           bool need_policy = true) {
  ExperimentData data;
  data.corpus = load_parallel_corpus(config.src_path, config.tgt_path, config.alt_path);

  if (config.policy == "linear") {
    const std::string vocab_file = config.vocab_path
                                       ? *config.vocab_path
                                       : (config.model_path ? *config.model_path + ".vocab" : "");
    if (vocab_file.empty()) throw ContractError("linear policy needs --model");
    data.vocab = load_vocab(vocab_file);
  } else {
    data.vocab = build_vocab(data.corpus, config.vocab_cap);
  }

  if (config.stopword_path) data.stoplist = load_stoplist(*config.stopword_path);

  data.sources.reserve(data.corpus.size());
  data.targets.reserve(data.corpus.size());
  for (std::size_t i = 0; i < data.corpus.size(); ++i) {
    data.sources.push_back(data.corpus.source(i, data.vocab));
    data.targets.push_back(data.corpus.target(i, data.vocab));
  }
  if (data.corpus.has_alt()) {
    data.alts.emplace();
    data.alts->reserve(data.corpus.size());
    for (std::size_t i = 0; i < data.corpus.size(); ++i) {
      data.alts->push_back(data.corpus.alt(i, data.vocab));
    }
  }

  if (need_policy) {
    if (config.policy == "oracle") {
      auto refs = std::make_shared<std::vector<Sentence>>(data.targets);
      data.policy = make_oracle_policy(refs, data.vocab.size());
    } else if (config.policy == "linear") {
      if (!config.model_path) throw ContractError("linear policy needs --model");
      auto model = std::make_shared<LinearPolicy>(LinearPolicy::load(*config.model_path));
      if (model->vocab_size() != data.vocab.size()) {
        throw FormatError("model vocabulary size does not match the vocab file");
      }
      data.policy = std::move(model);
    } else {
      throw ContractError("unknown policy: " + config.policy);
    }
  }
  return data;
}

namespace detail {

inline DecodeOptions base_decode_options(const ExperimentConfig& config,
                                         const ExperimentData& data, std::size_t i) {
  DecodeOptions options;
  options.max_rounds = config.max_rounds;
  options.deletion_threshold = config.del_threshold;
  if (config.sample_iter2) options.sample_seed_iter2 = config.seed;
  if (config.init == "tm") {
    if (!data.alts) throw ContractError("--init tm needs an alternate target file");
    options.init = (*data.alts)[i];
  } else if (config.init != "empty") {
    throw ContractError("unknown init mode: " + config.init);
  }
  return options;
}

struct StageViews {
  // Content snapshots keyed by (round, stage kind), so iteration order is
  // stage order; only traces that reached the stage contribute.
  std::map<std::pair<int, int>, std::vector<Sentence>> by_stage;
  std::vector<Sentence> finals;
  double mean_iterations = 0.0;

  const std::vector<Sentence>* find(const std::string& tag) const {
    for (const auto& [key, sentences] : by_stage) {
      if (stage_tag(key) == tag) return &sentences;
    }
    return nullptr;
  }

  static std::string stage_tag(const std::pair<int, int>& key) {
    return DecodeStage{static_cast<StageKind>(key.second), key.first, {}}.tag();
  }
};

inline StageViews collect_stages(const std::vector<DecodeTrace>& traces) {
  StageViews views;
  double iter_sum = 0.0;
  for (const auto& trace : traces) {
    for (const auto& stage : trace.stages) {
      views.by_stage[{stage.round, static_cast<int>(stage.kind)}].push_back(
          strip_sentinels(stage.snapshot));
    }
    views.finals.push_back(trace.final);
    iter_sum += trace.iterations;
  }
  views.mean_iterations = traces.empty() ? 0.0 : iter_sum / static_cast<double>(traces.size());
  return views;
}

inline double mean_length(const std::vector<Sentence>& sentences) {
  if (sentences.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& s : sentences) total += s.size();
  return static_cast<double>(total) / static_cast<double>(sentences.size());
}

inline std::string opt_str(const std::optional<double>& v, int digits = 4) {
  return v ? format_double(*v, digits) : "NA";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// train

inline void cmd_train(const ExperimentConfig& config) {
  ExperimentData data = load_experiment_data(config, /*need_policy=*/false);
  if (config.train_on_alt && !data.alts) {
    throw ContractError("--train-on-alt needs an alternate target file");
  }

  LinearPolicyConfig model_config;
  model_config.hash_bits = config.hash_bits;
  model_config.learning_rate = config.learning_rate;
  LinearPolicy model(data.vocab.size(), model_config);

  const auto curve = train(model, data.corpus, data.vocab, config.seed, config.epochs,
                           config.train_on_alt);

  const std::string model_path = detail::out_path(config, "model.bin");
  model.save(model_path);
  save_vocab(data.vocab, model_path + ".vocab");

  TsvWriter tsv(detail::out_path(config, "loss_curve.tsv"));
  tsv.header({"epoch", "del_loss", "pld_loss", "tok_loss", "total_loss"});
  for (std::size_t e = 0; e < curve.size(); ++e) {
    tsv.row({std::to_string(e + 1), format_double(curve[e].del, 6),
             format_double(curve[e].pld, 6), format_double(curve[e].tok, 6),
             format_double(curve[e].total, 6)});
  }
  tsv.close();

  if (config.dump_labels) {
    std::ofstream out(detail::out_path(config, "labels.jsonl"), std::ios::binary);
    const auto& refs = config.train_on_alt ? *data.alts : data.targets;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      Rng rng = split_rng(config.seed, RngStream::kRollinDrop, i);
      const auto [dropped, mask] = rollin_drop(refs[i], rng);
      const EditLabels labels = edit_labels_uncapped(dropped, refs[i]);
      out << edit_labels_to_json_line(dropped, labels, data.vocab) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// decode

inline std::vector<DecodeTrace> run_decode(const ExperimentConfig& config,
                                           const ExperimentData& data) {
  std::optional<RatioModel> ratio;
  std::optional<LinRegModel> linreg;
  std::optional<LengthPredictor> predictor;
  if (config.length_pred) {
    predictor = length_predictor_from_name(*config.length_pred);
    if (*predictor == LengthPredictor::kRatio) ratio = fit_ratio(data.corpus, data.vocab);
    if (*predictor == LengthPredictor::kLinReg) linreg = fit_linreg(data.corpus, data.vocab);
  }

  std::vector<DecodeTrace> traces;
  traces.reserve(data.sources.size());
  for (std::size_t i = 0; i < data.sources.size(); ++i) {
    DecodeOptions options = detail::base_decode_options(config, data, i);
    if (predictor) {
      options.external_length_iter1 =
          predict_length(*predictor, data.sources[i], ratio, linreg, &data.targets[i]);
    }
    traces.push_back(decode(data.sources[i], *data.policy, data.vocab, options, i));
  }
  return traces;
}

inline void write_bleu_tsv(TsvWriter& tsv, const std::string& label, const BleuReport& report) {
  tsv.row({label, format_double(report.score), format_double(report.precisions[0], 1),
           format_double(report.precisions[1], 1), format_double(report.precisions[2], 1),
           format_double(report.precisions[3], 1), format_double(report.brevity_penalty, 3),
           std::to_string(report.hyp_length), std::to_string(report.ref_length)});
}

inline void cmd_decode(const ExperimentConfig& config) {
  ExperimentData data = load_experiment_data(config);
  const auto traces = run_decode(config, data);

  {
    std::ofstream out(detail::out_path(config, "traces.jsonl"), std::ios::binary);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      out << trace_to_json_line(traces[i], i, data.vocab) << '\n';
    }
  }

  const auto views = detail::collect_stages(traces);

  {
    TsvWriter tsv(detail::out_path(config, "bleu.tsv"));
    tsv.header({"level", "bleu", "p1", "p2", "p3", "p4", "bp", "hyp_len", "ref_len"});
    write_bleu_tsv(tsv, "bpe", bleu(views.finals, data.targets, BleuLevel::kBpe, data.vocab));
    write_bleu_tsv(tsv, "word", bleu(views.finals, data.targets, BleuLevel::kWord, data.vocab));
    tsv.close();
  }

  {
    const IterLengthStats stats = iteration_length_stats(traces, data.stoplist, data.vocab);
    TsvWriter tsv(detail::out_path(config, "lengths.tsv"));
    tsv.header({"stage", "sentences", "mean_len", "mean_len_nostop"});
    std::size_t ref_len = 0, ref_len_nostop = 0;
    for (const auto& t : data.targets) {
      ref_len += t.size();
      ref_len_nostop += strip_stopwords(t, data.stoplist, data.vocab).size();
    }
    const double n = static_cast<double>(data.targets.size());
    tsv.row({"ref", std::to_string(data.targets.size()),
             format_double(static_cast<double>(ref_len) / n),
             format_double(static_cast<double>(ref_len_nostop) / n)});
    for (const auto& row : stats.rows) {
      tsv.row({row.tag, std::to_string(row.traces), format_double(row.mean_len),
               format_double(row.mean_len_nostop)});
    }
    tsv.close();
  }

  {
    TsvWriter tsv(detail::out_path(config, "duplication.tsv"));
    tsv.header({"stage", "mean_dup", "mean_dup_nostop"});
    const auto dup_row = [&](const std::string& tag, const std::vector<Sentence>& sentences) {
      if (sentences.empty()) return;
      double with = 0.0, without = 0.0;
      for (const auto& s : sentences) {
        with += static_cast<double>(count_duplicates(s));
        without += static_cast<double>(count_duplicates(s, data.stoplist, data.vocab));
      }
      const double n = static_cast<double>(sentences.size());
      tsv.row({tag, format_double(with / n), format_double(without / n)});
    };
    dup_row("ref", data.targets);
    for (const auto& [key, sentences] : views.by_stage) {
      dup_row(detail::StageViews::stage_tag(key), sentences);
    }
    dup_row("final", views.finals);
    tsv.close();
  }

  {
    const auto lexicon = build_word_lexicon(data.corpus, data.vocab);
    const InvalidWordStats stats = count_invalid_words(views.finals, lexicon, data.vocab);
    TsvWriter tsv(detail::out_path(config, "invalid_words.tsv"));
    tsv.header({"invalid_words", "total_words", "sentences_with_invalid", "sentences",
                "sentence_ratio"});
    tsv.row({std::to_string(stats.invalid_words), std::to_string(stats.total_words),
             std::to_string(stats.sentences_with_invalid), std::to_string(views.finals.size()),
             format_double(static_cast<double>(stats.sentences_with_invalid) /
                           static_cast<double>(views.finals.size()))});
    tsv.close();
  }
}

// ---------------------------------------------------------------------------
// probe-length

inline void cmd_probe_length(const ExperimentConfig& config) {
  ExperimentData data = load_experiment_data(config);

  const RatioModel ratio = fit_ratio(data.corpus, data.vocab);
  std::optional<LinRegModel> linreg;
  try {
    linreg = fit_linreg(data.corpus, data.vocab);
  } catch (const DegenerateDesignError&) {
    linreg = std::nullopt;  // reported as NA rows
  }

  TsvWriter tsv(detail::out_path(config, "probe_length.tsv"));
  tsv.header({"config", "iter_num", "pld1_len", "pld2_len", "final_len", "tok1_bleu", "tok1_bp",
              "final_bleu", "final_bp"});

  const auto emit = [&](const std::string& label, const std::vector<DecodeTrace>& traces) {
    const auto views = detail::collect_stages(traces);
    const auto* tok1 = views.find("tok_1");
    const auto* pld1 = views.find("pld_1");
    const auto* pld2 = views.find("pld_2");
    BleuReport tok1_bleu;
    if (tok1 && tok1->size() == data.targets.size()) {
      tok1_bleu = bleu(*tok1, data.targets, BleuLevel::kBpe, data.vocab);
    }
    const BleuReport final_bleu = bleu(views.finals, data.targets, BleuLevel::kBpe, data.vocab);
    tsv.row({label, format_double(views.mean_iterations, 2),
             format_double(pld1 ? detail::mean_length(*pld1) : 0.0, 2),
             format_double(pld2 ? detail::mean_length(*pld2) : 0.0, 2),
             format_double(detail::mean_length(views.finals), 2), format_double(tok1_bleu.score),
             format_double(tok1_bleu.brevity_penalty, 3), format_double(final_bleu.score),
             format_double(final_bleu.brevity_penalty, 3)});
  };

  // Top-k first-iteration lengths, one row per rank.
  std::vector<std::vector<DecodeTrace>> per_rank(static_cast<std::size_t>(config.topk));
  for (std::size_t i = 0; i < data.sources.size(); ++i) {
    DecodeOptions options = detail::base_decode_options(config, data, i);
    auto traces =
        decode_topk_lengths(data.sources[i], *data.policy, data.vocab, config.topk, options, i);
    for (std::size_t r = 0; r < per_rank.size() && r < traces.size(); ++r) {
      per_rank[r].push_back(std::move(traces[r]));
    }
  }
  for (std::size_t r = 0; r < per_rank.size(); ++r) {
    if (per_rank[r].size() == data.sources.size()) {
      emit("rank_" + std::to_string(r + 1), per_rank[r]);
    }
  }

  // External predictors, one row each.
  const std::vector<std::pair<std::string, LengthPredictor>> predictors = {
      {"srclen", LengthPredictor::kSrcLen},
      {"ratio", LengthPredictor::kRatio},
      {"linreg", LengthPredictor::kLinReg},
      {"tgtlen", LengthPredictor::kOracle},
  };
  for (const auto& [name, kind] : predictors) {
    if (kind == LengthPredictor::kLinReg && !linreg) continue;
    std::vector<DecodeTrace> traces;
    traces.reserve(data.sources.size());
    for (std::size_t i = 0; i < data.sources.size(); ++i) {
      DecodeOptions options = detail::base_decode_options(config, data, i);
      options.external_length_iter1 =
          predict_length(kind, data.sources[i], ratio, linreg, &data.targets[i]);
      traces.push_back(decode(data.sources[i], *data.policy, data.vocab, options, i));
    }
    emit(name, traces);
  }
  tsv.close();

  TsvWriter fits(detail::out_path(config, "length_predictors.tsv"));
  fits.header({"ratio", "coef", "intercept", "r2"});
  fits.row({format_double(ratio.ratio, 6), linreg ? format_double(linreg->coef, 6) : "NA",
            linreg ? format_double(linreg->intercept, 6) : "NA",
            linreg ? format_double(linreg->r_squared, 6) : "NA"});
  fits.close();
}

// ---------------------------------------------------------------------------
// probe-subword

namespace detail {

// Per-gap placeholder counts chosen in round 1, read off the del_1 ->
// pld_1 snapshots.
inline std::vector<int> round1_gap_counts(const Sentence& post_del, const Sentence& pld_state) {
  std::vector<int> counts(post_del.size() + 1, 0);
  std::size_t gap = 0;
  for (std::size_t i = 0; i < pld_state.size(); ++i) {
    if (pld_state.ids[i] == kPld) {
      counts[gap] += 1;
    } else {
      ++gap;
    }
  }
  return counts;
}

// Output positions each fill token lands at when a script is applied;
// the output equals the reference, so these positions classify fills in
// reference context.
inline std::vector<std::size_t> fill_output_positions(const Sentence& init,
                                                      const EditLabels& labels) {
  std::vector<std::size_t> positions;
  std::size_t out_pos = 0;
  for (std::size_t g = 0; g <= init.size(); ++g) {
    for (int k = 0; k < labels.ins_counts[g]; ++k) positions.push_back(out_pos++);
    if (g < init.size() && labels.del_labels[g] == 0) ++out_pos;
  }
  return positions;
}

}  // namespace detail

inline void cmd_probe_subword(const ExperimentConfig& config) {
  if (config.max_rounds < 1) {
    throw ContractError("probe-subword needs at least one refinement round");
  }
  ExperimentData data = load_experiment_data(config);

  TsvWriter tsv(detail::out_path(config, "probe_subword.tsv"));
  tsv.header({"kind", "ratio", "sentences", "skipped", "pld_acc", "matched_mean",
              "matched_per_gap", "precision", "recall", "tok1_bleu_word", "tok1_bp",
              "final_bleu_word", "final_bp"});

  const std::vector<std::pair<ProbeKind, std::vector<double>>> grids = {
      {ProbeKind::kSubword, config.probe_ratios_word},
      {ProbeKind::kFullword, config.probe_ratios_word},
      {ProbeKind::kRandom, config.probe_ratios_random},
  };

  for (const auto& [kind, ratios] : grids) {
    for (double ratio : ratios) {
      const ProbeSet set = make_probe_set(data.targets, kind, ratio, config.seed, data.vocab);
      const TokenClass cls = kind == ProbeKind::kSubword    ? TokenClass::kSubword
                             : kind == ProbeKind::kFullword ? TokenClass::kFullword
                                                            : TokenClass::kAll;

      double acc_sum = 0.0;
      std::size_t acc_n = 0;
      double matched_sentence_sum = 0.0;
      std::size_t matched_total = 0, denom_gaps = 0;
      std::vector<FillToken> pred_fills, gold_fills;
      std::vector<Sentence> tok1_out, finals, refs;

      for (const Probe& probe : set.probes) {
        const Sentence& ref = data.targets[probe.sentence_id];
        DecodeOptions options;
        options.max_rounds = config.max_rounds;
        options.deletion_threshold = config.del_threshold;
        if (config.sample_iter2) options.sample_seed_iter2 = config.seed;
        options.init = probe.init;
        const DecodeTrace trace = decode(data.sources[probe.sentence_id], *data.policy,
                                         data.vocab, options, probe.sentence_id);

        const Sentence post_del = strip_sentinels(trace.stages[0].snapshot);
        const Sentence pld1 = strip_sentinels(trace.stages[1].snapshot);
        const Sentence tok1 = strip_sentinels(trace.stages[2].snapshot);

        // Gold per-gap counts/fills for the state the length head saw. If
        // round-1 deletion changed the init, re-derive from the script.
        std::vector<int> gold_counts = probe.gold_counts;
        std::vector<std::vector<TokenId>> gold_gap_fills = probe.gold_fills;
        std::vector<std::size_t> gold_ref_positions;
        if (post_del == probe.init) {
          // Dropped-token positions in the reference, gap by gap.
          std::size_t ref_pos = 0;
          for (std::size_t g = 0; g < gold_gap_fills.size(); ++g) {
            for (std::size_t k = 0; k < gold_gap_fills[g].size(); ++k) {
              gold_ref_positions.push_back(ref_pos++);
            }
            if (g < probe.init.size()) ++ref_pos;
          }
        } else {
          const EditLabels script = edit_labels_uncapped(post_del, ref);
          gold_counts.assign(script.ins_counts.begin(), script.ins_counts.end());
          for (int& c : gold_counts) c = std::min(c, kMaxInsert);
          gold_gap_fills.assign(gold_counts.size(), {});
          std::size_t fill_at = 0;
          for (std::size_t g = 0; g < gold_counts.size(); ++g) {
            for (int k = 0; k < script.ins_counts[g]; ++k) {
              gold_gap_fills[g].push_back(script.fill_tokens[fill_at++]);
            }
          }
          gold_ref_positions = detail::fill_output_positions(post_del, script);
        }

        const std::vector<int> pred_counts = detail::round1_gap_counts(post_del, pld1);
        if (config.pld_acc_nonzero) {
          if (const auto acc = pld_accuracy_nonzero(pred_counts, gold_counts)) {
            acc_sum += *acc;
            ++acc_n;
          }
        } else {
          acc_sum += pld_accuracy(pred_counts, gold_counts);
          ++acc_n;
        }

        const MatchedTokens match = matched_tokens(post_del, tok1, ref);
        matched_sentence_sum += static_cast<double>(match.matched);
        matched_total += match.matched;
        denom_gaps += config.match_denom_all_gaps ? match.gaps : match.gold_gaps;

        // Predicted fills classified in the round-1 output context.
        std::vector<std::size_t> fill_positions;
        for (std::size_t p = 0; p < pld1.size(); ++p) {
          if (pld1.ids[p] == kPld) fill_positions.push_back(p);
        }
        const auto pred_classified = classify_tokens(tok1, fill_positions);
        pred_fills.insert(pred_fills.end(), pred_classified.begin(), pred_classified.end());
        const auto gold_classified = classify_tokens(ref, gold_ref_positions);
        gold_fills.insert(gold_fills.end(), gold_classified.begin(), gold_classified.end());

        tok1_out.push_back(tok1);
        finals.push_back(trace.final);
        refs.push_back(ref);
      }

      const PrecisionRecall pr = fill_precision_recall(pred_fills, gold_fills, cls);
      BleuReport bleu_r1, bleu_final;
      if (!tok1_out.empty()) {
        bleu_r1 = bleu(tok1_out, refs, BleuLevel::kWord, data.vocab);
        bleu_final = bleu(finals, refs, BleuLevel::kWord, data.vocab);
      }
      const bool any = !set.probes.empty();
      tsv.row({probe_kind_name(kind), format_double(ratio, 2), std::to_string(set.probes.size()),
               std::to_string(set.skipped.size()),
               acc_n > 0 ? format_double(acc_sum / static_cast<double>(acc_n)) : "NA",
               any ? format_double(matched_sentence_sum / static_cast<double>(set.probes.size()))
                   : "NA",
               denom_gaps > 0 ? format_double(static_cast<double>(matched_total) /
                                              static_cast<double>(denom_gaps))
                              : "NA",
               detail::opt_str(pr.precision), detail::opt_str(pr.recall),
               any ? format_double(bleu_r1.score) : "NA",
               any ? format_double(bleu_r1.brevity_penalty, 3) : "NA",
               any ? format_double(bleu_final.score) : "NA",
               any ? format_double(bleu_final.brevity_penalty, 3) : "NA"});
    }
  }
  tsv.close();
}

// ---------------------------------------------------------------------------
// probe-deletion

inline void cmd_probe_deletion(const ExperimentConfig& config) {
  ExperimentData data = load_experiment_data(config);
  if (data.targets.size() < 2) {
    throw ContractError("probe-deletion needs at least two sentences");
  }

  const auto decode_with_inits =
      [&](const std::vector<Sentence>& inits) -> std::vector<DecodeTrace> {
    std::vector<DecodeTrace> traces;
    traces.reserve(inits.size());
    for (std::size_t i = 0; i < inits.size(); ++i) {
      DecodeOptions options;
      options.max_rounds = config.max_rounds;
      options.deletion_threshold = config.del_threshold;
      if (config.sample_iter2) options.sample_seed_iter2 = config.seed;
      options.init = inits[i];
      traces.push_back(decode(data.sources[i], *data.policy, data.vocab, options, i));
    }
    return traces;
  };

  const auto emit_table = [&](const std::string& file, const std::vector<DecodeTrace>& traces,
                              double init_len) {
    const auto views = detail::collect_stages(traces);
    const BleuReport report = bleu(views.finals, data.targets, BleuLevel::kBpe, data.vocab);
    TsvWriter tsv(detail::out_path(config, file));
    tsv.header({"iter_num", "init_len", "del1_len", "pld1_len", "pld2_len", "final_len",
                "final_bleu", "p1", "p2", "p3", "p4", "bp"});
    const auto tag_len = [&](const std::string& tag) {
      const auto* sentences = views.find(tag);
      return sentences ? detail::mean_length(*sentences) : 0.0;
    };
    tsv.row({format_double(views.mean_iterations, 2), format_double(init_len, 2),
             format_double(tag_len("del_1"), 2), format_double(tag_len("pld_1"), 2),
             format_double(tag_len("pld_2"), 2), format_double(detail::mean_length(views.finals), 2),
             format_double(report.score), format_double(report.precisions[0], 1),
             format_double(report.precisions[1], 1), format_double(report.precisions[2], 1),
             format_double(report.precisions[3], 1), format_double(report.brevity_penalty, 3)});
    tsv.close();
  };

  // No-accuracy: permuted references as initializations.
  {
    Rng rng = split_rng(config.seed, RngStream::kCorruptAccuracy, 0);
    const auto perm = corrupt_no_accuracy(data.targets.size(), rng);
    std::vector<Sentence> inits;
    inits.reserve(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inits.push_back(data.targets[perm[i]]);
    emit_table("deletion_no_accuracy.tsv", decode_with_inits(inits),
               detail::mean_length(inits));
  }

  // No-fluency: word-shuffled references as initializations.
  {
    std::vector<Sentence> inits;
    inits.reserve(data.targets.size());
    for (std::size_t i = 0; i < data.targets.size(); ++i) {
      Rng rng = split_rng(config.seed, RngStream::kCorruptFluency, i);
      inits.push_back(corrupt_no_fluency(data.targets[i], rng));
    }
    emit_table("deletion_no_fluency.tsv", decode_with_inits(inits),
               detail::mean_length(inits));
  }

  // Threshold sweep.
  {
    TsvWriter tsv(detail::out_path(config, "deletion_threshold.tsv"));
    tsv.header({"tau", "del1_len", "del2_len", "final_len", "final_bleu", "bp"});
    for (double tau = config.tau_min; tau <= config.tau_max + 1e-9; tau += config.tau_step) {
      std::vector<DecodeTrace> traces;
      traces.reserve(data.sources.size());
      for (std::size_t i = 0; i < data.sources.size(); ++i) {
        DecodeOptions options = detail::base_decode_options(config, data, i);
        options.deletion_threshold = tau;
        traces.push_back(decode(data.sources[i], *data.policy, data.vocab, options, i));
      }
      const auto views = detail::collect_stages(traces);
      const BleuReport report = bleu(views.finals, data.targets, BleuLevel::kBpe, data.vocab);
      const auto tag_len = [&](const std::string& tag) {
        const auto* sentences = views.find(tag);
        return sentences ? detail::mean_length(*sentences) : 0.0;
      };
      tsv.row({format_double(tau, 2), format_double(tag_len("del_1"), 2),
               format_double(tag_len("del_2"), 2),
               format_double(detail::mean_length(views.finals), 2), format_double(report.score),
               format_double(report.brevity_penalty, 3)});
    }
    tsv.close();
  }
}

// ---------------------------------------------------------------------------
// corrupt

inline void cmd_corrupt(const ExperimentConfig& config, const std::string& mode) {
  const auto lines = detail::read_token_lines(config.tgt_path);
  const std::string path = detail::out_path(config, "corrupt_" + mode + ".txt");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write file: " + path);

  const auto write_line = [&](const std::vector<std::string>& tokens) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) out << ' ';
      out << tokens[i];
    }
    out << '\n';
  };

  if (mode == "no-accuracy") {
    if (lines.size() < 2) throw ContractError("corrupt no-accuracy needs at least two sentences");
    Rng rng = split_rng(config.seed, RngStream::kCorruptAccuracy, 0);
    const auto perm = corrupt_no_accuracy(lines.size(), rng);
    for (std::size_t i = 0; i < lines.size(); ++i) write_line(lines[perm[i]]);
  } else if (mode == "no-fluency") {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      Rng rng = split_rng(config.seed, RngStream::kCorruptFluency, i);
      // Word units by surface continuation marker; groups move together.
      std::vector<std::vector<std::string>> groups;
      for (const auto& token : lines[i]) {
        if (groups.empty() || !surface_continues(groups.back().back())) groups.emplace_back();
        groups.back().push_back(token);
      }
      rng.shuffle(groups);
      std::vector<std::string> flat;
      for (const auto& g : groups) flat.insert(flat.end(), g.begin(), g.end());
      write_line(flat);
    }
  } else {
    throw ContractError("unknown corrupt mode: " + mode);
  }
  out.close();
  if (out.fail()) throw FormatError("failed writing file: " + path);
}

// ---------------------------------------------------------------------------
// report

inline void cmd_report(const ExperimentConfig& config) {
  ExperimentData data = load_experiment_data(config, /*need_policy=*/false);
  const SubwordStats sub = subword_stats(data.targets);
  const RatioModel ratio = fit_ratio(data.corpus, data.vocab);
  std::optional<LinRegModel> linreg;
  try {
    linreg = fit_linreg(data.corpus, data.vocab);
  } catch (const DegenerateDesignError&) {
  }

  TsvWriter tsv(detail::out_path(config, "report.tsv"));
  tsv.header({"pairs", "vocab_size", "mean_src_len", "mean_tgt_len", "sub_ratio", "sub_num",
              "tok_num", "ratio", "coef", "intercept", "r2"});
  tsv.row({std::to_string(data.corpus.size()), std::to_string(data.vocab.size()),
           format_double(detail::mean_length(data.sources), 2),
           format_double(detail::mean_length(data.targets), 2), format_double(sub.sub_ratio, 3),
           format_double(sub.mean_sub_count, 2), format_double(sub.mean_tok_count, 2),
           format_double(ratio.ratio, 6), linreg ? format_double(linreg->coef, 6) : "NA",
           linreg ? format_double(linreg->intercept, 6) : "NA",
           linreg ? format_double(linreg->r_squared, 6) : "NA"});
  tsv.close();
}

}  // namespace levdec
