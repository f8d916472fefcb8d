#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "levdec/edit.hpp"
#include "levdec/engine.hpp"
#include "levdec/errors.hpp"
#include "levdec/sentence.hpp"

namespace levdec {

// Fixed-precision formatting keeps TSV output byte-stable across runs.
inline std::string format_double(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// Tab-separated report with a header row and stable column order.
class TsvWriter {
public:
  explicit TsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw FormatError("cannot write file: " + path);
    path_ = path;
  }

  void header(const std::vector<std::string>& columns) { row(columns); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << '\t';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (out_.fail()) throw FormatError("failed writing file: " + path_);
  }

private:
  std::ofstream out_;
  std::string path_;
};

// One trace as a single JSON line:
// {"id":..,"stages":[{"tag":..,"tokens":[..]}],"rounds":..,"termination":..,"final":..}
inline std::string trace_to_json_line(const DecodeTrace& trace, std::size_t sentence_id,
                                      const Vocab& vocab) {
  nlohmann::json j;
  j["id"] = sentence_id;
  auto stages = nlohmann::json::array();
  for (const auto& stage : trace.stages) {
    nlohmann::json s;
    s["tag"] = stage.tag();
    auto tokens = nlohmann::json::array();
    for (TokenId id : stage.snapshot.ids) tokens.push_back(vocab.surface_of(id));
    s["tokens"] = std::move(tokens);
    stages.push_back(std::move(s));
  }
  j["stages"] = std::move(stages);
  j["rounds"] = trace.iterations;
  j["termination"] = trace.termination == Termination::kFixpoint ? "fixpoint" : "max_rounds";
  j["final"] = sentence_surface(trace.final, vocab);
  return j.dump();
}

// One supervision triple as a JSON line with fields rollin, del_labels,
// ins_counts, fills.
inline std::string edit_labels_to_json_line(const Sentence& rollin, const EditLabels& labels,
                                            const Vocab& vocab) {
  nlohmann::json j;
  auto rollin_tokens = nlohmann::json::array();
  for (TokenId id : rollin.ids) rollin_tokens.push_back(vocab.surface_of(id));
  j["rollin"] = std::move(rollin_tokens);
  j["del_labels"] = labels.del_labels;
  j["ins_counts"] = labels.ins_counts;
  auto fills = nlohmann::json::array();
  for (TokenId id : labels.fill_tokens) fills.push_back(vocab.surface_of(id));
  j["fills"] = std::move(fills);
  return j.dump();
}

}  // namespace levdec
