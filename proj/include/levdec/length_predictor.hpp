#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "levdec/corpus.hpp"
#include "levdec/errors.hpp"
#include "levdec/sentence.hpp"

namespace levdec {

// Mean of per-pair target/source length ratios (BPE token level).
struct RatioModel {
  double ratio = 1.0;
};

// Ordinary least squares of target length on source length.
struct LinRegModel {
  double coef = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

enum class LengthPredictor { kSrcLen, kRatio, kLinReg, kOracle };

inline LengthPredictor length_predictor_from_name(const std::string& name) {
  if (name == "srclen") return LengthPredictor::kSrcLen;
  if (name == "ratio") return LengthPredictor::kRatio;
  if (name == "linreg") return LengthPredictor::kLinReg;
  if (name == "tgtlen") return LengthPredictor::kOracle;
  throw ContractError("unknown length predictor: " + name);
}

inline RatioModel fit_ratio(const ParallelCorpus& corpus, const Vocab& vocab) {
  if (corpus.size() == 0) throw ContractError("fit_ratio: empty corpus");
  double sum = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const double src_len = static_cast<double>(corpus.source(i, vocab).size());
    if (src_len <= 0.0) throw ContractError("fit_ratio: source sentence with zero length");
    sum += static_cast<double>(corpus.target(i, vocab).size()) / src_len;
  }
  return RatioModel{sum / static_cast<double>(corpus.size())};
}

inline LinRegModel fit_linreg(const ParallelCorpus& corpus, const Vocab& vocab) {
  const std::size_t n = corpus.size();
  if (n < 2) throw ContractError("fit_linreg: need at least two pairs");
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += static_cast<double>(corpus.source(i, vocab).size());
    sy += static_cast<double>(corpus.target(i, vocab).size());
  }
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(corpus.source(i, vocab).size()) - mx;
    const double dy = static_cast<double>(corpus.target(i, vocab).size()) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DegenerateDesignError("fit_linreg: all source lengths equal");
  LinRegModel model;
  model.coef = sxy / sxx;
  model.intercept = my - model.coef * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(corpus.source(i, vocab).size());
    const double y = static_cast<double>(corpus.target(i, vocab).size());
    const double e = y - (model.coef * x + model.intercept);
    ss_res += e * e;
  }
  model.r_squared = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return model;
}

// Predicted first-iteration length: rounded to the nearest integer (half
// away from zero) and clamped to the placeholder head's class range.
inline int predict_length(LengthPredictor kind, const Sentence& source,
                          const std::optional<RatioModel>& ratio = std::nullopt,
                          const std::optional<LinRegModel>& linreg = std::nullopt,
                          const Sentence* reference = nullptr) {
  double raw = 0.0;
  switch (kind) {
    case LengthPredictor::kSrcLen:
      raw = static_cast<double>(source.size());
      break;
    case LengthPredictor::kRatio:
      if (!ratio) throw ContractError("predict_length: ratio model missing");
      raw = ratio->ratio * static_cast<double>(source.size());
      break;
    case LengthPredictor::kLinReg:
      if (!linreg) throw ContractError("predict_length: regression model missing");
      raw = linreg->coef * static_cast<double>(source.size()) + linreg->intercept;
      break;
    case LengthPredictor::kOracle:
      if (!reference) throw ContractError("predict_length: oracle needs a reference");
      raw = static_cast<double>(reference->size());
      break;
  }
  const double rounded = std::round(raw);
  const double clamped = std::min(std::max(rounded, 1.0), static_cast<double>(kMaxInsert));
  return static_cast<int>(clamped);
}

}  // namespace levdec
