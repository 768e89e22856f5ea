#include "llmdet/detection.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "llmdet/classifier.hpp"
#include "llmdet/error.hpp"

namespace llmdet {

std::vector<std::size_t> DetectionResult::ranking() const {
  std::vector<std::size_t> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.index);
  return out;
}

ProxyPerplexity proxy_perplexity(const TokenSequence& text, const NgramDictionary& dict) {
  if (text.empty()) throw Error("empty text");
  const std::span<const TokenId> ids(text.ids);
  const auto max_ctx = static_cast<std::size_t>(dict.n_max() - 1);
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    for (std::size_t len = std::min(i, max_ctx); len >= 1; --len) {
      if (auto p = dict.lookup(ids.subspan(i - len, len), ids[i])) {
        sum -= std::log(*p);
        ++scored;
        break;
      }
    }
  }
  ProxyPerplexity out;
  if (scored) out.ppl = sum / static_cast<double>(scored);
  if (ids.size() > 1) out.scored_fraction = static_cast<double>(scored) / static_cast<double>(ids.size() - 1);
  return out;
}

FeatureVector extract_features(const TokenSequence& text, std::span<const NgramDictionary> dicts) {
  FeatureVector f;
  f.ppl.reserve(dicts.size());
  f.scored_fraction.reserve(dicts.size());
  for (const auto& d : dicts) {
    auto pp = proxy_perplexity(text, d);
    f.ppl.push_back(pp.ppl);
    f.scored_fraction.push_back(pp.scored_fraction);
  }
  return f;
}

std::vector<FeatureVector> extract_features_batch_serial(std::span<const TokenSequence> texts,
                                                         std::span<const NgramDictionary> dicts) {
  std::vector<FeatureVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(extract_features(t, dicts));
  return out;
}

std::vector<FeatureVector> extract_features_batch(std::span<const TokenSequence> texts,
                                                  std::span<const NgramDictionary> dicts) {
  std::vector<FeatureVector> out(texts.size());
  std::exception_ptr failure;
  std::ptrdiff_t failed_at = -1;
  const auto count = static_cast<std::ptrdiff_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = extract_features(texts[static_cast<std::size_t>(i)], dicts);
    } catch (...) {
#pragma omp critical(llmdet_feature_failure)
      if (failed_at < 0 || i < failed_at) {
        failed_at = i;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<double> smooth(std::span<const double> probs, std::size_t text_len) {
  if (probs.empty()) throw Error("cannot smooth an empty probability vector");
  if (text_len == 0) throw Error("empty text");
  const double shift = std::log(1.0 / static_cast<double>(probs.size())) / static_cast<double>(text_len);
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = std::log(std::max(probs[i], kProbabilityFloor)) + shift;
  }
  return out;
}

DetectionResult softmax_rank(std::span<const double> smoothed,
                             std::span<const std::string> source_names) {
  if (smoothed.empty()) throw Error("cannot rank an empty vector");
  if (smoothed.size() != source_names.size()) throw Error("score and source-name counts differ");
  const double mx = *std::max_element(smoothed.begin(), smoothed.end());
  if (!std::isfinite(mx)) throw Error("non-finite score");
  std::vector<double> e(smoothed.size());
  double total = 0.0;
  for (std::size_t i = 0; i < smoothed.size(); ++i) {
    if (!std::isfinite(smoothed[i])) throw Error("non-finite score");
    e[i] = std::exp(smoothed[i] - mx);
    total += e[i];
  }
  DetectionResult r;
  r.ranked.reserve(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) r.ranked.push_back({i, source_names[i], e[i] / total});
  std::stable_sort(r.ranked.begin(), r.ranked.end(),
                   [](const RankedSource& a, const RankedSource& b) { return a.prob > b.prob; });
  return r;
}

void check_vocab_binding(const Vocabulary& vocab, std::span<const NgramDictionary> dicts) {
  for (const auto& d : dicts) {
    if (d.vocab_hash() != vocab.hash()) {
      throw Error("dictionary '" + d.source_name() + "' was built for a different vocabulary");
    }
  }
}

Detector::Detector(const Vocabulary& vocab, std::span<const NgramDictionary> dicts,
                   const ClassifierModel& classifier)
    : vocab_(vocab), dicts_(dicts), classifier_(classifier) {
  if (dicts.empty()) throw Error("no dictionaries loaded");
  check_vocab_binding(vocab, dicts);
  if (classifier.num_classes() != dicts.size()) {
    throw Error("classifier has " + std::to_string(classifier.num_classes()) +
                " classes but " + std::to_string(dicts.size()) + " dictionaries are loaded");
  }
  for (std::size_t i = 0; i < dicts.size(); ++i) {
    if (classifier.source_names()[i] != dicts[i].source_name()) {
      throw Error("dictionary " + std::to_string(i) + " is '" + dicts[i].source_name() +
                  "' but the classifier expects '" + classifier.source_names()[i] + "'");
    }
  }
}

DetectionResult Detector::detect(std::string_view text) const {
  return detect(tokenize(text, vocab_));
}

DetectionResult Detector::detect(const TokenSequence& tokens) const {
  if (tokens.empty()) throw Error("empty text");
  FeatureVector features = extract_features(tokens, dicts_);
  const auto probs = classifier_.predict_proba(features.ppl);
  DetectionResult r = softmax_rank(smooth(probs, tokens.size()), classifier_.source_names());
  r.features = std::move(features);
  r.text_len = tokens.size();
  return r;
}

std::vector<DetectionResult> detect_batch_serial(const Detector& detector,
                                                 std::span<const TokenSequence> texts) {
  std::vector<DetectionResult> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(detector.detect(t));
  return out;
}

std::vector<DetectionResult> detect_batch(const Detector& detector,
                                          std::span<const TokenSequence> texts) {
  std::vector<DetectionResult> out(texts.size());
  std::exception_ptr failure;
  std::ptrdiff_t failed_at = -1;
  const auto count = static_cast<std::ptrdiff_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = detector.detect(texts[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical(llmdet_detect_failure)
      if (failed_at < 0 || i < failed_at) {
        failed_at = i;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

DetectionResult detect(std::string_view text, const Vocabulary& vocab,
                       std::span<const NgramDictionary> dicts, const ClassifierModel& classifier) {
  return Detector(vocab, dicts, classifier).detect(text);
}

}  // namespace llmdet
