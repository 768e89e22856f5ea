#pragma once

#include <span>
#include <string>
#include <vector>

#include "llmdet/dictionary.hpp"
#include "llmdet/tokenizer.hpp"

namespace llmdet {

class ClassifierModel;

struct ProxyPerplexity {
  double ppl = 0.0;
  double scored_fraction = 0.0;
};

// Proxy perplexities of one text, one per source dictionary (index 0 = human).
struct FeatureVector {
  std::vector<double> ppl;
  std::vector<double> scored_fraction;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct RankedSource {
  std::size_t index = 0;
  std::string name;
  double prob = 0.0;
};

struct DetectionResult {
  std::vector<RankedSource> ranked;  // probability descending, index ascending on ties
  FeatureVector features;
  std::size_t text_len = 0;

  std::size_t top() const { return ranked.front().index; }
  // Source indices in rank order.
  std::vector<std::size_t> ranking() const;
};

// Average -ln p over positions scored by the longest matching context
// (n_max-1 tokens down to 1). Unmatched positions are skipped; 0 when none
// match. Throws Error("empty text") on an empty sequence.
ProxyPerplexity proxy_perplexity(const TokenSequence& text, const NgramDictionary& dict);

FeatureVector extract_features(const TokenSequence& text, std::span<const NgramDictionary> dicts);

// Batch feature extraction, parallel over texts (OpenMP). Output order
// matches input order regardless of thread count.
std::vector<FeatureVector> extract_features_batch(std::span<const TokenSequence> texts,
                                                  std::span<const NgramDictionary> dicts);

// Single-threaded reference for extract_features_batch.
std::vector<FeatureVector> extract_features_batch_serial(std::span<const TokenSequence> texts,
                                                         std::span<const NgramDictionary> dicts);

inline constexpr double kProbabilityFloor = 1e-12;

// ln(max(p_i, floor)) + (1/L) ln(1/(c+1)), with c+1 = p.size().
std::vector<double> smooth(std::span<const double> probs, std::size_t text_len);

// Max-shifted softmax, then ranked.
DetectionResult softmax_rank(std::span<const double> smoothed,
                             std::span<const std::string> source_names);

// Tokenizer, dictionaries, and classifier bundled for repeated detection.
class Detector {
 public:
  Detector(const Vocabulary& vocab, std::span<const NgramDictionary> dicts,
           const ClassifierModel& classifier);

  DetectionResult detect(std::string_view text) const;
  DetectionResult detect(const TokenSequence& tokens) const;

  std::size_t source_count() const noexcept { return dicts_.size(); }

 private:
  const Vocabulary& vocab_;
  std::span<const NgramDictionary> dicts_;
  const ClassifierModel& classifier_;
};

// Batch detection, parallel over texts (OpenMP); order matches input.
std::vector<DetectionResult> detect_batch(const Detector& detector,
                                          std::span<const TokenSequence> texts);
// Single-threaded reference for detect_batch.
std::vector<DetectionResult> detect_batch_serial(const Detector& detector,
                                                 std::span<const TokenSequence> texts);

// Throws Error("empty text") when the text has no tokens.
DetectionResult detect(std::string_view text, const Vocabulary& vocab,
                       std::span<const NgramDictionary> dicts, const ClassifierModel& classifier);

// Validates that every dictionary is bound to vocab.
void check_vocab_binding(const Vocabulary& vocab, std::span<const NgramDictionary> dicts);

}  // namespace llmdet
