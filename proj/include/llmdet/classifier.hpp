#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace llmdet {

struct LabeledFeature {
  std::vector<double> features;
  std::size_t label = 0;
};

enum class ClassifierKind { kSoftmaxRegression, kBoostedStumps };

std::string to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(const std::string& s);

struct TrainConfig {
  ClassifierKind kind = ClassifierKind::kSoftmaxRegression;
  std::size_t epochs = 2000;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  // Both kinds are deterministic without it; kept so models record the run seed.
  std::uint64_t seed = 0;
};

struct Stump {
  std::size_t feature = 0;
  double threshold = 0.0;  // x < threshold goes left
  double left = 0.0;
  double right = 0.0;
};

// Multiclass model mapping proxy-perplexity vectors to per-source
// probabilities. Features are z-scored with training statistics first.
class ClassifierModel {
 public:
  ClassifierModel() = default;

  ClassifierKind kind() const noexcept { return kind_; }
  const std::vector<std::string>& source_names() const noexcept { return source_names_; }
  std::size_t num_classes() const noexcept { return source_names_.size(); }
  std::size_t num_features() const noexcept { return mean_.size(); }

  // Probability vector of length num_classes(); throws on dimension mismatch.
  std::vector<double> predict_proba(std::span<const double> features) const;

  std::string to_json() const;
  static ClassifierModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static ClassifierModel load(const std::string& path);

  // Softmax regression with all-zero parameters (uniform output).
  static ClassifierModel zero_softmax(std::vector<std::string> source_names, std::size_t num_features);

 private:
  friend ClassifierModel train_classifier(std::span<const LabeledFeature>, const TrainConfig&,
                                          std::vector<std::string>, std::vector<double>*);

  std::vector<double> standardize(std::span<const double> x) const;

  ClassifierKind kind_ = ClassifierKind::kSoftmaxRegression;
  TrainConfig config_;
  std::vector<std::string> source_names_;
  std::vector<double> mean_;
  std::vector<double> stddev_;
  // softmax regression: weights_ is classes x features, row-major
  std::vector<double> weights_;
  std::vector<double> bias_;
  // boosted stumps: bias_ holds the per-class base score
  std::vector<std::vector<Stump>> stumps_;
};

// Labels index into source_names. loss_history, when given, receives the
// training objective before every update (softmax) or every round (stumps).
// Throws Error("degenerate labels") when fewer than two classes are present.
ClassifierModel train_classifier(std::span<const LabeledFeature> data, const TrainConfig& config,
                                 std::vector<std::string> source_names,
                                 std::vector<double>* loss_history = nullptr);

}  // namespace llmdet
