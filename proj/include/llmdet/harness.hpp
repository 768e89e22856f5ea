#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "llmdet/classifier.hpp"
#include "llmdet/detection.hpp"
#include "llmdet/dictionary.hpp"
#include "llmdet/metrics.hpp"
#include "llmdet/provider.hpp"
#include "llmdet/tokenizer.hpp"

namespace llmdet {

// Where a source's texts come from. Exactly one of corpus / command / tcp is set.
struct SourceSpec {
  std::string name;
  std::string corpus;   // "builtin:<topic>" or a text file; trains an n-gram LM
  std::string command;  // external provider over stdio
  std::string tcp;      // external provider at host:port
};

struct ExperimentConfig {
  SourceSpec human{"human", "builtin:human", "", ""};
  std::vector<SourceSpec> sources;
  std::string prompt_corpus;  // defaults to the human corpus
  std::string vocab_path;     // built from the corpora when empty
  std::size_t vocab_size = 5000;
  std::size_t builtin_docs = 20000;

  std::size_t prompt_len = 5;
  std::size_t samples_per_source = 200;
  double split = 0.5;             // statistical share of each source's texts
  double classifier_split = 0.5;  // training share of the validation texts
  std::size_t gen_len = 40;
  double temperature = 1.0;

  int n_max = 4;
  std::map<int, std::size_t> k_per_level{{2, 100000}, {3, 100000}, {4, 100000}};
  std::map<int, std::size_t> K_per_level{{2, 2000}, {3, 100}, {4, 100}};
  bool quantize = false;

  int lm_order = 3;
  double lm_alpha = 0.1;
  TrainConfig classifier;
  std::uint64_t seed = 42;

  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
};

enum class Role { kStatistical, kTrain, kEval };

struct LabeledText {
  TokenSequence tokens;
  std::size_t label = 0;
  Role role = Role::kStatistical;
  std::optional<TokenSequence> prompt;  // generated texts only
  std::uint64_t seed = 0;               // generation seed for generated texts
};

// First prompt_len tokens (normalized as by the tokenizer) of each nonempty
// text, joined with single spaces.
std::vector<std::string> make_prompts(std::span<const std::string> texts, std::size_t prompt_len);

// Each whitespace-delimited word dropped independently with probability
// rate; at least one word survives a nonempty input. rate 0 returns the
// input unchanged.
std::string perturb_delete(const std::string& text, double rate, std::uint64_t seed);
TokenSequence perturb_delete(const TokenSequence& tokens, double rate, std::uint64_t seed);

// Statistical count for a source with n texts.
std::size_t statistical_count(std::size_t n, double split);

// Everything a run produces. Providers are kept so sweeps can re-query or
// re-generate.
struct Experiment {
  ExperimentConfig config;
  std::shared_ptr<const Vocabulary> vocab;
  std::vector<std::string> source_names;  // index 0 = human
  std::vector<std::unique_ptr<ProbabilityProvider>> providers;  // parallel to source_names
  std::vector<LabeledText> texts;
  std::vector<NgramDictionary> dicts;
  ClassifierModel classifier;

  std::vector<TokenSequence> texts_with_role(Role role, std::size_t label) const;
  // Evaluation texts and their labels, in corpus order.
  std::vector<TokenSequence> eval_texts() const;
  std::vector<std::size_t> eval_labels() const;
};

// Generates, splits, builds dictionaries, and trains the classifier.
Experiment build_experiment(const ExperimentConfig& config);

// Rebuilds dictionaries from the statistical texts with the given options.
void rebuild_dictionaries(Experiment& exp, const BuildOptions& options);
// Re-extracts training features and retrains the classifier.
void retrain_classifier(Experiment& exp);

// Runs detection on the evaluation texts and scores it.
EvalReport evaluate_experiment(const Experiment& exp);
EvalReport evaluate_texts(const Experiment& exp, std::span<const TokenSequence> texts,
                          std::span<const std::size_t> labels);

enum class SweepAxis { kNMax, kTopK, kTemperature, kDeleteRate };
SweepAxis parse_sweep_axis(const std::string& s);
std::string to_string(SweepAxis axis);

struct SweepRow {
  double value = 0.0;
  EvalReport report;
  std::optional<std::uint64_t> dict_bytes;  // serialized size of all dictionaries
};

// One report per value. n_max and K rebuild dictionaries (K applies to the
// 2-gram level) and retrain; temperature re-generates the model-source
// evaluation texts; delete_rate perturbs the evaluation texts.
std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepAxis axis,
                            std::span<const double> values);
std::vector<SweepRow> sweep(const Experiment& base, SweepAxis axis, std::span<const double> values);

std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows);

struct BenchResult {
  std::size_t count = 0;
  int threads = 1;
  double serial_wall_time_s = 0.0;
  double parallel_wall_time_s = 0.0;
  double serial_texts_per_second = 0.0;
  double parallel_texts_per_second = 0.0;
  std::string to_json() const;
};

// Times detection over all texts single-threaded and with every available thread.
BenchResult bench_detect(std::span<const TokenSequence> texts, const Vocabulary& vocab,
                         std::span<const NgramDictionary> dicts, const ClassifierModel& classifier);

}  // namespace llmdet
