#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "llmdet/detection.hpp"

namespace llmdet {

// Rates are fractions in [0, 1]; percentages only appear when formatting.

// Harmonic mean; 0 when p + r = 0.
double f1(double precision, double recall);

// Unweighted mean. Throws on an empty list.
double f1_macro(std::span<const double> per_class_f1);

// Fraction of texts whose label is among the first k ranked sources.
double recall_at_k(std::span<const std::vector<std::size_t>> rankings,
                   std::span<const std::size_t> labels, std::size_t k);

// (f1 / f1_ref) * (time_ref / time). Every input must be positive.
double efficiency_ratio(double f1, double f1_ref, double time_s, double time_ref_s);

// Rows are ground truth, columns are top-1 predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : n_(classes), counts_(classes * classes, 0) {}

  void add(std::size_t truth, std::size_t predicted);
  std::size_t classes() const noexcept { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t predicted) const;

  std::string to_csv(std::span<const std::string> names) const;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<std::string> source_names;
  std::vector<ClassScores> per_class;
  double f1_macro = 0.0;
  std::map<std::size_t, double> r_at;  // k -> R@k for k = 1, 2, 3
  double wall_time_s = 0.0;
  ConfusionMatrix confusion;

  std::string to_json() const;
};

// Undefined precision/recall/F1 (zero denominators) are reported as 0.
EvalReport evaluate(std::span<const std::vector<std::size_t>> rankings,
                    std::span<const std::size_t> labels, std::vector<std::string> source_names,
                    double wall_time_s = 0.0);

EvalReport evaluate(std::span<const DetectionResult> results, std::span<const std::size_t> labels,
                    std::vector<std::string> source_names, double wall_time_s = 0.0);

}  // namespace llmdet
