#include "llmdet/metrics.hpp"

#include <algorithm>
#include <json.hpp>
#include <numeric>

#include "llmdet/error.hpp"

namespace llmdet {

double f1(double precision, double recall) {
  const double s = precision + recall;
  return s > 0 ? 2.0 * precision * recall / s : 0.0;
}

double f1_macro(std::span<const double> per_class_f1) {
  if (per_class_f1.empty()) throw Error("F1-Macro of an empty class list");
  return std::accumulate(per_class_f1.begin(), per_class_f1.end(), 0.0) /
         static_cast<double>(per_class_f1.size());
}

double recall_at_k(std::span<const std::vector<std::size_t>> rankings,
                   std::span<const std::size_t> labels, std::size_t k) {
  if (k == 0) throw Error("k must be at least 1");
  if (rankings.size() != labels.size()) throw Error("rankings and labels differ in length");
  if (rankings.empty()) throw Error("nothing to evaluate");
  std::size_t hits = 0;
  for (std::size_t j = 0; j < rankings.size(); ++j) {
    const auto& r = rankings[j];
    const auto top = std::min(k, r.size());
    hits += std::find(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(top), labels[j]) !=
            r.begin() + static_cast<std::ptrdiff_t>(top);
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double efficiency_ratio(double f1_value, double f1_ref, double time_s, double time_ref_s) {
  if (!(f1_value > 0 && f1_ref > 0 && time_s > 0 && time_ref_s > 0)) {
    throw Error("efficiency ratio inputs must be positive");
  }
  return (f1_value / f1_ref) * (time_ref_s / time_s);
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= n_ || predicted >= n_) throw Error("class index outside confusion matrix");
  ++counts_[truth * n_ + predicted];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < n_; ++i) t += at(i, i);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t t = 0;
  for (std::size_t j = 0; j < n_; ++j) t += at(truth, j);
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < n_; ++i) t += at(i, predicted);
  return t;
}

std::string ConfusionMatrix::to_csv(std::span<const std::string> names) const {
  std::string out = "truth\\predicted";
  for (std::size_t j = 0; j < n_; ++j) out += "," + (j < names.size() ? names[j] : std::to_string(j));
  out += "\n";
  for (std::size_t i = 0; i < n_; ++i) {
    out += i < names.size() ? names[i] : std::to_string(i);
    for (std::size_t j = 0; j < n_; ++j) out += "," + std::to_string(at(i, j));
    out += "\n";
  }
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["source_names"] = source_names;
  auto per = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < per_class.size(); ++i) {
    per.push_back({{"source", source_names[i]},
                   {"precision", per_class[i].precision},
                   {"recall", per_class[i].recall},
                   {"f1", per_class[i].f1}});
  }
  j["per_class"] = per;
  j["f1_macro"] = f1_macro;
  nlohmann::ordered_json r;
  for (const auto& [k, v] : r_at) r["R@" + std::to_string(k)] = v;
  j["r_at"] = r;
  j["wall_time_s"] = wall_time_s;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < confusion.classes(); ++a) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < confusion.classes(); ++b) row.push_back(confusion.at(a, b));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j.dump(2) + "\n";
}

EvalReport evaluate(std::span<const std::vector<std::size_t>> rankings,
                    std::span<const std::size_t> labels, std::vector<std::string> source_names,
                    double wall_time_s) {
  if (rankings.size() != labels.size()) throw Error("results and labels differ in length");
  if (rankings.empty()) throw Error("nothing to evaluate");
  const std::size_t C = source_names.size();
  EvalReport rep;
  rep.source_names = std::move(source_names);
  rep.confusion = ConfusionMatrix(C);
  for (std::size_t j = 0; j < rankings.size(); ++j) {
    if (rankings[j].empty()) throw Error("empty ranking");
    rep.confusion.add(labels[j], rankings[j].front());
  }
  std::vector<double> f1s;
  for (std::size_t i = 0; i < C; ++i) {
    const auto tp = static_cast<double>(rep.confusion.at(i, i));
    const auto predicted = static_cast<double>(rep.confusion.col_sum(i));
    const auto actual = static_cast<double>(rep.confusion.row_sum(i));
    ClassScores s;
    s.precision = predicted > 0 ? tp / predicted : 0.0;
    s.recall = actual > 0 ? tp / actual : 0.0;
    s.f1 = f1(s.precision, s.recall);
    rep.per_class.push_back(s);
    f1s.push_back(s.f1);
  }
  rep.f1_macro = f1_macro(f1s);
  for (std::size_t k : {1, 2, 3}) rep.r_at[k] = recall_at_k(rankings, labels, k);
  rep.wall_time_s = wall_time_s;
  return rep;
}

EvalReport evaluate(std::span<const DetectionResult> results, std::span<const std::size_t> labels,
                    std::vector<std::string> source_names, double wall_time_s) {
  std::vector<std::vector<std::size_t>> rankings;
  rankings.reserve(results.size());
  for (const auto& r : results) rankings.push_back(r.ranking());
  return evaluate(rankings, labels, std::move(source_names), wall_time_s);
}

}  // namespace llmdet
