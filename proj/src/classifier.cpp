#include "llmdet/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "llmdet/error.hpp"

namespace llmdet {

using json = nlohmann::json;

std::string to_string(ClassifierKind kind) {
  return kind == ClassifierKind::kBoostedStumps ? "boosted_stumps" : "softmax_regression";
}

ClassifierKind parse_classifier_kind(const std::string& s) {
  if (s == "softmax_regression") return ClassifierKind::kSoftmaxRegression;
  if (s == "boosted_stumps") return ClassifierKind::kBoostedStumps;
  throw Error("unknown classifier kind '" + s + "'");
}

namespace {

// In-place softmax over logits, max-shifted.
void softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : z) v /= total;
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_num(const json& j) {
  if (!j.is_string()) throw Error("model parameters must be decimal strings");
  const auto s = j.get<std::string>();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw Error("bad number '" + s + "' in model file");
  return v;
}

json num_array(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> parse_num_array(const json& j) {
  if (!j.is_array()) throw Error("expected an array in model file");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(parse_num(e));
  return out;
}

}  // namespace

std::vector<double> ClassifierModel::standardize(std::span<const double> x) const {
  if (x.size() != mean_.size()) {
    throw Error("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                std::to_string(mean_.size()));
  }
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean_[j]) / stddev_[j];
  return z;
}

std::vector<double> ClassifierModel::predict_proba(std::span<const double> features) const {
  const auto z = standardize(features);
  const std::size_t C = num_classes();
  const std::size_t D = num_features();
  std::vector<double> out(C);
  if (kind_ == ClassifierKind::kSoftmaxRegression) {
    for (std::size_t k = 0; k < C; ++k) {
      double s = bias_[k];
      for (std::size_t j = 0; j < D; ++j) s += weights_[k * D + j] * z[j];
      out[k] = s;
    }
  } else {
    // One-vs-rest sigmoids normalized to sum to one, computed in log space.
    for (std::size_t k = 0; k < C; ++k) {
      double raw = bias_[k];
      for (const auto& st : stumps_[k]) raw += z[st.feature] < st.threshold ? st.left : st.right;
      out[k] = log_sigmoid(raw);
    }
  }
  softmax_inplace(out);
  return out;
}

ClassifierModel ClassifierModel::zero_softmax(std::vector<std::string> source_names,
                                              std::size_t num_features) {
  ClassifierModel m;
  m.kind_ = ClassifierKind::kSoftmaxRegression;
  m.source_names_ = std::move(source_names);
  m.mean_.assign(num_features, 0.0);
  m.stddev_.assign(num_features, 1.0);
  m.weights_.assign(m.source_names_.size() * num_features, 0.0);
  m.bias_.assign(m.source_names_.size(), 0.0);
  return m;
}

std::string ClassifierModel::to_json() const {
  json j;
  j["kind"] = to_string(kind_);
  j["source_names"] = source_names_;
  j["standardizer"] = {{"mean", num_array(mean_)}, {"std", num_array(stddev_)}};
  j["train_config"] = {{"epochs", config_.epochs},
                       {"learning_rate", num(config_.learning_rate)},
                       {"l2", num(config_.l2)},
                       {"seed", config_.seed}};
  const std::size_t D = num_features();
  if (kind_ == ClassifierKind::kSoftmaxRegression) {
    json w = json::array();
    for (std::size_t k = 0; k < num_classes(); ++k) {
      w.push_back(num_array(std::span<const double>(weights_).subspan(k * D, D)));
    }
    j["weights"] = w;
    j["bias"] = num_array(bias_);
  } else {
    j["base_score"] = num_array(bias_);
    json all = json::array();
    for (const auto& trees : stumps_) {
      json cls = json::array();
      for (const auto& s : trees) {
        cls.push_back({{"feature", s.feature},
                       {"threshold", num(s.threshold)},
                       {"left", num(s.left)},
                       {"right", num(s.right)}});
      }
      all.push_back(cls);
    }
    j["stumps"] = all;
  }
  return j.dump(2) + "\n";
}

ClassifierModel ClassifierModel::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed model JSON: ") + e.what(), e.byte);
  }
  try {
    ClassifierModel m;
    m.kind_ = parse_classifier_kind(j.at("kind").get<std::string>());
    m.source_names_ = j.at("source_names").get<std::vector<std::string>>();
    m.mean_ = parse_num_array(j.at("standardizer").at("mean"));
    m.stddev_ = parse_num_array(j.at("standardizer").at("std"));
    if (j.contains("train_config")) {
      const auto& tc = j["train_config"];
      m.config_.kind = m.kind_;
      m.config_.epochs = tc.at("epochs").get<std::size_t>();
      m.config_.learning_rate = parse_num(tc.at("learning_rate"));
      m.config_.l2 = parse_num(tc.at("l2"));
      m.config_.seed = tc.at("seed").get<std::uint64_t>();
    }
    const std::size_t C = m.source_names_.size();
    const std::size_t D = m.mean_.size();
    if (C < 2 || m.stddev_.size() != D) throw Error("inconsistent model dimensions");
    if (m.kind_ == ClassifierKind::kSoftmaxRegression) {
      const auto& w = j.at("weights");
      if (!w.is_array() || w.size() != C) throw Error("weights must have one row per class");
      for (const auto& row : w) {
        auto r = parse_num_array(row);
        if (r.size() != D) throw Error("weight row length does not match feature count");
        m.weights_.insert(m.weights_.end(), r.begin(), r.end());
      }
      m.bias_ = parse_num_array(j.at("bias"));
    } else {
      m.bias_ = parse_num_array(j.at("base_score"));
      const auto& all = j.at("stumps");
      if (!all.is_array() || all.size() != C) throw Error("stumps must have one list per class");
      for (const auto& cls : all) {
        std::vector<Stump> trees;
        for (const auto& s : cls) {
          Stump st{s.at("feature").get<std::size_t>(), parse_num(s.at("threshold")),
                   parse_num(s.at("left")), parse_num(s.at("right"))};
          if (st.feature >= D) throw Error("stump feature index out of range");
          trees.push_back(st);
        }
        m.stumps_.push_back(std::move(trees));
      }
    }
    if (m.bias_.size() != C) throw Error("bias length does not match class count");
    return m;
  } catch (const json::exception& e) {
    throw Error(std::string("invalid model file: ") + e.what());
  }
}

void ClassifierModel::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write model file " + path);
  f << to_json();
}

ClassifierModel ClassifierModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open model file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

namespace {

struct Standardized {
  std::vector<double> mean, stddev;
  std::vector<double> x;  // N x D row-major
};

Standardized standardize_data(std::span<const LabeledFeature> data, std::size_t D) {
  Standardized s;
  const auto N = static_cast<double>(data.size());
  s.mean.assign(D, 0.0);
  s.stddev.assign(D, 0.0);
  for (const auto& r : data) {
    for (std::size_t j = 0; j < D; ++j) s.mean[j] += r.features[j];
  }
  for (auto& m : s.mean) m /= N;
  for (const auto& r : data) {
    for (std::size_t j = 0; j < D; ++j) {
      const double d = r.features[j] - s.mean[j];
      s.stddev[j] += d * d;
    }
  }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / N);
    if (!(v > 1e-12)) v = 1.0;
  }
  s.x.resize(data.size() * D);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      s.x[i * D + j] = (data[i].features[j] - s.mean[j]) / s.stddev[j];
    }
  }
  return s;
}

void train_softmax(std::vector<double>& W, std::vector<double>& b,
                   const Standardized& s, std::span<const LabeledFeature> data, std::size_t C,
                   std::size_t D, const TrainConfig& cfg, std::vector<double>* history) {
  const std::size_t N = data.size();
  W.assign(C * D, 0.0);
  b.assign(C, 0.0);
  std::vector<double> gW(C * D), gb(C), p(C);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(gW.begin(), gW.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double* x = &s.x[i * D];
      for (std::size_t k = 0; k < C; ++k) {
        double z = b[k];
        for (std::size_t j = 0; j < D; ++j) z += W[k * D + j] * x[j];
        p[k] = z;
      }
      const double mx = *std::max_element(p.begin(), p.end());
      double total = 0.0;
      for (auto& v : p) total += std::exp(v - mx);
      const std::size_t y = data[i].label;
      loss += -(p[y] - mx - std::log(total));
      for (std::size_t k = 0; k < C; ++k) {
        const double delta = std::exp(p[k] - mx) / total - (k == y ? 1.0 : 0.0);
        gb[k] += delta;
        for (std::size_t j = 0; j < D; ++j) gW[k * D + j] += delta * x[j];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(N);
    double reg = 0.0;
    for (double w : W) reg += w * w;
    if (history) history->push_back(loss * inv_n + 0.5 * cfg.l2 * reg);
    for (std::size_t q = 0; q < W.size(); ++q) {
      W[q] -= cfg.learning_rate * (gW[q] * inv_n + cfg.l2 * W[q]);
    }
    for (std::size_t k = 0; k < C; ++k) b[k] -= cfg.learning_rate * gb[k] * inv_n;
  }
}

void train_stumps(std::vector<std::vector<Stump>>& stumps, std::vector<double>& base,
                  const Standardized& s, std::span<const LabeledFeature> data, std::size_t C,
                  std::size_t D, const TrainConfig& cfg, std::vector<double>* history) {
  const std::size_t N = data.size();
  // Sample order per feature, sorted by value (index tie-break).
  std::vector<std::vector<std::size_t>> order(D);
  for (std::size_t j = 0; j < D; ++j) {
    order[j].resize(N);
    std::iota(order[j].begin(), order[j].end(), 0);
    std::stable_sort(order[j].begin(), order[j].end(), [&](std::size_t a, std::size_t b) {
      return s.x[a * D + j] < s.x[b * D + j];
    });
  }
  const double lambda = std::max(cfg.l2, 1e-6);
  constexpr double kMinHessian = 1e-6;

  stumps.assign(C, {});
  base.assign(C, 0.0);
  std::vector<std::vector<double>> raw(C, std::vector<double>(N));
  for (std::size_t k = 0; k < C; ++k) {
    std::size_t pos = 0;
    for (const auto& r : data) pos += r.label == k;
    const double prior = std::clamp(static_cast<double>(pos) / static_cast<double>(N), 1e-6, 1 - 1e-6);
    base[k] = std::log(prior / (1 - prior));
    std::fill(raw[k].begin(), raw[k].end(), base[k]);
  }

  std::vector<double> g(N), h(N);
  for (std::size_t round = 0; round < cfg.epochs; ++round) {
    double loss = 0.0;
    for (std::size_t k = 0; k < C; ++k) {
      double G = 0.0, H = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double y = data[i].label == k ? 1.0 : 0.0;
        const double p = sigmoid(raw[k][i]);
        loss -= y * log_sigmoid(raw[k][i]) + (1 - y) * log_sigmoid(-raw[k][i]);
        g[i] = p - y;
        h[i] = p * (1 - p);
        G += g[i];
        H += h[i];
      }
      const double parent = G * G / (H + lambda);
      double best_gain = 0.0;
      Stump best;
      bool found = false;
      for (std::size_t j = 0; j < D; ++j) {
        double GL = 0.0, HL = 0.0;
        for (std::size_t q = 0; q + 1 < N; ++q) {
          const std::size_t i = order[j][q];
          GL += g[i];
          HL += h[i];
          const double v = s.x[i * D + j];
          const double next = s.x[order[j][q + 1] * D + j];
          if (next <= v) continue;
          const double GR = G - GL, HR = H - HL;
          if (HL < kMinHessian || HR < kMinHessian) continue;
          const double gain = GL * GL / (HL + lambda) + GR * GR / (HR + lambda) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best = {j, 0.5 * (v + next), -cfg.learning_rate * GL / (HL + lambda),
                    -cfg.learning_rate * GR / (HR + lambda)};
            found = true;
          }
        }
      }
      if (!found) continue;
      stumps[k].push_back(best);
      for (std::size_t i = 0; i < N; ++i) {
        raw[k][i] += s.x[i * D + best.feature] < best.threshold ? best.left : best.right;
      }
    }
    if (history) history->push_back(loss / static_cast<double>(N));
  }
}

}  // namespace

ClassifierModel train_classifier(std::span<const LabeledFeature> data, const TrainConfig& config,
                                 std::vector<std::string> source_names,
                                 std::vector<double>* loss_history) {
  if (data.empty()) throw Error("degenerate labels");
  const std::size_t C = source_names.size();
  const std::size_t D = data.front().features.size();
  if (D == 0) throw Error("empty feature vectors");
  std::set<std::size_t> present;
  for (const auto& r : data) {
    if (r.features.size() != D) throw Error("inconsistent feature dimensions in training data");
    if (r.label >= C) throw Error("label " + std::to_string(r.label) + " has no source name");
    for (double v : r.features) {
      if (!std::isfinite(v)) throw Error("non-finite feature in training data");
    }
    present.insert(r.label);
  }
  if (present.size() < 2) throw Error("degenerate labels");
  if (!(config.learning_rate > 0) || !(config.l2 >= 0)) throw Error("invalid training hyperparameters");

  ClassifierModel m;
  m.kind_ = config.kind;
  m.config_ = config;
  m.source_names_ = std::move(source_names);
  const Standardized s = standardize_data(data, D);
  m.mean_ = s.mean;
  m.stddev_ = s.stddev;
  if (config.kind == ClassifierKind::kSoftmaxRegression) {
    train_softmax(m.weights_, m.bias_, s, data, C, D, config, loss_history);
  } else {
    train_stumps(m.stumps_, m.bias_, s, data, C, D, config, loss_history);
  }
  return m;
}

}  // namespace llmdet
