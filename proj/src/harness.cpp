#include "llmdet/harness.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <algorithm>
#include <numeric>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "llmdet/corpus.hpp"
#include "llmdet/error.hpp"
#include "llmdet/external_provider.hpp"
#include "llmdet/ngram_lm.hpp"
#include "llmdet/rng.hpp"

namespace llmdet {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (!(split > 0 && split < 1)) throw Error("split must be in (0, 1)");
  if (!(classifier_split > 0 && classifier_split < 1)) throw Error("classifier_split must be in (0, 1)");
  if (samples_per_source < 2) throw Error("samples_per_source must be at least 2");
  if (prompt_len < 1) throw Error("prompt_len must be at least 1");
  if (n_max < kMinOrder || n_max > kMaxOrder) throw Error("n_max must be in [2, 4]");
  for (int n = kMinOrder; n <= n_max; ++n) {
    if (!K_per_level.count(n) || K_per_level.at(n) == 0) {
      throw Error("K_per_level needs a positive entry for order " + std::to_string(n));
    }
  }
  if (!(temperature > 0)) throw Error("temperature must be positive");
  if (sources.size() < 2) throw Error("an experiment needs at least two model sources");
  if (human.corpus.empty()) throw Error("the human source needs a corpus");
  std::set<std::string> names{human.name};
  for (const auto& s : sources) {
    const int set = !s.corpus.empty() + !s.command.empty() + !s.tcp.empty();
    if (set != 1) throw Error("source '" + s.name + "' needs exactly one of corpus, command, tcp");
    if (!names.insert(s.name).second) throw Error("duplicate source name '" + s.name + "'");
  }
}

namespace {

json levels_to_json(const std::map<int, std::size_t>& m) {
  json j = json::object();
  for (const auto& [n, v] : m) j[std::to_string(n)] = v;
  return j;
}

std::map<int, std::size_t> levels_from_json(const json& j) {
  std::map<int, std::size_t> m;
  for (const auto& [k, v] : j.items()) m[std::stoi(k)] = v.get<std::size_t>();
  return m;
}

json source_to_json(const SourceSpec& s) {
  json j{{"name", s.name}};
  if (!s.corpus.empty()) j["corpus"] = s.corpus;
  if (!s.command.empty()) j["command"] = s.command;
  if (!s.tcp.empty()) j["tcp"] = s.tcp;
  return j;
}

SourceSpec source_from_json(const json& j) {
  SourceSpec s;
  s.name = j.at("name").get<std::string>();
  s.corpus = j.value("corpus", "");
  s.command = j.value("command", "");
  s.tcp = j.value("tcp", "");
  return s;
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  json j;
  j["human"] = source_to_json(human);
  j["sources"] = json::array();
  for (const auto& s : sources) j["sources"].push_back(source_to_json(s));
  j["prompt_corpus"] = prompt_corpus;
  j["vocab"] = vocab_path;
  j["vocab_size"] = vocab_size;
  j["builtin_docs"] = builtin_docs;
  j["prompt_len"] = prompt_len;
  j["samples_per_source"] = samples_per_source;
  j["split"] = split;
  j["classifier_split"] = classifier_split;
  j["gen_len"] = gen_len;
  j["temperature"] = temperature;
  j["n_max"] = n_max;
  j["k_per_level"] = levels_to_json(k_per_level);
  j["K_per_level"] = levels_to_json(K_per_level);
  j["quantize"] = quantize;
  j["lm_order"] = lm_order;
  j["lm_alpha"] = lm_alpha;
  j["classifier"] = {{"kind", llmdet::to_string(classifier.kind)},
                     {"epochs", classifier.epochs},
                     {"learning_rate", classifier.learning_rate},
                     {"l2", classifier.l2}};
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed experiment config: ") + e.what(), e.byte);
  }
  ExperimentConfig c;
  try {
    if (j.contains("human")) c.human = source_from_json(j["human"]);
    if (j.contains("sources")) {
      for (const auto& s : j["sources"]) c.sources.push_back(source_from_json(s));
    }
    c.prompt_corpus = j.value("prompt_corpus", c.prompt_corpus);
    c.vocab_path = j.value("vocab", c.vocab_path);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.builtin_docs = j.value("builtin_docs", c.builtin_docs);
    c.prompt_len = j.value("prompt_len", c.prompt_len);
    c.samples_per_source = j.value("samples_per_source", c.samples_per_source);
    c.split = j.value("split", c.split);
    c.classifier_split = j.value("classifier_split", c.classifier_split);
    c.gen_len = j.value("gen_len", c.gen_len);
    c.temperature = j.value("temperature", c.temperature);
    c.n_max = j.value("n_max", c.n_max);
    if (j.contains("k_per_level")) c.k_per_level = levels_from_json(j["k_per_level"]);
    if (j.contains("K_per_level")) c.K_per_level = levels_from_json(j["K_per_level"]);
    c.quantize = j.value("quantize", c.quantize);
    c.lm_order = j.value("lm_order", c.lm_order);
    c.lm_alpha = j.value("lm_alpha", c.lm_alpha);
    if (j.contains("classifier")) {
      const auto& cl = j["classifier"];
      if (cl.contains("kind")) c.classifier.kind = parse_classifier_kind(cl["kind"].get<std::string>());
      c.classifier.epochs = cl.value("epochs", c.classifier.epochs);
      c.classifier.learning_rate = cl.value("learning_rate", c.classifier.learning_rate);
      c.classifier.l2 = cl.value("l2", c.classifier.l2);
    }
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid experiment config: ") + e.what());
  }
  c.classifier.seed = c.seed;
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Text utilities

std::vector<std::string> make_prompts(std::span<const std::string> texts, std::size_t prompt_len) {
  if (prompt_len < 1) throw Error("prompt_len must be at least 1");
  std::vector<std::string> out;
  for (const auto& t : texts) {
    auto toks = split_tokens(t);
    if (toks.empty()) continue;
    if (toks.size() > prompt_len) toks.resize(prompt_len);
    std::string p;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) p += ' ';
      p += toks[i];
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

template <typename T>
std::vector<T> delete_items(const std::vector<T>& items, double rate, std::uint64_t seed) {
  if (!(rate >= 0 && rate <= 1)) throw Error("deletion rate must be in [0, 1]");
  Rng rng(seed);
  std::vector<T> kept;
  kept.reserve(items.size());
  for (const auto& it : items) {
    if (!(rng.uniform() < rate)) kept.push_back(it);
  }
  if (kept.empty() && !items.empty()) kept.push_back(items[rng.below(items.size())]);
  return kept;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::string perturb_delete(const std::string& text, double rate, std::uint64_t seed) {
  if (!(rate >= 0 && rate <= 1)) throw Error("deletion rate must be in [0, 1]");
  if (rate == 0) return text;
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  const auto kept = delete_items(words, rate, seed);
  std::string out;
  for (std::size_t w = 0; w < kept.size(); ++w) {
    if (w) out += ' ';
    out += kept[w];
  }
  return out;
}

TokenSequence perturb_delete(const TokenSequence& tokens, double rate, std::uint64_t seed) {
  if (rate == 0) return tokens;
  return TokenSequence{delete_items(tokens.ids, rate, seed)};
}

std::size_t statistical_count(std::size_t n, double split) {
  if (n < 2) return n;
  const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * split));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

// ---------------------------------------------------------------------------
// Experiment

std::vector<TokenSequence> Experiment::texts_with_role(Role role, std::size_t label) const {
  std::vector<TokenSequence> out;
  for (const auto& t : texts) {
    if (t.role == role && t.label == label) out.push_back(t.tokens);
  }
  return out;
}

std::vector<TokenSequence> Experiment::eval_texts() const {
  std::vector<TokenSequence> out;
  for (const auto& t : texts) {
    if (t.role == Role::kEval) out.push_back(t.tokens);
  }
  return out;
}

std::vector<std::size_t> Experiment::eval_labels() const {
  std::vector<std::size_t> out;
  for (const auto& t : texts) {
    if (t.role == Role::kEval) out.push_back(t.label);
  }
  return out;
}

namespace {

constexpr std::uint64_t kStreamCorpus = 0x100;
constexpr std::uint64_t kStreamHumanSample = 0x200;
constexpr std::uint64_t kStreamPromptSample = 0x300;
constexpr std::uint64_t kStreamGenerate = 0x400;
constexpr std::uint64_t kStreamPerturb = 0x500;

BuildOptions build_options(const ExperimentConfig& c) {
  BuildOptions o;
  o.n_max = c.n_max;
  o.top_ngrams = c.k_per_level;
  o.top_next = c.K_per_level;
  o.quantize = c.quantize;
  return o;
}

std::vector<TokenSequence> tokenize_all(std::span<const std::string> texts, const Vocabulary& vocab) {
  std::vector<TokenSequence> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tokenize(t, vocab));
  return out;
}

std::unique_ptr<ProbabilityProvider> external_provider(const SourceSpec& s,
                                                       std::shared_ptr<const Vocabulary> vocab) {
  if (!s.command.empty()) {
    return std::make_unique<ExternalProvider>(spawn_process_channel(s.command), std::move(vocab));
  }
  const auto colon = s.tcp.rfind(':');
  if (colon == std::string::npos) throw Error("tcp provider address must be host:port");
  return std::make_unique<ExternalProvider>(
      connect_tcp_channel(s.tcp.substr(0, colon), std::stoi(s.tcp.substr(colon + 1))),
      std::move(vocab));
}

// Generates one text per (prompt, seed) pair; parallel when the provider allows it.
std::vector<TokenSequence> generate_all(const ProbabilityProvider& provider,
                                        std::span<const TokenSequence> prompts,
                                        std::span<const std::uint64_t> seeds, std::size_t gen_len,
                                        double temperature) {
  std::vector<TokenSequence> out(prompts.size());
  const auto count = static_cast<std::ptrdiff_t>(prompts.size());
  std::exception_ptr failure;
  std::ptrdiff_t failed_at = -1;
#pragma omp parallel for schedule(dynamic, 8) if (provider.concurrent())
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      out[u] = provider.generate(prompts[u], prompts[u].size() + gen_len, temperature, seeds[u]);
    } catch (...) {
#pragma omp critical(llmdet_generate_failure)
      if (failed_at < 0 || i < failed_at) {
        failed_at = i;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

template <typename F>
auto with_source(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw Error("source '" + name + "': " + e.what());
  }
}

void assign_roles(std::vector<LabeledText>& texts, std::size_t first, std::size_t n,
                  const ExperimentConfig& c) {
  const std::size_t n_stat = statistical_count(n, c.split);
  const std::size_t n_train = statistical_count(n - n_stat, c.classifier_split);
  for (std::size_t i = 0; i < n; ++i) {
    auto& t = texts[first + i];
    t.role = i < n_stat ? Role::kStatistical : (i < n_stat + n_train ? Role::kTrain : Role::kEval);
  }
}

std::vector<NgramDictionary> build_dicts(const Experiment& exp, const BuildOptions& options) {
  std::vector<NgramDictionary> dicts;
  for (std::size_t s = 0; s < exp.source_names.size(); ++s) {
    const auto stat = exp.texts_with_role(Role::kStatistical, s);
    auto d = with_source(exp.source_names[s],
                         [&] { return build_dictionary(*exp.providers[s], stat, options); });
    d.set_source_name(exp.source_names[s]);
    dicts.push_back(std::move(d));
  }
  return dicts;
}

ClassifierModel train_on(const Experiment& exp, std::span<const NgramDictionary> dicts) {
  std::vector<TokenSequence> seqs;
  std::vector<std::size_t> labels;
  for (const auto& t : exp.texts) {
    if (t.role == Role::kTrain && !t.tokens.empty()) {
      seqs.push_back(t.tokens);
      labels.push_back(t.label);
    }
  }
  const auto feats = extract_features_batch(seqs, dicts);
  std::vector<LabeledFeature> data;
  data.reserve(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) data.push_back({feats[i].ppl, labels[i]});
  return train_classifier(data, exp.config.classifier, exp.source_names);
}

EvalReport evaluate_with(const Experiment& exp, std::span<const NgramDictionary> dicts,
                         const ClassifierModel& classifier, std::span<const TokenSequence> texts,
                         std::span<const std::size_t> labels) {
  std::vector<TokenSequence> kept;
  std::vector<std::size_t> kept_labels;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) continue;
    kept.push_back(texts[i]);
    kept_labels.push_back(labels[i]);
  }
  Detector detector(*exp.vocab, dicts, classifier);
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = detect_batch(detector, kept);
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  return evaluate(results, kept_labels, exp.source_names, dt.count());
}

std::uint64_t serialized_bytes(std::span<const NgramDictionary> dicts) {
  std::uint64_t total = 0;
  for (const auto& d : dicts) total += d.serialize().size();
  return total;
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& config) {
  config.validate();
  Experiment exp;
  exp.config = config;
  exp.config.classifier.seed = config.seed;
  const auto& c = exp.config;

  const auto human_corpus = with_source(c.human.name, [&] {
    return load_corpus(c.human.corpus, c.builtin_docs, derive_seed(c.seed, kStreamCorpus));
  });
  std::vector<std::vector<std::string>> source_corpora(c.sources.size());
  for (std::size_t j = 0; j < c.sources.size(); ++j) {
    if (c.sources[j].corpus.empty()) continue;
    source_corpora[j] = with_source(c.sources[j].name, [&] {
      return load_corpus(c.sources[j].corpus, c.builtin_docs,
                         derive_seed(c.seed, kStreamCorpus + 1 + j));
    });
  }

  if (!c.vocab_path.empty()) {
    exp.vocab = std::make_shared<const Vocabulary>(Vocabulary::load(c.vocab_path));
  } else {
    std::vector<std::string> all = human_corpus;
    for (const auto& sc : source_corpora) all.insert(all.end(), sc.begin(), sc.end());
    exp.vocab = std::make_shared<const Vocabulary>(build_vocabulary(all, c.vocab_size));
  }
  const Vocabulary& vocab = *exp.vocab;

  exp.source_names.push_back(c.human.name);
  exp.providers.emplace_back();  // human model is trained after the split
  for (std::size_t j = 0; j < c.sources.size(); ++j) {
    const auto& s = c.sources[j];
    exp.source_names.push_back(s.name);
    exp.providers.push_back(with_source(s.name, [&]() -> std::unique_ptr<ProbabilityProvider> {
      if (!s.corpus.empty()) {
        return std::make_unique<NgramLM>(
            train_ngram_lm(tokenize_all(source_corpora[j], vocab), c.lm_order, c.lm_alpha, vocab, s.name));
      }
      return external_provider(s, exp.vocab);
    }));
  }

  // Human texts are sampled directly from the human corpus.
  {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < human_corpus.size(); ++i) {
      if (!split_tokens(human_corpus[i]).empty()) idx.push_back(i);
    }
    if (idx.size() < c.samples_per_source) {
      throw Error("human corpus has " + std::to_string(idx.size()) + " usable texts, need " +
                  std::to_string(c.samples_per_source));
    }
    Rng rng(derive_seed(c.seed, kStreamHumanSample));
    rng.shuffle(idx);
    const std::size_t first = exp.texts.size();
    for (std::size_t i = 0; i < c.samples_per_source; ++i) {
      exp.texts.push_back({tokenize(human_corpus[idx[i]], vocab), 0, Role::kStatistical, {}, 0});
    }
    assign_roles(exp.texts, first, c.samples_per_source, c);
  }

  std::vector<std::string> prompt_source =
      c.prompt_corpus.empty() ? human_corpus
                              : load_corpus(c.prompt_corpus, c.builtin_docs,
                                            derive_seed(c.seed, kStreamCorpus + 0xff));
  const auto prompts = tokenize_all(make_prompts(prompt_source, c.prompt_len), vocab);
  if (prompts.empty()) throw Error("prompt corpus produced no prompts");

  for (std::size_t s = 1; s < exp.source_names.size(); ++s) {
    Rng rng(derive_seed(c.seed, kStreamPromptSample + s));
    std::vector<std::size_t> order(prompts.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<TokenSequence> chosen;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < c.samples_per_source; ++i) {
      chosen.push_back(prompts[i < order.size() ? order[i] : rng.below(prompts.size())]);
      seeds.push_back(derive_seed(c.seed, (kStreamGenerate + s) << 32 | i));
    }
    const auto generated = with_source(exp.source_names[s], [&] {
      return generate_all(*exp.providers[s], chosen, seeds, c.gen_len, c.temperature);
    });
    const std::size_t first = exp.texts.size();
    for (std::size_t i = 0; i < generated.size(); ++i) {
      exp.texts.push_back({generated[i], s, Role::kStatistical, chosen[i], seeds[i]});
    }
    assign_roles(exp.texts, first, generated.size(), c);
  }

  exp.providers[0] = std::make_unique<NgramLM>(train_ngram_lm(
      exp.texts_with_role(Role::kStatistical, 0), c.lm_order, c.lm_alpha, vocab, c.human.name));

  exp.dicts = build_dicts(exp, build_options(c));
  exp.classifier = train_on(exp, exp.dicts);
  return exp;
}

void rebuild_dictionaries(Experiment& exp, const BuildOptions& options) {
  exp.dicts = build_dicts(exp, options);
}

void retrain_classifier(Experiment& exp) { exp.classifier = train_on(exp, exp.dicts); }

EvalReport evaluate_texts(const Experiment& exp, std::span<const TokenSequence> texts,
                          std::span<const std::size_t> labels) {
  return evaluate_with(exp, exp.dicts, exp.classifier, texts, labels);
}

EvalReport evaluate_experiment(const Experiment& exp) {
  const auto texts = exp.eval_texts();
  const auto labels = exp.eval_labels();
  return evaluate_texts(exp, texts, labels);
}

// ---------------------------------------------------------------------------
// Sweeps

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "n_max") return SweepAxis::kNMax;
  if (s == "K") return SweepAxis::kTopK;
  if (s == "temperature") return SweepAxis::kTemperature;
  if (s == "delete_rate") return SweepAxis::kDeleteRate;
  throw Error("unknown sweep axis '" + s + "' (expected n_max, K, temperature, delete_rate)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNMax: return "n_max";
    case SweepAxis::kTopK: return "K";
    case SweepAxis::kTemperature: return "temperature";
    case SweepAxis::kDeleteRate: return "delete_rate";
  }
  return "?";
}

std::vector<SweepRow> sweep(const Experiment& base, SweepAxis axis, std::span<const double> values) {
  if (values.empty()) throw Error("sweep needs at least one value");
  std::vector<SweepRow> rows;
  const auto labels = base.eval_labels();
  for (double v : values) {
    SweepRow row;
    row.value = v;
    switch (axis) {
      case SweepAxis::kNMax:
      case SweepAxis::kTopK: {
        BuildOptions o = build_options(base.config);
        if (axis == SweepAxis::kNMax) {
          const int n = static_cast<int>(std::lround(v));
          if (n < kMinOrder || n > kMaxOrder || n != v) throw Error("n_max sweep values must be 2, 3, or 4");
          o.n_max = n;
        } else {
          if (!(v >= 1) || v != std::floor(v)) throw Error("K sweep values must be positive integers");
          o.top_next[2] = static_cast<std::size_t>(v);
        }
        const auto dicts = build_dicts(base, o);
        const auto clf = train_on(base, dicts);
        const auto texts = base.eval_texts();
        row.report = evaluate_with(base, dicts, clf, texts, labels);
        row.dict_bytes = serialized_bytes(dicts);
        break;
      }
      case SweepAxis::kTemperature: {
        if (!(v > 0)) throw Error("temperature sweep values must be positive");
        std::vector<TokenSequence> texts;
        for (const auto& t : base.texts) {
          if (t.role != Role::kEval) continue;
          if (t.label == 0 || !t.prompt) {
            texts.push_back(t.tokens);
          } else {
            texts.push_back(with_source(base.source_names[t.label], [&] {
              return base.providers[t.label]->generate(*t.prompt, t.prompt->size() + base.config.gen_len, v, t.seed);
            }));
          }
        }
        row.report = evaluate_with(base, base.dicts, base.classifier, texts, labels);
        break;
      }
      case SweepAxis::kDeleteRate: {
        std::vector<TokenSequence> texts = base.eval_texts();
        for (std::size_t i = 0; i < texts.size(); ++i) {
          texts[i] = perturb_delete(texts[i], v, derive_seed(base.config.seed, kStreamPerturb << 32 | i));
        }
        row.report = evaluate_with(base, base.dicts, base.classifier, texts, labels);
        break;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepAxis axis,
                            std::span<const double> values) {
  return sweep(build_experiment(config), axis, values);
}

std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << to_string(axis) << ",f1_macro,r_at_1,r_at_2,r_at_3,wall_time_s,dict_bytes\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& r : rows) {
    out << r.value << ',' << r.report.f1_macro << ',' << r.report.r_at.at(1) << ','
        << r.report.r_at.at(2) << ',' << r.report.r_at.at(3) << ',' << r.report.wall_time_s << ',';
    if (r.dict_bytes) out << *r.dict_bytes;
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Benchmark

std::string BenchResult::to_json() const {
  nlohmann::ordered_json j;
  j["count"] = count;
  j["threads"] = threads;
  j["serial_wall_time_s"] = serial_wall_time_s;
  j["serial_texts_per_second"] = serial_texts_per_second;
  j["parallel_wall_time_s"] = parallel_wall_time_s;
  j["parallel_texts_per_second"] = parallel_texts_per_second;
  return j.dump(2) + "\n";
}

BenchResult bench_detect(std::span<const TokenSequence> texts, const Vocabulary& vocab,
                         std::span<const NgramDictionary> dicts, const ClassifierModel& classifier) {
  Detector detector(vocab, dicts, classifier);
  std::vector<TokenSequence> kept;
  for (const auto& t : texts) {
    if (!t.empty()) kept.push_back(t);
  }
  BenchResult r;
  r.count = kept.size();
  r.threads = omp_get_max_threads();
  auto time = [&](auto&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  r.serial_wall_time_s = time([&] { (void)detect_batch_serial(detector, kept); });
  r.parallel_wall_time_s = time([&] { (void)detect_batch(detector, kept); });
  auto rate = [&](double s) { return s > 0 ? static_cast<double>(r.count) / s : 0.0; };
  r.serial_texts_per_second = rate(r.serial_wall_time_s);
  r.parallel_texts_per_second = rate(r.parallel_wall_time_s);
  return r;
}

}  // namespace llmdet
