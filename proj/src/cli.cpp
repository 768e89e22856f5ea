#include "llmdet/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>

#include "llmdet/classifier.hpp"
#include "llmdet/corpus.hpp"
#include "llmdet/detection.hpp"
#include "llmdet/dictionary.hpp"
#include "llmdet/error.hpp"
#include "llmdet/external_provider.hpp"
#include "llmdet/harness.hpp"
#include "llmdet/metrics.hpp"
#include "llmdet/ngram_lm.hpp"
#include "llmdet/rng.hpp"
#include "llmdet/tokenizer.hpp"

namespace llmdet::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct UsageError : Error {
  using Error::Error;
};

std::map<int, std::size_t> parse_level_map_or_usage(const std::string& s) {
  try {
    return parse_level_map(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<std::string> read_input_lines(const std::string& path, std::istream& in) {
  if (path.empty() || path == "-") {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
    }
    return lines;
  }
  return read_lines(path);
}

// Writes to a file, or to the given stream when path is empty or "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error("cannot open " + path + " for writing");
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }
  void close() {
    os_->flush();
    if (file_.is_open()) {
      file_.close();
      if (!file_) throw Error("failed writing " + path_);
    }
  }

 private:
  std::string path_;
  std::ofstream file_;
  std::ostream* os_;
};

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << data;
  if (!f) throw Error("failed writing " + path);
}

// Options shared by subcommands that need a next-token provider.
struct ProviderArgs {
  std::string corpus;
  std::string command;
  std::string tcp;
  std::string name;
  int lm_order = 3;
  double lm_alpha = 0.1;
  std::size_t builtin_docs = 20000;

  void add_to(CLI::App* app) {
    app->add_option("--corpus", corpus, "Train a built-in n-gram LM on this corpus (file or builtin:<topic>)");
    app->add_option("--provider-cmd", command, "External provider command (stdio protocol)");
    app->add_option("--provider-tcp", tcp, "External provider at host:port");
    app->add_option("--name", name, "Source name (defaults to the provider's name)");
    app->add_option("--lm-order", lm_order, "Order of the built-in LM")->check(CLI::Range(2, 4));
    app->add_option("--lm-alpha", lm_alpha, "Additive smoothing of the built-in LM")->check(CLI::PositiveNumber);
    app->add_option("--builtin-docs", builtin_docs, "Documents per builtin corpus");
  }

  std::unique_ptr<ProbabilityProvider> make(std::shared_ptr<const Vocabulary> vocab,
                                            std::uint64_t seed) const {
    const int set = !corpus.empty() + !command.empty() + !tcp.empty();
    if (set != 1) throw UsageError("exactly one of --corpus, --provider-cmd, --provider-tcp is required");
    if (!corpus.empty()) {
      const auto docs = load_corpus(corpus, builtin_docs, seed);
      std::vector<TokenSequence> seqs;
      for (const auto& d : docs) seqs.push_back(tokenize(d, *vocab));
      const std::string nm = name.empty() ? default_name() : name;
      return std::make_unique<NgramLM>(train_ngram_lm(seqs, lm_order, lm_alpha, *vocab, nm));
    }
    if (!command.empty()) {
      return std::make_unique<ExternalProvider>(spawn_process_channel(command), std::move(vocab));
    }
    const auto colon = tcp.rfind(':');
    if (colon == std::string::npos) throw UsageError("--provider-tcp expects host:port");
    int port = 0;
    try {
      port = std::stoi(tcp.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("--provider-tcp expects host:port");
    }
    return std::make_unique<ExternalProvider>(connect_tcp_channel(tcp.substr(0, colon), port),
                                              std::move(vocab));
  }

  std::string default_name() const {
    if (corpus.rfind("builtin:", 0) == 0) return corpus.substr(8);
    return fs::path(corpus).stem().string();
  }
};

std::vector<NgramDictionary> load_dicts(const std::vector<std::string>& args) {
  std::vector<NgramDictionary> dicts;
  for (const auto& a : args) dicts.push_back(NgramDictionary::load(resolve_dict_path(a)));
  return dicts;
}

// --vocab when given, else vocab.txt beside the first dictionary.
Vocabulary load_vocab_for(const std::string& vocab_arg, const std::vector<std::string>& dict_args) {
  if (!vocab_arg.empty()) return Vocabulary::load(vocab_arg);
  if (!dict_args.empty()) {
    const auto p = fs::path(resolve_dict_path(dict_args.front())).parent_path() / "vocab.txt";
    if (fs::exists(p)) return Vocabulary::load(p.string());
  }
  throw UsageError("--vocab is required (no vocab.txt beside the first dictionary)");
}

std::vector<std::string> dict_names(const std::vector<NgramDictionary>& dicts) {
  std::vector<std::string> names;
  for (const auto& d : dicts) names.push_back(d.source_name());
  return names;
}

std::size_t label_of(const std::string& source, const std::vector<std::string>& names,
                     std::size_t line) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == source) return i;
  }
  throw Error("line " + std::to_string(line) + ": unknown source '" + source + "'");
}

struct LabeledLines {
  std::vector<std::string> texts;
  std::vector<std::size_t> labels;
};

// "source<TAB>text" per line; blank lines are skipped.
LabeledLines read_labeled(const std::string& path, std::istream& in,
                          const std::vector<std::string>& names) {
  LabeledLines out;
  const auto lines = read_input_lines(path, in);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw Error("line " + std::to_string(i + 1) + ": expected source<TAB>text");
    }
    out.labels.push_back(label_of(lines[i].substr(0, tab), names, i + 1));
    out.texts.push_back(lines[i].substr(tab + 1));
  }
  return out;
}

nlohmann::ordered_json result_json(std::size_t id, const DetectionResult& r) {
  nlohmann::ordered_json ranked = nlohmann::ordered_json::array();
  for (const auto& s : r.ranked) ranked.push_back({{"source", s.name}, {"prob", s.prob}});
  nlohmann::ordered_json j;
  j["text_id"] = id;
  j["ranked"] = ranked;
  j["features"] = r.features.ppl;
  j["scored_fraction"] = r.features.scored_fraction;
  return j;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad sweep value '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--values needs at least one value");
  return out;
}

}  // namespace

std::map<int, std::size_t> parse_level_map(const std::string& s) {
  std::map<int, std::size_t> m;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw Error("expected order:count, got '" + item + "'");
    try {
      std::size_t a = 0, b = 0;
      const int n = std::stoi(item.substr(0, colon), &a);
      const long long v = std::stoll(item.substr(colon + 1), &b);
      if (a != colon || b != item.size() - colon - 1 || v < 0) throw std::invalid_argument(item);
      m[n] = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw Error("expected order:count, got '" + item + "'");
    }
  }
  return m;
}

std::string resolve_dict_path(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  const char* dir = std::getenv("LLMDET_DICT_PATH");
  if (dir && *dir) {
    fs::path p = fs::path(dir) / arg;
    if (fs::exists(p)) return p.string();
    if (!p.has_extension()) {
      p += ".dict";
      if (fs::exists(p)) return p.string();
    }
  }
  return arg;
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Source attribution by proxy perplexity over n-gram dictionaries", "llmdet"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed_flag;
  std::string config_path;
  int threads = 0;
  app.add_option("--seed", seed_flag, "Random seed")->capture_default_str();
  app.add_option("--config", config_path, "Experiment config (JSON); supplies defaults")->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "Worker threads (0 = all)")->check(CLI::NonNegativeNumber);
  app.fallthrough();

  ExperimentConfig defaults;
  auto seed = [&] { return seed_flag.value_or(defaults.seed); };
  std::function<void()> action;

  // build-vocab
  auto* bv = app.add_subcommand("build-vocab", "Build a vocabulary from corpora");
  std::vector<std::string> bv_corpora;
  std::size_t bv_size = 0;
  std::size_t bv_docs = 0;
  std::string bv_out;
  bv->add_option("--corpus", bv_corpora, "Corpus file or builtin:<topic>")->required()->delimiter(',');
  bv->add_option("--size", bv_size, "Maximum vocabulary size");
  bv->add_option("--builtin-docs", bv_docs, "Documents per builtin corpus");
  bv->add_option("--out", bv_out, "Output vocabulary file")->required();
  bv->callback([&] {
    action = [&] {
      std::vector<std::string> all;
      for (const auto& c : bv_corpora) {
        const auto docs = load_corpus(c, bv_docs ? bv_docs : defaults.builtin_docs, seed());
        all.insert(all.end(), docs.begin(), docs.end());
      }
      const auto vocab = build_vocabulary(all, bv_size ? bv_size : defaults.vocab_size);
      vocab.save(bv_out);
      err << "vocabulary: " << vocab.size() << " tokens\n";
    };
  });

  // build-dict
  auto* bd = app.add_subcommand("build-dict", "Build a next-token dictionary for one source");
  std::string bd_vocab, bd_texts, bd_out, bd_k, bd_K;
  int bd_nmax = 0;
  bool bd_quant = false;
  ProviderArgs bd_provider;
  bd->add_option("--vocab", bd_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  bd->add_option("--texts", bd_texts, "Statistical texts, one per line (defaults to --corpus)");
  bd->add_option("--n-max", bd_nmax, "Largest n-gram order")->check(CLI::Range(2, 4));
  bd->add_option("--k", bd_k, "Contexts per order, e.g. 2:100000,3:100000");
  bd->add_option("--K", bd_K, "Continuations per context, e.g. 2:2000,3:100,4:100");
  bd->add_flag("--quantize", bd_quant, "Store probabilities as binary16");
  bd->add_option("--out", bd_out, "Output dictionary file")->required();
  bd_provider.add_to(bd);
  bd->callback([&] {
    action = [&] {
      auto vocab = std::make_shared<const Vocabulary>(Vocabulary::load(bd_vocab));
      BuildOptions o;
      o.n_max = bd_nmax ? bd_nmax : defaults.n_max;
      o.top_ngrams = bd_k.empty() ? defaults.k_per_level : parse_level_map_or_usage(bd_k);
      o.top_next = bd_K.empty() ? defaults.K_per_level : parse_level_map_or_usage(bd_K);
      o.quantize = bd_quant || defaults.quantize;
      if (bd_texts.empty() && bd_provider.corpus.empty()) {
        throw UsageError("--texts is required with an external provider");
      }
      const auto provider = bd_provider.make(vocab, seed());
      const auto lines = bd_texts.empty()
                             ? load_corpus(bd_provider.corpus, bd_provider.builtin_docs, seed())
                             : read_lines(bd_texts);
      std::vector<TokenSequence> seqs;
      for (const auto& l : lines) {
        if (!l.empty()) seqs.push_back(tokenize(l, *vocab));
      }
      const auto dict = build_dictionary(*provider, seqs, o);
      dict.save(bd_out);
      for (const auto& s : dict.stats()) {
        err << s.n << "-gram: " << s.keys << " contexts, " << s.entries << " entries\n";
      }
    };
  });

  // sample
  auto* sa = app.add_subcommand("sample", "Generate texts from a provider");
  std::string sa_vocab, sa_prompts, sa_out;
  std::size_t sa_count = 0, sa_prompt_len = 0, sa_gen_len = 0;
  double sa_temp = 0;
  ProviderArgs sa_provider;
  sa->add_option("--vocab", sa_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  sa->add_option("--prompts", sa_prompts, "Texts to take prompts from")->required();
  sa->add_option("--count", sa_count, "Number of texts (default: one per prompt)");
  sa->add_option("--prompt-len", sa_prompt_len, "Prompt tokens");
  sa->add_option("--gen-len", sa_gen_len, "Tokens generated after the prompt");
  sa->add_option("--temperature", sa_temp, "Sampling temperature")->check(CLI::PositiveNumber);
  sa->add_option("--out", sa_out, "Output file (default stdout)");
  sa_provider.add_to(sa);
  sa->callback([&] {
    action = [&] {
      auto vocab = std::make_shared<const Vocabulary>(Vocabulary::load(sa_vocab));
      const auto provider = sa_provider.make(vocab, seed());
      const auto prompts = make_prompts(read_lines(sa_prompts), sa_prompt_len ? sa_prompt_len : defaults.prompt_len);
      if (prompts.empty()) throw Error("no prompts in " + sa_prompts);
      const std::size_t count = sa_count ? sa_count : prompts.size();
      const std::size_t gen_len = sa_gen_len ? sa_gen_len : defaults.gen_len;
      const double temp = sa_temp > 0 ? sa_temp : defaults.temperature;
      std::vector<std::string> lines(count);
      const auto n = static_cast<std::ptrdiff_t>(count);
      std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) if (provider->concurrent())
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        try {
          const auto p = tokenize(prompts[u % prompts.size()], *vocab);
          lines[u] = detokenize(provider->generate(p, p.size() + gen_len, temp, derive_seed(seed(), u)), *vocab);
        } catch (...) {
#pragma omp critical(llmdet_cli_sample)
          if (!failure) failure = std::current_exception();
        }
      }
      if (failure) std::rethrow_exception(failure);
      Sink sink(sa_out, out);
      for (const auto& l : lines) *sink << l << '\n';
      sink.close();
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "Train the source classifier on labeled texts");
  std::string tr_vocab, tr_data, tr_out, tr_kind;
  std::vector<std::string> tr_dicts;
  std::size_t tr_epochs = 0;
  double tr_lr = 0, tr_l2 = -1;
  tr->add_option("--vocab", tr_vocab, "Vocabulary file (default: vocab.txt by the dictionaries)")->check(CLI::ExistingFile);
  tr->add_option("--dicts", tr_dicts, "Dictionaries, one per source")->required()->delimiter(',');
  tr->add_option("--data", tr_data, "Labeled texts: source<TAB>text per line")->required();
  tr->add_option("--kind", tr_kind, "softmax_regression or boosted_stumps");
  tr->add_option("--epochs", tr_epochs, "Training rounds");
  tr->add_option("--lr", tr_lr, "Learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--l2", tr_l2, "L2 penalty")->check(CLI::NonNegativeNumber);
  tr->add_option("--out", tr_out, "Output model file")->required();
  tr->callback([&] {
    action = [&] {
      const auto vocab = load_vocab_for(tr_vocab, tr_dicts);
      const auto dicts = load_dicts(tr_dicts);
      check_vocab_binding(vocab, dicts);
      const auto names = dict_names(dicts);
      const auto data = read_labeled(tr_data, in, names);
      std::vector<TokenSequence> seqs;
      for (const auto& t : data.texts) seqs.push_back(tokenize(t, vocab));
      const auto feats = extract_features_batch(seqs, dicts);
      std::vector<LabeledFeature> rows;
      for (std::size_t i = 0; i < feats.size(); ++i) rows.push_back({feats[i].ppl, data.labels[i]});
      TrainConfig cfg = defaults.classifier;
      if (!tr_kind.empty()) {
        try {
          cfg.kind = parse_classifier_kind(tr_kind);
        } catch (const Error& e) {
          throw UsageError(e.what());
        }
      }
      if (tr_epochs) cfg.epochs = tr_epochs;
      if (tr_lr > 0) cfg.learning_rate = tr_lr;
      if (tr_l2 >= 0) cfg.l2 = tr_l2;
      cfg.seed = seed();
      train_classifier(rows, cfg, names).save(tr_out);
    };
  });

  // detect
  auto* de = app.add_subcommand("detect", "Rank sources for each input line (JSON lines out)");
  std::string de_vocab, de_model, de_input, de_out;
  std::vector<std::string> de_dicts;
  de->add_option("--vocab", de_vocab, "Vocabulary file (default: vocab.txt by the dictionaries)")->check(CLI::ExistingFile);
  de->add_option("--dicts", de_dicts, "Dictionaries, in model source order")->required()->delimiter(',');
  de->add_option("--model", de_model, "Classifier model")->required()->check(CLI::ExistingFile);
  de->add_option("--input", de_input, "Texts, one per line (default stdin)");
  de->add_option("--out", de_out, "Output file (default stdout)");
  de->callback([&] {
    action = [&] {
      const auto vocab = load_vocab_for(de_vocab, de_dicts);
      const auto dicts = load_dicts(de_dicts);
      const auto model = ClassifierModel::load(de_model);
      const Detector detector(vocab, dicts, model);
      const auto lines = read_input_lines(de_input, in);
      std::vector<TokenSequence> seqs;
      std::vector<std::size_t> where;
      for (std::size_t i = 0; i < lines.size(); ++i) {
        auto t = tokenize(lines[i], vocab);
        if (t.empty()) continue;
        seqs.push_back(std::move(t));
        where.push_back(i);
      }
      const auto results = detect_batch(detector, seqs);
      std::vector<nlohmann::ordered_json> rows(lines.size());
      for (std::size_t i = 0; i < lines.size(); ++i) {
        rows[i]["text_id"] = i;
        rows[i]["error"] = "empty text";
      }
      for (std::size_t j = 0; j < results.size(); ++j) rows[where[j]] = result_json(where[j], results[j]);
      Sink sink(de_out, out);
      for (const auto& r : rows) *sink << r.dump() << '\n';
      sink.close();
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Score detection against labels");
  std::string ev_vocab, ev_model, ev_data, ev_pred, ev_labels, ev_out, ev_cm;
  std::vector<std::string> ev_dicts;
  ev->add_option("--vocab", ev_vocab, "Vocabulary file (default: vocab.txt by the dictionaries)")->check(CLI::ExistingFile);
  ev->add_option("--dicts", ev_dicts, "Dictionaries, in model source order")->delimiter(',');
  ev->add_option("--model", ev_model, "Classifier model")->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Labeled texts: source<TAB>text per line");
  ev->add_option("--predictions", ev_pred, "detect output to score instead of running detection")->check(CLI::ExistingFile);
  ev->add_option("--labels", ev_labels, "True source per line of --predictions")->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Report JSON (default stdout)");
  ev->add_option("--confusion", ev_cm, "Also write the confusion matrix as CSV");
  ev->callback([&] {
    action = [&] {
      EvalReport report;
      if (!ev_pred.empty()) {
        if (ev_labels.empty()) throw UsageError("--predictions needs --labels");
        const auto pred_lines = read_lines(ev_pred);
        const auto label_lines = read_lines(ev_labels);
        if (pred_lines.size() != label_lines.size()) {
          throw Error("--predictions and --labels have different line counts");
        }
        std::vector<std::string> names;
        std::vector<std::vector<std::size_t>> rankings;
        std::vector<std::string> truth;
        for (std::size_t i = 0; i < pred_lines.size(); ++i) {
          json j;
          try {
            j = json::parse(pred_lines[i]);
          } catch (const json::parse_error& e) {
            throw Error("predictions line " + std::to_string(i + 1) + ": " + e.what());
          }
          if (j.contains("error")) continue;
          std::vector<std::string> order;
          for (const auto& r : j.at("ranked")) order.push_back(r.at("source").get<std::string>());
          if (names.empty()) {
            names = order;
            std::sort(names.begin(), names.end());
          }
          std::vector<std::size_t> ranking;
          for (const auto& s : order) ranking.push_back(label_of(s, names, i + 1));
          rankings.push_back(std::move(ranking));
          truth.push_back(label_lines[i]);
        }
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < truth.size(); ++i) labels.push_back(label_of(truth[i], names, i + 1));
        report = evaluate(rankings, labels, names);
      } else {
        if (ev_dicts.empty() || ev_model.empty() || ev_data.empty()) {
          throw UsageError("eval needs --dicts, --model, --data (or --predictions with --labels)");
        }
        const auto vocab = load_vocab_for(ev_vocab, ev_dicts);
        const auto dicts = load_dicts(ev_dicts);
        const auto model = ClassifierModel::load(ev_model);
        const Detector detector(vocab, dicts, model);
        const auto names = dict_names(dicts);
        const auto data = read_labeled(ev_data, in, names);
        std::vector<TokenSequence> seqs;
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < data.texts.size(); ++i) {
          auto t = tokenize(data.texts[i], vocab);
          if (t.empty()) continue;
          seqs.push_back(std::move(t));
          labels.push_back(data.labels[i]);
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto results = detect_batch(detector, seqs);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        report = evaluate(results, labels, names, dt.count());
      }
      Sink sink(ev_out, out);
      *sink << report.to_json();
      sink.close();
      if (!ev_cm.empty()) write_file(ev_cm, report.confusion.to_csv(report.source_names));
    };
  });

  // perturb
  auto* pe = app.add_subcommand("perturb", "Randomly delete words from each line");
  std::string pe_input, pe_out;
  double pe_rate = 0;
  pe->add_option("--rate", pe_rate, "Deletion probability per word")->required()->check(CLI::Range(0.0, 1.0));
  pe->add_option("--input", pe_input, "Texts, one per line (default stdin)");
  pe->add_option("--out", pe_out, "Output file (default stdout)");
  pe->callback([&] {
    action = [&] {
      const auto lines = read_input_lines(pe_input, in);
      Sink sink(pe_out, out);
      for (std::size_t i = 0; i < lines.size(); ++i) {
        *sink << perturb_delete(lines[i], pe_rate, derive_seed(seed(), i)) << '\n';
      }
      sink.close();
    };
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "Re-run the experiment across values of one parameter");
  std::string sw_axis, sw_values, sw_out, sw_reports;
  sw->add_option("--axis", sw_axis, "n_max, K, temperature, or delete_rate")->required();
  sw->add_option("--values", sw_values, "Comma-separated values")->required();
  sw->add_option("--out", sw_out, "CSV output (default stdout)");
  sw->add_option("--reports", sw_reports, "Directory for one JSON report per value");
  sw->callback([&] {
    action = [&] {
      SweepAxis axis;
      try {
        axis = parse_sweep_axis(sw_axis);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const auto values = parse_values(sw_values);
      auto cfg = defaults;
      cfg.seed = seed();
      const auto rows = sweep(cfg, axis, values);
      Sink sink(sw_out, out);
      *sink << sweep_csv(axis, rows);
      sink.close();
      if (!sw_reports.empty()) {
        fs::create_directories(sw_reports);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          write_file((fs::path(sw_reports) / (to_string(axis) + "_" + std::to_string(i) + ".json")).string(),
                     rows[i].report.to_json());
        }
      }
    };
  });

  // bench
  auto* be = app.add_subcommand("bench", "Time detection single-threaded and multi-threaded");
  std::string be_vocab, be_model, be_input, be_out;
  std::vector<std::string> be_dicts;
  std::size_t be_count = 1000;
  be->add_option("--vocab", be_vocab, "Vocabulary file (default: vocab.txt by the dictionaries)")->check(CLI::ExistingFile);
  be->add_option("--dicts", be_dicts, "Dictionaries")->delimiter(',');
  be->add_option("--model", be_model, "Classifier model")->check(CLI::ExistingFile);
  be->add_option("--input", be_input, "Texts, one per line");
  be->add_option("--count", be_count, "Texts to time (inputs are cycled)")->check(CLI::PositiveNumber);
  be->add_option("--out", be_out, "JSON output (default stdout)");
  be->callback([&] {
    action = [&] {
      auto time_on = [&](const std::vector<TokenSequence>& pool, const Vocabulary& vocab,
                         std::span<const NgramDictionary> dicts, const ClassifierModel& model) {
        if (pool.empty()) throw Error("no texts to benchmark");
        std::vector<TokenSequence> texts;
        for (std::size_t i = 0; i < be_count; ++i) texts.push_back(pool[i % pool.size()]);
        return bench_detect(texts, vocab, dicts, model);
      };
      BenchResult r;
      if (!be_input.empty()) {
        if (be_dicts.empty() || be_model.empty()) {
          throw UsageError("bench --input needs --dicts and --model");
        }
        const auto vocab = load_vocab_for(be_vocab, be_dicts);
        const auto dicts = load_dicts(be_dicts);
        const auto model = ClassifierModel::load(be_model);
        std::vector<TokenSequence> pool;
        for (const auto& l : read_lines(be_input)) {
          auto t = tokenize(l, vocab);
          if (!t.empty()) pool.push_back(std::move(t));
        }
        r = time_on(pool, vocab, dicts, model);
      } else {
        auto cfg = defaults;
        cfg.seed = seed();
        const auto exp = build_experiment(cfg);
        std::vector<TokenSequence> pool;
        for (const auto& t : exp.texts) pool.push_back(t.tokens);
        r = time_on(pool, *exp.vocab, exp.dicts, exp.classifier);
      }
      Sink sink(be_out, out);
      *sink << r.to_json();
      sink.close();
    };
  });

  // dict-inspect
  auto* di = app.add_subcommand("dict-inspect", "Print a dictionary's header and per-level stats");
  std::string di_path;
  di->add_option("dict", di_path, "Dictionary file")->required();
  di->callback([&] {
    action = [&] {
      const auto path = resolve_dict_path(di_path);
      const auto d = NgramDictionary::load(path);
      nlohmann::ordered_json j;
      j["source"] = d.source_name();
      j["n_max"] = d.n_max();
      j["id_width"] = d.id_width();
      j["prob_width"] = d.quantized() ? 2 : 8;
      char hex[17];
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(d.vocab_hash()));
      j["vocab_hash"] = hex;
      j["file_bytes"] = fs::file_size(path);
      j["levels"] = nlohmann::ordered_json::array();
      for (const auto& s : d.stats()) {
        j["levels"].push_back({{"n", s.n}, {"contexts", s.keys}, {"entries", s.entries}, {"bytes", s.bytes}});
      }
      out << j.dump(2) << '\n';
    };
  });

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run the full desk-scale pipeline");
  std::string ex_dir;
  std::vector<std::string> ex_sources;
  ex->add_option("--out-dir", ex_dir, "Write vocabulary, dictionaries, model, texts and report here");
  ex->add_option("--source", ex_sources,
                 "Model source as name=corpus (replaces the config's sources)")->delimiter(',');
  ex->callback([&] {
    action = [&] {
      auto cfg = defaults;
      cfg.seed = seed();
      if (!ex_sources.empty()) {
        cfg.sources.clear();
        for (const auto& s : ex_sources) {
          const auto eq = s.find('=');
          if (eq == std::string::npos) throw UsageError("--source expects name=corpus");
          cfg.sources.push_back({s.substr(0, eq), s.substr(eq + 1), "", ""});
        }
      }
      if (cfg.sources.empty()) {
        for (const char* t : {"science", "sports", "cooking"}) {
          cfg.sources.push_back({t, std::string("builtin:") + t, "", ""});
        }
      }
      const auto t0 = std::chrono::steady_clock::now();
      const auto exp = build_experiment(cfg);
      const auto report = evaluate_experiment(exp);
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      err << "experiment finished in " << dt.count() << " s\n";
      if (!ex_dir.empty()) {
        const fs::path dir(ex_dir);
        fs::create_directories(dir);
        exp.vocab->save((dir / "vocab.txt").string());
        for (const auto& d : exp.dicts) d.save((dir / (d.source_name() + ".dict")).string());
        exp.classifier.save((dir / "model.json").string());
        write_file((dir / "config.json").string(), exp.config.to_json());
        write_file((dir / "report.json").string(), report.to_json());
        std::ofstream ev(dir / "eval.tsv", std::ios::binary);
        for (const auto& t : exp.texts) {
          if (t.role == Role::kEval) {
            ev << exp.source_names[t.label] << '\t' << detokenize(t.tokens, *exp.vocab) << '\n';
          }
        }
        if (!ev) throw Error("failed writing eval.tsv");
      }
      out << report.to_json();
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (!config_path.empty()) defaults = ExperimentConfig::load(config_path);
    if (threads > 0) omp_set_num_threads(threads);
    if (action) action();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace llmdet::cli
