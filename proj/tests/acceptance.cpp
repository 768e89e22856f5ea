// Acceptance checks. Prints one PASS/FAIL line per criterion; exits nonzero
// when any criterion fails.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "llmdet/classifier.hpp"
#include "llmdet/corpus.hpp"
#include "llmdet/detection.hpp"
#include "llmdet/dictionary.hpp"
#include "llmdet/harness.hpp"
#include "llmdet/metrics.hpp"
#include "llmdet/ngram_lm.hpp"
#include "llmdet/tokenizer.hpp"
#include "test_util.hpp"

using namespace llmdet;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  if (!o.pass) ++failures;
  std::printf("%s %s:%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str());
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

std::string report_key(EvalReport r) {
  r.wall_time_s = 0.0;
  return r.to_json();
}

ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.sources = {{"science", "builtin:science", "", ""},
               {"sports", "builtin:sports", "", ""},
               {"cooking", "builtin:cooking", "", ""}};
  return c;
}

void oracle_equivalence(Outcome& o) {
  const auto t0 = Clock::now();
  const auto corpus = builtin_corpus("science", 400, 1);
  const auto vocab = build_vocabulary(corpus, 50);
  std::vector<TokenSequence> seqs;
  for (const auto& d : corpus) seqs.push_back(tokenize(d, vocab));
  const auto lm = train_ngram_lm(seqs, 3, 0.1, vocab, "oracle");

  std::vector<TokenSequence> texts;
  for (std::size_t i = 0; i < 100; ++i) {
    TokenSequence prompt{{seqs[i].ids.front()}};
    texts.push_back(lm.generate(prompt, 40, 1.0, 1000 + i));
  }
  BuildOptions opt;
  opt.n_max = 3;
  opt.top_ngrams = {{2, 0}, {3, 0}};
  opt.top_next = {{2, vocab.size()}, {3, vocab.size()}};
  const auto dict = build_dictionary(lm, texts, opt);
  const auto qdict = quantize(dict);

  double max_abs = 0.0;
  double max_rel_q = 0.0;
  double min_scored = 1.0;
  for (const auto& t : texts) {
    const double exact = lm.average_nll(t);
    const auto pp = proxy_perplexity(t, dict);
    const auto qp = proxy_perplexity(t, qdict);
    max_abs = std::max(max_abs, std::fabs(pp.ppl - exact));
    max_rel_q = std::max(max_rel_q, std::fabs(qp.ppl - exact) / exact);
    min_scored = std::min(min_scored, pp.scored_fraction);
  }
  const double elapsed = seconds_since(t0);
  o.detail << " |V|=" << vocab.size() << " texts=" << texts.size() << " max_abs_err=" << max_abs
           << " max_rel_err_binary16=" << max_rel_q << " min_scored_fraction=" << min_scored
           << " time_s=" << elapsed;
  o.require(vocab.size() <= 50, "vocabulary <= 50 tokens");
  o.require(min_scored == 1.0, "every position scored");
  o.require(max_abs <= 1e-9, "unquantized within 1e-9");
  o.require(max_rel_q <= 5e-3, "binary16 within 5e-3 relative");
  o.require(elapsed < 10.0, "runtime < 10 s");
}

void metric_fixtures(Outcome& o) {
  const double f_a = 100 * f1(0.9854, 0.9900);
  const double f_b = 100 * f1(0.7609, 0.7813);
  const std::vector<double> llmdet{98.77, 77.09, 76.39, 91.27, 96.44, 97.98, 87.21, 83.87, 84.18};
  const std::vector<double> true_ppl{98.48, 97.22, 96.96, 80.60, 98.85, 99.34, 89.10, 94.35, 97.35};
  const double m_a = f1_macro(llmdet);
  const double m_b = f1_macro(true_ppl);
  const double r_t2 = efficiency_ratio(88.14, 94.65, 8678.76, 46410.15);
  const double r_zero = efficiency_ratio(86.56, 94.87, 2376.87, 1199.11);
  const double r_dgpt = efficiency_ratio(92.67, 94.87, 14354.61, 1199.11);
  const double r_t3 = efficiency_ratio(88.19, 94.87, 224.53, 1199.11);
  o.detail << " f1(98.54,99.00)=" << f_a << " f1(76.09,78.13)=" << f_b << " mean_a=" << m_a
           << " mean_b=" << m_b << " ratios=" << r_t2 << "," << r_zero << "," << r_dgpt << "," << r_t3;
  o.require(near(f_a, 98.77, 0.005), "f1(98.54, 99.00) = 98.77 +- 0.005");
  o.require(near(f_b, 77.09, 0.005), "f1(76.09, 78.13) = 77.09 +- 0.005");
  o.require(near(m_a, 88.14, 0.05), "mean 88.14 +- 0.05");
  o.require(near(m_b, 94.65, 0.05), "mean 94.65 +- 0.05");
  o.require(near(r_t2, 4.97, 0.02), "ratio 4.97 +- 0.02");
  o.require(near(r_zero, 0.46, 0.01), "ratio 0.46 +- 0.01");
  o.require(near(r_dgpt, 0.08, 0.01), "ratio 0.08 +- 0.01");
  o.require(near(r_t3, 4.96, 0.02), "ratio 4.96 +- 0.02");
}

void storage_fixture(Outcome& o) {
  const auto est = estimate_storage(4, 100000, 10000, 8);
  o.detail << " bytes=" << est.bytes << " GiB=" << static_cast<double>(est.bytes) / (1024.0 * 1024 * 1024);
  o.require(est.bytes == 24000000000ULL, "24e9 bytes");
}

void smoothing_cancellation(Outcome& o) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(1e-3, 1.0);
  double max_err = 0.0;
  std::size_t cases = 0;
  for (std::size_t L : {1u, 10u, 100u, 1000u}) {
    for (int v = 0; v < 1000; ++v) {
      const std::size_t c = 2 + gen() % 7;
      std::vector<double> p(c);
      double sum = 0;
      for (auto& x : p) sum += (x = u(gen));
      for (auto& x : p) x /= sum;
      std::vector<std::string> names(c);
      for (std::size_t i = 0; i < c; ++i) names[i] = "s" + std::to_string(i);
      const auto r = softmax_rank(smooth(p, L), names);
      for (const auto& s : r.ranked) max_err = std::max(max_err, std::fabs(s.prob - p[s.index]));
      ++cases;
    }
  }
  o.detail << " vectors=" << cases << " max_abs_err=" << max_err;
  o.require(max_err <= 1e-9, "within 1e-9");
}

void per_entry_quantization(const std::vector<NgramDictionary>& dicts, double& max_rel, std::size_t& checked) {
  const double threshold = std::ldexp(1.0, -14);
  for (const auto& d : dicts) {
    const auto q = quantize(d);
    for (int n = 2; n <= d.n_max(); ++n) {
      for (const auto& key : d.level(n).sorted_keys()) {
        const auto exact = d.level(n).find(key.ids);
        const auto approx = q.level(n).find(key.ids);
        for (const auto& e : exact) {
          if (e.prob < threshold) continue;
          for (const auto& a : approx) {
            if (a.token == e.token) {
              max_rel = std::max(max_rel, std::fabs(a.prob - e.prob) / e.prob);
              ++checked;
              break;
            }
          }
        }
      }
    }
  }
}

std::string artifact_round_trip(const Experiment& exp) {
  llmdet::testing::TempDir dir;
  std::string failed;
  const auto vpath = dir.file("vocab.txt");
  exp.vocab->save(vpath);
  const auto vbytes = llmdet::testing::slurp(vpath);
  Vocabulary::load(vpath).save(dir.file("vocab2.txt"));
  if (llmdet::testing::slurp(dir.file("vocab2.txt")) != vbytes) failed += " vocab";

  for (const auto& d : exp.dicts) {
    for (const auto& variant : {d, quantize(d)}) {
      const auto p1 = dir.file("a.dict");
      const auto p2 = dir.file("b.dict");
      variant.save(p1);
      NgramDictionary::load(p1).save(p2);
      if (llmdet::testing::slurp(p1) != llmdet::testing::slurp(p2) || llmdet::testing::slurp(p1) != variant.serialize()) {
        failed += " dict:" + d.source_name() + (variant.quantized() ? "(binary16)" : "");
      }
    }
  }

  exp.classifier.save(dir.file("m1.json"));
  ClassifierModel::load(dir.file("m1.json")).save(dir.file("m2.json"));
  if (llmdet::testing::slurp(dir.file("m1.json")) != llmdet::testing::slurp(dir.file("m2.json"))) failed += " model";

  const auto cfg = exp.config.to_json();
  if (ExperimentConfig::from_json(cfg).to_json() != cfg) failed += " config";
  return failed;
}

}  // namespace

int main() {
  omp_set_num_threads(1);
  std::printf("acceptance checks (single-threaded; %u hardware threads)\n", std::thread::hardware_concurrency());

  report("oracle_equivalence", oracle_equivalence);
  report("metric_fixtures", metric_fixtures);
  report("storage_fixture", storage_fixture);

  const auto t0 = Clock::now();
  std::optional<Experiment> exp;
  std::optional<EvalReport> base;
  double build_s = 0.0;
  try {
    exp.emplace(build_experiment(desk_config()));
    base = evaluate_experiment(*exp);
    build_s = seconds_since(t0);
  } catch (const std::exception& e) {
    std::printf("desk-scale experiment failed to build: %s\n", e.what());
  }

  report("end_to_end_attribution", [&](Outcome& o) {
    o.require(exp.has_value(), "experiment built");
    if (!exp) return;
    o.detail << " sources=" << exp->source_names.size() << " per_source=" << exp->config.samples_per_source
             << " eval_texts=" << exp->eval_texts().size() << " f1_macro=" << base->f1_macro
             << " R@1=" << base->r_at.at(1) << " R@2=" << base->r_at.at(2) << " R@3=" << base->r_at.at(3)
             << " time_s=" << build_s;
    o.require(base->f1_macro >= 0.70, "F1-Macro >= 0.70");
    o.require(base->r_at.at(1) <= base->r_at.at(2) && base->r_at.at(2) <= base->r_at.at(3), "R@1 <= R@2 <= R@3");
    o.require(build_s < 60.0, "full run < 60 s");
  });

  report("smoothing_cancellation", smoothing_cancellation);

  report("robustness_sweep", [&](Outcome& o) {
    o.require(exp.has_value(), "experiment built");
    if (!exp) return;
    const double rates[] = {0.0, 0.1, 0.3, 0.5};
    const auto rows = sweep(*exp, SweepAxis::kDeleteRate, rates);
    o.require(rows.size() == 4, "one row per rate");
    for (const auto& r : rows) {
      o.detail << " rate=" << r.value << "{R@1=" << r.report.r_at.at(1) << ",R@2=" << r.report.r_at.at(2)
               << ",R@3=" << r.report.r_at.at(3) << "}";
      o.require(r.report.r_at.count(1) && r.report.r_at.count(2) && r.report.r_at.count(3), "R@1..3 reported");
    }
    o.require(report_key(rows.at(0).report) == report_key(*base), "rate 0 matches the unperturbed report");
  });

  report("quantization", [&](Outcome& o) {
    o.require(exp.has_value(), "experiment built");
    if (!exp) return;
    double max_rel = 0.0;
    std::size_t checked = 0;
    per_entry_quantization(exp->dicts, max_rel, checked);
    std::vector<NgramDictionary> original = exp->dicts;
    for (auto& d : exp->dicts) d = quantize(d);
    retrain_classifier(*exp);
    const auto q = evaluate_experiment(*exp);
    exp->dicts = std::move(original);
    retrain_classifier(*exp);
    const double drop = base->f1_macro - q.f1_macro;
    o.detail << " entries_checked=" << checked << " max_rel_err=" << max_rel << " (bound " << std::ldexp(1.0, -11)
             << ") f1_macro=" << base->f1_macro << " f1_macro_binary16=" << q.f1_macro << " drop=" << drop;
    o.require(checked > 0, "entries checked");
    o.require(max_rel <= std::ldexp(1.0, -11), "per-entry relative error <= 2^-11");
    o.require(drop <= 0.02, "F1-Macro drop <= 0.02");
  });

  report("throughput_and_round_trip", [&](Outcome& o) {
    o.require(exp.has_value(), "experiment built");
    if (!exp) return;
    std::vector<TokenSequence> pool;
    for (const auto& t : exp->texts) pool.push_back(t.tokens);
    std::vector<TokenSequence> texts;
    for (std::size_t i = 0; i < 1000; ++i) texts.push_back(pool[i % pool.size()]);
    const Detector detector(*exp->vocab, exp->dicts, exp->classifier);
    const auto t1 = Clock::now();
    const auto results = detect_batch_serial(detector, texts);
    const double det_s = seconds_since(t1);
    o.detail << " texts=" << results.size() << " serial_time_s=" << det_s
             << " texts_per_s=" << static_cast<double>(results.size()) / det_s;
    o.require(results.size() >= 1000, ">= 1000 texts");
    o.require(det_s <= 30.0, "<= 30 s single-threaded");
    const auto failed = artifact_round_trip(*exp);
    o.detail << " round_trip=" << (failed.empty() ? "byte-stable" : "unstable:" + failed);
    o.require(failed.empty(), "byte-stable artifacts");
    if (std::thread::hardware_concurrency() < 4) {
      o.detail << " (multi-thread scaling not measured: fewer than 4 hardware threads)";
    }
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
