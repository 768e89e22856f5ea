#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "llmdet/types.hpp"

namespace llmdet {

class ProbabilityProvider;

inline constexpr int kMinOrder = 2;
inline constexpr int kMaxOrder = 4;
inline constexpr std::size_t kMaxContext = kMaxOrder - 1;

// Entries below this are dropped before storage: they are not representable
// in binary16 with bounded relative error.
inline constexpr double kProbFloor = 0x1.0p-24;

// Fixed-capacity n-gram context; unused slots stay zero so equal contexts
// hash and compare equal.
struct NgramKey {
  std::array<TokenId, kMaxContext> ids{};
  std::uint8_t len = 0;

  NgramKey() = default;
  explicit NgramKey(std::span<const TokenId> ctx);

  std::span<const TokenId> context() const noexcept { return {ids.data(), len}; }
  friend bool operator==(const NgramKey&, const NgramKey&) = default;
  friend auto operator<=>(const NgramKey& a, const NgramKey& b) {
    return std::lexicographical_compare_three_way(a.ids.begin(), a.ids.begin() + a.len,
                                                  b.ids.begin(), b.ids.begin() + b.len);
  }
};

struct NgramKeyHash {
  std::size_t operator()(const NgramKey& k) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ k.len;
    for (std::size_t i = 0; i < k.len; ++i) {
      h ^= k.ids[i];
      h *= 0x100000001b3ULL;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

struct NgramCount {
  std::vector<TokenId> gram;  // full n-token window
  std::uint64_t count = 0;
  friend bool operator==(const NgramCount&, const NgramCount&) = default;
};

// The k most frequent n-grams over all texts (ties: lexicographic by token id).
// k == 0 keeps every observed n-gram.
std::vector<NgramCount> count_top_ngrams(std::span<const TokenSequence> texts, int n, std::size_t k);

// Distinct (n-1)-token contexts of the given n-grams, sorted.
std::vector<NgramKey> contexts_of(std::span<const NgramCount> grams);

// One gram order of a dictionary: context -> top-K continuations, stored
// contiguously per key.
class DictLevel {
 public:
  DictLevel() = default;
  explicit DictLevel(int n) : n_(n) {}

  int order() const noexcept { return n_; }
  std::size_t key_count() const noexcept { return index_.size(); }
  std::size_t entry_count() const noexcept { return entries_.size(); }

  // Entries must already be in canonical order. Replaces nothing: a key may
  // be inserted once.
  void insert(const NgramKey& key, std::span<const ProbEntry> entries);

  // Empty span when the key is absent.
  std::span<const ProbEntry> find(std::span<const TokenId> context) const;

  // Keys in lexicographic order.
  std::vector<NgramKey> sorted_keys() const;

  // Rewrites every stored probability with f and re-establishes canonical order.
  template <typename F>
  void transform_probs(F&& f);

  bool operator==(const DictLevel& other) const;

 private:
  struct Slot {
    std::uint32_t offset = 0;
    std::uint32_t count = 0;
  };
  int n_ = 0;
  std::unordered_map<NgramKey, Slot, NgramKeyHash> index_;
  std::vector<ProbEntry> entries_;

  void resort_all();
};

template <typename F>
void DictLevel::transform_probs(F&& f) {
  for (auto& e : entries_) e.prob = f(e.prob);
  resort_all();
}

struct LevelStats {
  int n = 0;
  std::size_t keys = 0;
  std::size_t entries = 0;
  std::size_t bytes = 0;  // serialized size of the level
};

class NgramDictionary {
 public:
  NgramDictionary() = default;
  NgramDictionary(std::string source_name, int n_max, std::uint64_t vocab_hash);

  const std::string& source_name() const noexcept { return source_name_; }
  void set_source_name(std::string name) { source_name_ = std::move(name); }
  int n_max() const noexcept { return n_max_; }
  std::uint64_t vocab_hash() const noexcept { return vocab_hash_; }
  bool quantized() const noexcept { return quantized_; }

  DictLevel& level(int n);
  const DictLevel& level(int n) const;

  // Exact-length match at order len(context)+1; nullopt is a miss.
  std::optional<double> lookup(std::span<const TokenId> context, TokenId next) const;

  // Binary16 probabilities, re-sorted with the canonical tie rule. Idempotent.
  NgramDictionary quantized_copy() const;
  void quantize_in_place();

  // Copy restricted to orders 2..n_max.
  NgramDictionary truncated(int n_max) const;

  std::string serialize() const;
  void save(const std::string& path) const;
  // Source name is not part of the file format; callers supply it.
  static NgramDictionary parse(std::string_view bytes, std::string source_name);
  static NgramDictionary load(const std::string& path);
  static NgramDictionary load(const std::string& path, std::string source_name);

  std::vector<LevelStats> stats() const;
  // Bytes per token id in the serialized form (2 or 4).
  int id_width() const;

  // Compares levels, flags, and vocabulary binding; the name is ignored.
  bool operator==(const NgramDictionary& other) const;

 private:
  std::string source_name_;
  int n_max_ = 0;
  std::uint64_t vocab_hash_ = 0;
  bool quantized_ = false;
  std::vector<DictLevel> levels_;  // index n-2
};

NgramDictionary quantize(const NgramDictionary& dict);

struct BuildOptions {
  int n_max = 4;
  // Contexts per order (k); 0 means every observed n-gram.
  std::map<int, std::size_t> top_ngrams{{2, 100000}, {3, 100000}, {4, 100000}};
  // Continuations per context (K).
  std::map<int, std::size_t> top_next{{2, 2000}, {3, 100}, {4, 100}};
  bool quantize = false;
};

// Contexts to query per order, keyed by n.
using ContextPlan = std::map<int, std::vector<NgramKey>>;

ContextPlan plan_contexts(std::span<const TokenSequence> texts, const BuildOptions& options);

// Queries the provider for every planned context. Parallel over contexts when
// the provider supports concurrent queries.
NgramDictionary build_dictionary(const ProbabilityProvider& provider, const ContextPlan& plan,
                                 const std::map<int, std::size_t>& top_next, int n_max);

// Single-threaded reference of build_dictionary.
NgramDictionary build_dictionary_serial(const ProbabilityProvider& provider,
                                        const ContextPlan& plan,
                                        const std::map<int, std::size_t>& top_next, int n_max);

// Convenience: plan, build, and optionally quantize.
NgramDictionary build_dictionary(const ProbabilityProvider& provider,
                                 std::span<const TokenSequence> statistical_texts,
                                 const BuildOptions& options);

struct StorageEstimate {
  std::uint64_t bytes = 0;
  std::vector<std::uint64_t> breakdown;  // per order, n = 2..n_max
};

// Probability payload only: (n_max - 1) levels of k contexts times K values.
StorageEstimate estimate_storage(int n_max, std::uint64_t k, std::uint64_t K,
                                 std::uint64_t bytes_per_prob);

}  // namespace llmdet
