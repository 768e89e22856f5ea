#include "llmdet/dictionary.hpp"

#include <algorithm>
#include <cstring>
#include <exception>
#include <fstream>
#include <sstream>

#include "llmdet/error.hpp"
#include "llmdet/half.hpp"
#include "llmdet/provider.hpp"

namespace llmdet {

namespace {
constexpr char kMagic[8] = {'L', 'L', 'M', 'D', 'I', 'C', 'T', '1'};
constexpr std::size_t kHeaderBytes = 8 + 1 + 1 + 1 + 8;

std::string context_string(std::span<const TokenId> ctx) {
  std::string s = "[";
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(ctx[i]);
  }
  return s + "]";
}
}  // namespace

NgramKey::NgramKey(std::span<const TokenId> ctx) {
  if (ctx.empty() || ctx.size() > kMaxContext) {
    throw Error("n-gram context length must be in [1, " + std::to_string(kMaxContext) + "]");
  }
  len = static_cast<std::uint8_t>(ctx.size());
  std::copy(ctx.begin(), ctx.end(), ids.begin());
}

std::vector<NgramCount> count_top_ngrams(std::span<const TokenSequence> texts, int n,
                                         std::size_t k) {
  if (n < 2) throw Error("n-gram order must be at least 2");
  std::map<std::vector<TokenId>, std::uint64_t> counts;
  std::vector<TokenId> window(static_cast<std::size_t>(n));
  for (const auto& seq : texts) {
    if (seq.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + n <= seq.size(); ++i) {
      std::copy_n(seq.ids.begin() + static_cast<std::ptrdiff_t>(i), n, window.begin());
      ++counts[window];
    }
  }
  std::vector<NgramCount> out;
  out.reserve(counts.size());
  for (auto& [gram, c] : counts) out.push_back({gram, c});
  // Map order is lexicographic, so stability supplies the tie rule.
  std::stable_sort(out.begin(), out.end(),
                   [](const NgramCount& a, const NgramCount& b) { return a.count > b.count; });
  if (k != 0 && out.size() > k) out.resize(k);
  return out;
}

std::vector<NgramKey> contexts_of(std::span<const NgramCount> grams) {
  std::vector<NgramKey> keys;
  keys.reserve(grams.size());
  for (const auto& g : grams) {
    keys.emplace_back(std::span<const TokenId>(g.gram.data(), g.gram.size() - 1));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

// ---------------------------------------------------------------------------
// DictLevel

void DictLevel::insert(const NgramKey& key, std::span<const ProbEntry> entries) {
  if (key.len != n_ - 1) throw Error("context length does not match level order");
  if (entries.empty()) return;
  Slot slot{static_cast<std::uint32_t>(entries_.size()),
            static_cast<std::uint32_t>(entries.size())};
  if (!index_.emplace(key, slot).second) {
    throw Error("duplicate dictionary key " + context_string(key.context()));
  }
  entries_.insert(entries_.end(), entries.begin(), entries.end());
}

std::span<const ProbEntry> DictLevel::find(std::span<const TokenId> context) const {
  if (context.size() != static_cast<std::size_t>(n_ - 1)) return {};
  NgramKey key;
  key.len = static_cast<std::uint8_t>(context.size());
  std::copy(context.begin(), context.end(), key.ids.begin());
  auto it = index_.find(key);
  if (it == index_.end()) return {};
  return {entries_.data() + it->second.offset, it->second.count};
}

std::vector<NgramKey> DictLevel::sorted_keys() const {
  std::vector<NgramKey> keys;
  keys.reserve(index_.size());
  for (const auto& [k, _] : index_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

void DictLevel::resort_all() {
  for (const auto& [_, slot] : index_) {
    auto first = entries_.begin() + slot.offset;
    std::sort(first, first + slot.count, entry_order);
  }
}

bool DictLevel::operator==(const DictLevel& other) const {
  if (n_ != other.n_ || index_.size() != other.index_.size()) return false;
  for (const auto& [key, _] : index_) {
    auto a = find(key.context());
    auto b = other.find(key.context());
    if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// NgramDictionary

NgramDictionary::NgramDictionary(std::string source_name, int n_max, std::uint64_t vocab_hash)
    : source_name_(std::move(source_name)), n_max_(n_max), vocab_hash_(vocab_hash) {
  if (n_max < kMinOrder || n_max > kMaxOrder) {
    throw Error("n_max must be in [2, 4], got " + std::to_string(n_max));
  }
  for (int n = kMinOrder; n <= n_max; ++n) levels_.emplace_back(n);
}

DictLevel& NgramDictionary::level(int n) {
  if (n < kMinOrder || n > n_max_) throw Error("no dictionary level for order " + std::to_string(n));
  return levels_[static_cast<std::size_t>(n - kMinOrder)];
}

const DictLevel& NgramDictionary::level(int n) const {
  return const_cast<NgramDictionary*>(this)->level(n);
}

std::optional<double> NgramDictionary::lookup(std::span<const TokenId> context,
                                              TokenId next) const {
  const int n = static_cast<int>(context.size()) + 1;
  if (n < kMinOrder || n > n_max_) return std::nullopt;
  for (const auto& e : levels_[static_cast<std::size_t>(n - kMinOrder)].find(context)) {
    if (e.token == next) return e.prob;
  }
  return std::nullopt;
}

void NgramDictionary::quantize_in_place() {
  for (auto& lvl : levels_) lvl.transform_probs([](double p) { return half::round_trip(p); });
  quantized_ = true;
}

NgramDictionary NgramDictionary::quantized_copy() const {
  NgramDictionary copy = *this;
  copy.quantize_in_place();
  return copy;
}

NgramDictionary quantize(const NgramDictionary& dict) { return dict.quantized_copy(); }

NgramDictionary NgramDictionary::truncated(int n_max) const {
  if (n_max < kMinOrder || n_max > n_max_) throw Error("cannot truncate to order " + std::to_string(n_max));
  NgramDictionary copy = *this;
  copy.n_max_ = n_max;
  copy.levels_.resize(static_cast<std::size_t>(n_max - kMinOrder + 1));
  return copy;
}

int NgramDictionary::id_width() const {
  if (!quantized_) return 4;
  for (const auto& lvl : levels_) {
    for (const auto& key : lvl.sorted_keys()) {
      for (TokenId id : key.context()) {
        if (id > 0xffff) return 4;
      }
      for (const auto& e : lvl.find(key.context())) {
        if (e.token > 0xffff) return 4;
      }
    }
  }
  return 2;
}

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    }
  }
  void id(TokenId v, int width) {
    if (width == 2) le<std::uint16_t>(static_cast<std::uint16_t>(v));
    else le<std::uint32_t>(v);
  }
  void prob(double p, int width) {
    switch (width) {
      case 2: le<std::uint16_t>(half::from_double(p)); break;
      case 4: le<std::uint32_t>(std::bit_cast<std::uint32_t>(static_cast<float>(p))); break;
      default: le<std::uint64_t>(std::bit_cast<std::uint64_t>(p)); break;
    }
  }
  std::string take() { return std::move(out_); }
  std::size_t size() const { return out_.size(); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  std::uint64_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  TokenId id(int width) {
    return width == 2 ? le<std::uint16_t>("token id") : le<std::uint32_t>("token id");
  }
  double prob(int width) {
    switch (width) {
      case 2: return half::to_double(le<std::uint16_t>("probability"));
      case 4: return std::bit_cast<float>(le<std::uint32_t>("probability"));
      default: return std::bit_cast<double>(le<std::uint64_t>("probability"));
    }
  }
  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw FormatError(std::string("truncated dictionary while reading ") + what, pos_);
    }
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

void write_level(Writer& w, const DictLevel& lvl, int idw, int pw) {
  auto keys = lvl.sorted_keys();
  w.le<std::uint32_t>(static_cast<std::uint32_t>(keys.size()));
  for (const auto& key : keys) {
    for (TokenId id : key.context()) w.id(id, idw);
    auto entries = lvl.find(key.context());
    if (entries.size() > 0xffff) throw Error("too many entries for one dictionary key");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(entries.size()));
    for (const auto& e : entries) {
      w.id(e.token, idw);
      w.prob(e.prob, pw);
    }
  }
}

}  // namespace

std::string NgramDictionary::serialize() const {
  Writer w;
  const int idw = id_width();
  const int pw = quantized_ ? 2 : 8;
  w.bytes(kMagic, sizeof kMagic);
  w.le<std::uint8_t>(static_cast<std::uint8_t>(idw));
  w.le<std::uint8_t>(static_cast<std::uint8_t>(pw));
  w.le<std::uint8_t>(static_cast<std::uint8_t>(n_max_));
  w.le<std::uint64_t>(vocab_hash_);
  for (const auto& lvl : levels_) write_level(w, lvl, idw, pw);
  return w.take();
}

std::vector<LevelStats> NgramDictionary::stats() const {
  const int idw = id_width();
  const int pw = quantized_ ? 2 : 8;
  std::vector<LevelStats> out;
  for (const auto& lvl : levels_) {
    Writer w;
    write_level(w, lvl, idw, pw);
    out.push_back({lvl.order(), lvl.key_count(), lvl.entry_count(), w.size()});
  }
  return out;
}

NgramDictionary NgramDictionary::parse(std::string_view bytes, std::string source_name) {
  Reader r(bytes);
  auto magic = r.take(sizeof kMagic, "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("bad dictionary magic", 0);
  }
  const auto idw_pos = r.pos();
  const int idw = r.le<std::uint8_t>("id width");
  if (idw != 2 && idw != 4) throw FormatError("unsupported id width " + std::to_string(idw), idw_pos);
  const auto pw_pos = r.pos();
  const int pw = r.le<std::uint8_t>("prob width");
  if (pw != 2 && pw != 4 && pw != 8) {
    throw FormatError("unsupported probability width " + std::to_string(pw), pw_pos);
  }
  const auto n_pos = r.pos();
  const int n_max = r.le<std::uint8_t>("n_max");
  if (n_max < kMinOrder || n_max > kMaxOrder) {
    throw FormatError("n_max out of range: " + std::to_string(n_max), n_pos);
  }
  const auto vocab_hash = r.le<std::uint64_t>("vocab hash");

  NgramDictionary dict(std::move(source_name), n_max, vocab_hash);
  dict.quantized_ = (pw == 2);
  std::vector<TokenId> ctx;
  std::vector<ProbEntry> entries;
  for (int n = kMinOrder; n <= n_max; ++n) {
    auto& lvl = dict.level(n);
    const auto keys = r.le<std::uint32_t>("key count");
    std::optional<NgramKey> prev;
    for (std::uint32_t k = 0; k < keys; ++k) {
      const auto rec_pos = r.pos();
      ctx.resize(static_cast<std::size_t>(n - 1));
      for (auto& id : ctx) id = r.id(idw);
      NgramKey key(ctx);
      if (prev && !(*prev < key)) throw FormatError("dictionary keys not strictly sorted", rec_pos);
      prev = key;
      const auto count = r.le<std::uint16_t>("entry count");
      if (count == 0) throw FormatError("dictionary key with no entries", rec_pos);
      entries.resize(count);
      for (auto& e : entries) {
        const auto entry_pos = r.pos();
        e.token = r.id(idw);
        e.prob = r.prob(pw);
        if (!(e.prob > 0.0 && e.prob <= 1.0)) {
          throw FormatError("probability outside (0, 1]", entry_pos);
        }
      }
      if (!std::is_sorted(entries.begin(), entries.end(), entry_order)) {
        throw FormatError("entries not in canonical order", rec_pos);
      }
      lvl.insert(key, entries);
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after dictionary", r.pos());
  return dict;
}

namespace {
std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string stem_of(const std::string& path) {
  auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = base.find('.');
  return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}
}  // namespace

void NgramDictionary::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write dictionary file " + path);
  const auto bytes = serialize();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing dictionary file " + path);
}

NgramDictionary NgramDictionary::load(const std::string& path) {
  return load(path, stem_of(path));
}

NgramDictionary NgramDictionary::load(const std::string& path, std::string source_name) {
  return parse(read_file(path), std::move(source_name));
}

bool NgramDictionary::operator==(const NgramDictionary& other) const {
  return n_max_ == other.n_max_ && vocab_hash_ == other.vocab_hash_ &&
         quantized_ == other.quantized_ && levels_ == other.levels_;
}

// ---------------------------------------------------------------------------
// Construction

ContextPlan plan_contexts(std::span<const TokenSequence> texts, const BuildOptions& options) {
  ContextPlan plan;
  for (int n = kMinOrder; n <= options.n_max; ++n) {
    auto it = options.top_ngrams.find(n);
    const std::size_t k = it == options.top_ngrams.end() ? 0 : it->second;
    plan[n] = contexts_of(count_top_ngrams(texts, n, k));
  }
  return plan;
}

namespace {

std::size_t top_next_for(const std::map<int, std::size_t>& top_next, int n) {
  auto it = top_next.find(n);
  if (it == top_next.end()) throw Error("no top-K configured for order " + std::to_string(n));
  if (it->second == 0) throw Error("top-K must be at least 1");
  return it->second;
}

std::vector<ProbEntry> query_context(const ProbabilityProvider& provider, const NgramKey& key,
                                     std::size_t top_k, int n) {
  std::vector<ProbEntry> entries;
  try {
    entries = provider.next_token_distribution(key.context(), top_k);
  } catch (const std::exception& e) {
    throw ProviderError("provider '" + provider.name() + "' failed on order-" + std::to_string(n) +
                        " context " + context_string(key.context()) + ": " + e.what());
  }
  std::sort(entries.begin(), entries.end(), entry_order);
  if (entries.size() > top_k) entries.resize(top_k);
  std::erase_if(entries, [](const ProbEntry& e) { return !(e.prob >= kProbFloor); });
  for (const auto& e : entries) {
    if (e.prob > 1.0) {
      throw ProviderError("provider '" + provider.name() + "' returned probability above 1 for context " +
                          context_string(key.context()));
    }
  }
  return entries;
}

NgramDictionary build_impl(const ProbabilityProvider& provider, const ContextPlan& plan,
                           const std::map<int, std::size_t>& top_next, int n_max, bool parallel) {
  NgramDictionary dict(provider.name(), n_max, provider.vocab_hash());
  for (int n = kMinOrder; n <= n_max; ++n) {
    auto pit = plan.find(n);
    if (pit == plan.end()) continue;
    const auto& keys = pit->second;
    const std::size_t top_k = top_next_for(top_next, n);
    std::vector<std::vector<ProbEntry>> results(keys.size());

    if (parallel) {
      std::exception_ptr failure;
      std::ptrdiff_t failed_at = -1;
      const auto count = static_cast<std::ptrdiff_t>(keys.size());
#pragma omp parallel for schedule(dynamic, 64)
      for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
          results[static_cast<std::size_t>(i)] =
              query_context(provider, keys[static_cast<std::size_t>(i)], top_k, n);
        } catch (...) {
#pragma omp critical(llmdet_build_failure)
          if (failed_at < 0 || i < failed_at) {
            failed_at = i;
            failure = std::current_exception();
          }
        }
      }
      if (failure) std::rethrow_exception(failure);
    } else {
      for (std::size_t i = 0; i < keys.size(); ++i) {
        results[i] = query_context(provider, keys[i], top_k, n);
      }
    }

    auto& lvl = dict.level(n);
    for (std::size_t i = 0; i < keys.size(); ++i) lvl.insert(keys[i], results[i]);
  }
  return dict;
}

}  // namespace

NgramDictionary build_dictionary(const ProbabilityProvider& provider, const ContextPlan& plan,
                                 const std::map<int, std::size_t>& top_next, int n_max) {
  return build_impl(provider, plan, top_next, n_max, provider.concurrent());
}

NgramDictionary build_dictionary_serial(const ProbabilityProvider& provider,
                                        const ContextPlan& plan,
                                        const std::map<int, std::size_t>& top_next, int n_max) {
  return build_impl(provider, plan, top_next, n_max, false);
}

NgramDictionary build_dictionary(const ProbabilityProvider& provider,
                                 std::span<const TokenSequence> statistical_texts,
                                 const BuildOptions& options) {
  auto dict = build_dictionary(provider, plan_contexts(statistical_texts, options),
                               options.top_next, options.n_max);
  if (options.quantize) dict.quantize_in_place();
  return dict;
}

StorageEstimate estimate_storage(int n_max, std::uint64_t k, std::uint64_t K,
                                 std::uint64_t bytes_per_prob) {
  if (n_max < kMinOrder || k < 1 || K < 1 || bytes_per_prob < 1) {
    throw Error("storage estimate inputs must be positive (n_max >= 2)");
  }
  StorageEstimate est;
  for (int n = kMinOrder; n <= n_max; ++n) {
    est.breakdown.push_back(k * K * bytes_per_prob);
    est.bytes += est.breakdown.back();
  }
  return est;
}

}  // namespace llmdet
