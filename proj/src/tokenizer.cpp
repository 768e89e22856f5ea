#include "llmdet/tokenizer.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "llmdet/error.hpp"

namespace llmdet {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{std::string(kUnkToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_[0] != kUnkToken) {
    throw Error("vocabulary must start with the <unk> token");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty() || t.find('\n') != std::string::npos) {
      throw Error("invalid vocabulary token at id " + std::to_string(i));
    }
    if (!index_.emplace(t, static_cast<TokenId>(i)).second) {
      throw Error("duplicate vocabulary token '" + t + "'");
    }
  }
  hash_ = fnv1a64(serialize());
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write vocabulary file " + path);
  f << serialize();
  if (!f) throw Error("failed writing vocabulary file " + path);
}

Vocabulary Vocabulary::parse(std::string_view bytes) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    std::string_view line = bytes.substr(pos, nl - pos);
    if (line.empty()) throw FormatError("empty vocabulary line", pos);
    tokens.emplace_back(line);
    pos = nl + 1;
  }
  if (tokens.empty() || tokens[0] != kUnkToken) {
    throw FormatError("vocabulary must start with <unk>", 0);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open vocabulary file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

namespace {

enum class CharClass { kWord, kSpace, kPunct };

CharClass classify(UChar32 c) {
  if (u_isalpha(c) || u_isdigit(c) || (U_GET_GC_MASK(c) & U_GC_M_MASK)) return CharClass::kWord;
  if (u_isUWhiteSpace(c) || u_iscntrl(c)) return CharClass::kSpace;
  return CharClass::kPunct;
}

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw Error("ICU NFC normalizer unavailable");
  return *n;
}

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  if (text.empty()) return out;

  icu::UnicodeString raw = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString norm = nfc().normalize(raw, status);
  if (U_FAILURE(status)) throw Error("unicode normalization failed");
  norm.toLower(icu::Locale::getRoot());

  icu::UnicodeString run;
  auto flush = [&] {
    if (run.isEmpty()) return;
    std::string s;
    run.toUTF8String(s);
    out.push_back(std::move(s));
    run.remove();
  };
  for (int32_t i = 0; i < norm.length();) {
    UChar32 c = norm.char32At(i);
    i += U16_LENGTH(c);
    switch (classify(c)) {
      case CharClass::kWord:
        run.append(c);
        break;
      case CharClass::kSpace:
        flush();
        break;
      case CharClass::kPunct:
        flush();
        run.append(c);
        flush();
        break;
    }
  }
  flush();
  return out;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  for (const auto& t : split_tokens(text)) seq.ids.push_back(vocab.id_of(t));
  return seq;
}

Vocabulary build_vocabulary(std::span<const std::string> corpus, std::size_t max_size) {
  if (max_size < 2) throw Error("vocabulary max_size must be at least 2");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& text : corpus) {
    for (auto& t : split_tokens(text)) ++counts[std::move(t)];
  }
  if (counts.empty()) throw Error("empty corpus");

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort on frequency gives the tie rule.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size - 1) ranked.resize(max_size - 1);

  std::vector<std::string> tokens{std::string(Vocabulary::kUnkToken)};
  for (auto& [tok, _] : ranked) tokens.push_back(tok);
  return Vocabulary(std::move(tokens));
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(seq.ids[i]);
  }
  return out;
}

}  // namespace llmdet
