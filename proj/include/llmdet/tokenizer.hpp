#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "llmdet/types.hpp"

namespace llmdet {

// Dense token-id assignment shared by dictionary construction and detection.
// Id 0 is always the unknown-token slot.
class Vocabulary {
 public:
  static constexpr TokenId kUnkId = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  // tokens[0] must be "<unk>"; the rest must be unique and nonempty.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId unk_id() const noexcept { return kUnkId; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }

  // Returns unk_id for strings outside the vocabulary.
  TokenId id_of(std::string_view token) const;
  bool contains(std::string_view token) const;

  // One token per line; line number is the id.
  std::string serialize() const;
  void save(const std::string& path) const;
  static Vocabulary parse(std::string_view bytes);
  static Vocabulary load(const std::string& path);

  // FNV-1a over the serialized file bytes; binds dictionaries to this vocabulary.
  std::uint64_t hash() const noexcept { return hash_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::uint64_t hash_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// NFC-normalize, lowercase, then split into maximal letter/digit runs and
// single punctuation characters. Whitespace separates and is discarded.
std::vector<std::string> split_tokens(std::string_view text);

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);

// Frequency-ranked vocabulary (ties lexicographic) truncated to max_size
// entries including <unk>. Throws Error("empty corpus") if no token is seen.
Vocabulary build_vocabulary(std::span<const std::string> corpus, std::size_t max_size);

// Token strings joined with single spaces.
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);

}  // namespace llmdet
