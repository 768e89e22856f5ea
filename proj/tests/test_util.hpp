#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "llmdet/tokenizer.hpp"
#include "llmdet/types.hpp"

namespace llmdet::testing {

inline Vocabulary vocab_of(std::vector<std::string> words) {
  words.insert(words.begin(), "<unk>");
  return Vocabulary(std::move(words));
}

inline TokenSequence seq(std::initializer_list<TokenId> ids) { return TokenSequence{std::vector<TokenId>(ids)}; }

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("llmdet_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  f << data;
}

// Random token sequences over ids [0, vocab_size).
inline std::vector<TokenSequence> random_texts(std::size_t count, std::size_t len, std::size_t vocab_size,
                                               std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<TokenSequence> out(count);
  for (auto& t : out) {
    for (std::size_t i = 0; i < len; ++i) t.ids.push_back(static_cast<TokenId>(gen() % vocab_size));
  }
  return out;
}

}  // namespace llmdet::testing
