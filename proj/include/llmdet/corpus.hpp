#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace llmdet {

// One document per line; trailing '\r' stripped, empty lines kept.
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

// Names of the procedurally generated topical corpora ("human", "science",
// "sports", "cooking", "travel").
const std::vector<std::string>& builtin_corpus_names();

// Deterministic synthetic documents for a built-in topic: a small template
// grammar over shared function words plus topic-specific content words.
std::vector<std::string> builtin_corpus(const std::string& topic, std::size_t docs,
                                        std::uint64_t seed);

// "builtin:<topic>" -> builtin_corpus(topic, docs, seed); anything else is a file path.
std::vector<std::string> load_corpus(const std::string& spec, std::size_t builtin_docs,
                                     std::uint64_t seed);

}  // namespace llmdet
