#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace llmdet {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk artifact; offset is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Failure reported by, or while talking to, a probability provider.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, std::string payload = {})
      : Error(payload.empty() ? what : what + ": " + payload),
        payload_(std::move(payload)) {}

  const std::string& payload() const noexcept { return payload_; }

 private:
  std::string payload_;
};

}  // namespace llmdet
