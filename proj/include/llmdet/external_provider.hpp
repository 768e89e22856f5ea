#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include "llmdet/provider.hpp"
#include "llmdet/tokenizer.hpp"

namespace llmdet {

// Bidirectional line transport to a provider process or service.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  // Throws ProviderError on timeout or end of stream.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

// Child process speaking the protocol on its standard streams (run via /bin/sh -c).
std::unique_ptr<LineChannel> spawn_process_channel(const std::string& command);
std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, int port);

// Client for the line-delimited JSON provider protocol:
//   {"op":"hello"}                                   -> {"name":..,"vocab_sha":..}
//   {"op":"next_token","context":[..],"top_k":K}     -> {"tokens":[..],"probs":[..]}
//   {"op":"generate","prompt":[..],"max_len":N,
//    "temperature":T,"seed":S}                       -> {"tokens":[..]}
// Tokens travel as vocabulary strings. Requests are serialized per connection.
class ExternalProvider final : public ProbabilityProvider {
 public:
  ExternalProvider(std::unique_ptr<LineChannel> channel, std::shared_ptr<const Vocabulary> vocab,
                   std::chrono::milliseconds timeout = std::chrono::seconds(30));

  const std::string& name() const override { return name_; }
  const std::string& vocab_sha() const noexcept { return vocab_sha_; }
  std::uint64_t vocab_hash() const override { return vocab_->hash(); }
  std::size_t vocab_size() const override { return vocab_->size(); }
  std::vector<ProbEntry> next_token_distribution(std::span<const TokenId> context,
                                                 std::size_t top_k) const override;
  TokenSequence generate(const TokenSequence& prompt, std::size_t max_len, double temperature,
                         std::uint64_t seed) const override;
  bool concurrent() const override { return false; }

 private:
  std::string round_trip(const std::string& request) const;

  mutable std::mutex mu_;
  std::unique_ptr<LineChannel> channel_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::chrono::milliseconds timeout_;
  std::string name_;
  std::string vocab_sha_;
};

}  // namespace llmdet
