#include "llmdet/external_provider.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <json.hpp>

#include "llmdet/error.hpp"

namespace llmdet {

namespace {

using json = nlohmann::json;

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProviderError(std::string("provider write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

// Buffered line reader over a file descriptor with a poll-based deadline.
class FdLineReader {
 public:
  explicit FdLineReader(int fd) : fd_(fd) {}

  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buf_.find('\n'); nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ProviderError("provider timed out", buf_);
      pollfd p{fd_, POLLIN, 0};
      int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProviderError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) throw ProviderError("provider timed out", buf_);
      char chunk[4096];
      ssize_t n = ::read(fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProviderError(std::string("provider read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw ProviderError("provider closed the stream", buf_);
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buf_;
};

class ProcessChannel final : public LineChannel {
 public:
  explicit ProcessChannel(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
      throw ProviderError(std::string("pipe failed: ") + std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) throw ProviderError(std::string("fork failed: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_ = to_child[1];
    out_ = from_child[0];
    ::fcntl(in_, F_SETFD, FD_CLOEXEC);
    ::fcntl(out_, F_SETFD, FD_CLOEXEC);
    reader_ = std::make_unique<FdLineReader>(out_);
  }

  ~ProcessChannel() override {
    if (in_ >= 0) ::close(in_);
    if (out_ >= 0) ::close(out_);
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
        ::usleep(10000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
  }

  void send_line(const std::string& line) override { write_all(in_, line + "\n"); }
  std::string read_line(std::chrono::milliseconds timeout) override {
    return reader_->read_line(timeout);
  }

 private:
  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  std::unique_ptr<FdLineReader> reader_;
};

class SocketChannel final : public LineChannel {
 public:
  SocketChannel(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto port_str = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res); rc != 0) {
      throw ProviderError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    for (addrinfo* a = res; a; a = a->ai_next) {
      int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
        fd_ = fd;
        break;
      }
      ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw ProviderError("cannot connect to " + host + ":" + port_str);
    reader_ = std::make_unique<FdLineReader>(fd_);
  }

  ~SocketChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send_line(const std::string& line) override { write_all(fd_, line + "\n"); }
  std::string read_line(std::chrono::milliseconds timeout) override {
    return reader_->read_line(timeout);
  }

 private:
  int fd_ = -1;
  std::unique_ptr<FdLineReader> reader_;
};

json parse_response(const std::string& raw) {
  json j;
  try {
    j = json::parse(raw);
  } catch (const json::exception&) {
    throw ProviderError("malformed provider response", raw);
  }
  if (!j.is_object()) throw ProviderError("provider response is not an object", raw);
  if (j.contains("error")) {
    throw ProviderError("provider reported an error", raw);
  }
  return j;
}

}  // namespace

std::unique_ptr<LineChannel> spawn_process_channel(const std::string& command) {
  // A provider that dies mid-request must not kill us with SIGPIPE.
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<ProcessChannel>(command);
}

std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, int port) {
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<SocketChannel>(host, port);
}

ExternalProvider::ExternalProvider(std::unique_ptr<LineChannel> channel, std::shared_ptr<const Vocabulary> vocab,
                                   std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), vocab_(std::move(vocab)), timeout_(timeout) {
  const std::string raw = round_trip(json{{"op", "hello"}}.dump());
  json j = parse_response(raw);
  if (!j.contains("name") || !j["name"].is_string() || !j.contains("vocab_sha") ||
      !j["vocab_sha"].is_string()) {
    throw ProviderError("hello response missing name or vocab_sha", raw);
  }
  name_ = j["name"].get<std::string>();
  vocab_sha_ = j["vocab_sha"].get<std::string>();
  if (vocab_sha_.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
    throw ProviderError("vocab_sha is not hexadecimal", raw);
  }
}

std::string ExternalProvider::round_trip(const std::string& request) const {
  std::lock_guard lock(mu_);
  channel_->send_line(request);
  return channel_->read_line(timeout_);
}

std::vector<ProbEntry> ExternalProvider::next_token_distribution(std::span<const TokenId> context,
                                                                 std::size_t top_k) const {
  if (top_k == 0) throw ProviderError("top_k must be at least 1");
  json ctx = json::array();
  for (TokenId id : context) ctx.push_back(vocab_->token(id));
  const std::string raw =
      round_trip(json{{"op", "next_token"}, {"context", ctx}, {"top_k", top_k}}.dump());
  json j = parse_response(raw);
  if (!j.contains("tokens") || !j.contains("probs") || !j["tokens"].is_array() ||
      !j["probs"].is_array() || j["tokens"].size() != j["probs"].size()) {
    throw ProviderError("next_token response needs equal-length tokens and probs arrays", raw);
  }
  if (j["tokens"].size() > top_k) throw ProviderError("provider returned more than top_k tokens", raw);
  std::vector<ProbEntry> out;
  out.reserve(j["tokens"].size());
  for (std::size_t i = 0; i < j["tokens"].size(); ++i) {
    const auto& t = j["tokens"][i];
    const auto& p = j["probs"][i];
    if (!t.is_string() || !p.is_number()) throw ProviderError("bad token/prob element", raw);
    const auto tok = t.get<std::string>();
    if (!vocab_->contains(tok)) throw ProviderError("token '" + tok + "' is not in the vocabulary", raw);
    const double prob = p.get<double>();
    if (!(prob >= 0.0 && prob <= 1.0)) throw ProviderError("probability outside [0, 1]", raw);
    out.push_back({vocab_->id_of(tok), prob});
  }
  double total = out.empty() ? 0.0 : out[0].prob;
  std::vector<bool> seen(vocab_->size(), false);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (seen[out[i].token]) throw ProviderError("duplicate token in next_token response", raw);
    seen[out[i].token] = true;
    if (i == 0) continue;
    if (out[i].prob > out[i - 1].prob) throw ProviderError("probabilities not descending", raw);
    total += out[i].prob;
  }
  if (total > 1.0 + 1e-6) throw ProviderError("probabilities sum above 1", raw);
  return out;
}

TokenSequence ExternalProvider::generate(const TokenSequence& prompt, std::size_t max_len,
                                         double temperature, std::uint64_t seed) const {
  if (!(temperature > 0)) throw ProviderError("temperature must be positive");
  json p = json::array();
  for (TokenId id : prompt.ids) p.push_back(vocab_->token(id));
  const std::string raw = round_trip(json{{"op", "generate"},
                                          {"prompt", p},
                                          {"max_len", max_len},
                                          {"temperature", temperature},
                                          {"seed", seed}}
                                         .dump());
  json j = parse_response(raw);
  if (!j.contains("tokens") || !j["tokens"].is_array()) {
    throw ProviderError("generate response missing tokens", raw);
  }
  TokenSequence out;
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) throw ProviderError("bad token element", raw);
    const auto tok = t.get<std::string>();
    if (!vocab_->contains(tok)) throw ProviderError("token '" + tok + "' is not in the vocabulary", raw);
    out.ids.push_back(vocab_->id_of(tok));
  }
  return out;
}

}  // namespace llmdet
