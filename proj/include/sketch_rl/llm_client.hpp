#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>

namespace sketch_rl {

// A single-turn chat completion service.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the assistant reply text. Throws Error(kTransport) when the
  // service cannot be reached after retries.
  virtual std::string complete(const std::string& prompt) = 0;
};

struct HttpClientConfig {
  // Full URL of the chat-completions route, e.g.
  // http://localhost:8000/v1/chat/completions
  std::string endpoint;
  std::string model;
  // Read from the environment by the caller; never persisted.
  std::string api_token;
  std::chrono::milliseconds timeout{30000};
  int retries = 3;
  std::chrono::milliseconds backoff{200};
  int max_in_flight = 4;
};

inline constexpr const char* kApiTokenEnv = "SKETCH_RL_API_TOKEN";

// Posts {model, messages:[{role:"user", content}]} and reads
// choices[0].message.content from the reply. Retries transport failures,
// 429 and 5xx with exponential backoff. Safe for concurrent use; at most
// max_in_flight requests are outstanding at once.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(HttpClientConfig config);
  ~HttpLlmClient() override;

  std::string complete(const std::string& prompt) override;

  const HttpClientConfig& config() const noexcept { return config_; }

 private:
  HttpClientConfig config_;
  std::string origin_;
  std::string path_;
  std::unique_ptr<std::counting_semaphore<1024>> in_flight_;
};

}  // namespace sketch_rl
