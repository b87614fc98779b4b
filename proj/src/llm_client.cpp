#include "sketch_rl/llm_client.hpp"

#include <thread>

#include "httplib.h"
#include "sketch_rl/error.hpp"
#include "sketch_rl/jsonl.hpp"

namespace sketch_rl {
namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorCategory::kConfig, "endpoint must be an absolute URL: " + url);
  }
  const std::size_t path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpLlmClient::HttpLlmClient(HttpClientConfig config)
    : config_(std::move(config)) {
  if (config_.model.empty()) fail(ErrorCategory::kConfig, "client model name is empty");
  if (config_.retries < 0) fail(ErrorCategory::kConfig, "client retries must be >= 0");
  if (config_.max_in_flight < 1 || config_.max_in_flight > 1024) {
    fail(ErrorCategory::kConfig, "client max_in_flight must be in [1, 1024]");
  }
  SplitUrl parts = split_url(config_.endpoint);
  origin_ = std::move(parts.origin);
  path_ = std::move(parts.path);
  in_flight_ = std::make_unique<std::counting_semaphore<1024>>(config_.max_in_flight);
}

HttpLlmClient::~HttpLlmClient() = default;

std::string HttpLlmClient::complete(const std::string& prompt) {
  Json body = {{"model", config_.model},
               {"messages", Json::array({{{"role", "user"}, {"content", prompt}}})}};
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.api_token.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_token);
  }

  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<1024>* s;
    ~Release() { s->release(); }
  } release{in_flight_.get()};

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));

    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
        config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "request to " + config_.endpoint + " failed: " +
                   httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status) + " from " + config_.endpoint;
      if (retryable(res->status)) continue;
      break;
    }
    Json reply;
    try {
      reply = Json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception&) {
      throw UnparseableReplyError("reply body is not a chat completion", res->body);
    }
  }
  fail(ErrorCategory::kTransport, last_error);
}

}  // namespace sketch_rl
