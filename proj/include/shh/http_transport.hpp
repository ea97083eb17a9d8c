#pragma once

// HTTP clients for model endpoints and enhancement tools. Plain http only.
//
// Model endpoint:  POST {model_id?, prompt, audio_ref, temperature, max_tokens, seed}
//                  -> 200 {text, truncated?}
// Tool endpoint:   POST {audio_ref} -> 200 {audio_ref}

#include <chrono>
#include <optional>
#include <string>
#include <utility>

#include "httplib.h"
#include "shh/backend_gateway.hpp"
#include "shh/tool_actions.hpp"

namespace shh {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // at least "/"
};

inline ParsedUrl parse_http_url(const std::string& url) {
  constexpr std::string_view scheme = "http://";
  if (!url.starts_with(scheme)) {
    throw Error(ErrorCode::ConfigError, "only http:// endpoints are supported: " + url);
  }
  const auto slash = url.find('/', scheme.size());
  if (slash == scheme.size()) throw Error(ErrorCode::ConfigError, "missing host in " + url);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

namespace detail {

inline httplib::Client make_client(const ParsedUrl& url, int timeout_ms) {
  httplib::Client client(url.origin);
  const auto timeout = std::chrono::milliseconds(timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

inline bool is_timeout(httplib::Error e) {
  return e == httplib::Error::Read || e == httplib::Error::Write ||
         e == httplib::Error::ConnectionTimeout;
}

}  // namespace detail

class HttpBackend final : public Backend {
 public:
  HttpBackend(BackendSpec spec, std::optional<std::string> bearer_token = std::nullopt)
      : Backend(std::move(spec)),
        url_(parse_http_url(this->spec().endpoint_url.value_or(""))),
        bearer_token_(std::move(bearer_token)) {}

  static json request_body(const BackendSpec& spec, const GenerationRequest& req) {
    json body = {{"prompt", req.prompt},
                 {"audio_ref", req.audio_ref},
                 {"temperature", req.params.temperature},
                 {"max_tokens", req.params.max_tokens},
                 {"seed", req.seed ? json(*req.seed) : json(nullptr)}};
    if (spec.model_id) body["model_id"] = *spec.model_id;
    return body;
  }

  GenerationResult generate(const GenerationRequest& req) override {
    auto client = detail::make_client(url_, req.params.timeout_ms);
    httplib::Headers headers;
    if (bearer_token_) headers.emplace("Authorization", "Bearer " + *bearer_token_);

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(url_.path, headers, request_body(spec(), req).dump(),
                           "application/json");
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);

    if (!res) {
      const auto err = res.error();
      throw Error(detail::is_timeout(err) ? ErrorCode::Timeout : ErrorCode::BackendError,
                  spec().backend_id + ": " + httplib::to_string(err));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::HttpStatus,
                  spec().backend_id + " returned " + std::to_string(res->status), res->status);
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("text") ||
        !body["text"].is_string()) {
      throw Error(ErrorCode::MalformedResponse, spec().backend_id + ": expected {\"text\": ...}");
    }
    GenerationResult out;
    out.text = body["text"].get<std::string>();
    out.latency_ms = latency.count();
    out.backend_id = spec().backend_id;
    out.seed = req.seed.value_or(0);
    out.truncated = body.value("truncated", false);
    return out;
  }

 private:
  ParsedUrl url_;
  std::optional<std::string> bearer_token_;
};

class HttpTool final : public ToolInvoker {
 public:
  explicit HttpTool(std::optional<std::string> bearer_token = std::nullopt)
      : bearer_token_(std::move(bearer_token)) {}

  std::string apply(const ToolSpec& tool, const std::string& audio_ref) override {
    const auto url = parse_http_url(tool.endpoint_url.value_or(""));
    auto client = detail::make_client(url, tool.timeout_ms);
    httplib::Headers headers;
    if (bearer_token_) headers.emplace("Authorization", "Bearer " + *bearer_token_);
    auto res = client.Post(url.path, headers, json{{"audio_ref", audio_ref}}.dump(),
                           "application/json");
    if (!res) {
      const auto err = res.error();
      throw Error(detail::is_timeout(err) ? ErrorCode::ToolTimeout : ErrorCode::ToolFailure,
                  tool.tool_name + ": " + httplib::to_string(err));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::ToolFailure,
                  tool.tool_name + " returned " + std::to_string(res->status));
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("audio_ref") ||
        !body["audio_ref"].is_string()) {
      throw Error(ErrorCode::ToolFailure, tool.tool_name + ": expected {\"audio_ref\": ...}");
    }
    return body["audio_ref"].get<std::string>();
  }

 private:
  std::optional<std::string> bearer_token_;
};

}  // namespace shh
