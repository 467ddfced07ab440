#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <cstdlib>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "canqa/digest.hpp"
#include "canqa/error.hpp"
#include "canqa/generator.hpp"
#include "httplib.h"
#include "json.hpp"

namespace canqa {

struct ChatMessage {
  std::string role;  // system, user, assistant
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 256;
  std::string qa_id;  // local bookkeeping, never sent
};

inline nlohmann::json to_wire_json(const ChatRequest& r) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", r.model},
          {"messages", std::move(msgs)},
          {"temperature", r.temperature},
          {"max_tokens", r.max_tokens}};
}

class EndpointError : public Error {
 public:
  EndpointError(std::string what, bool transient, int status = 0)
      : Error(ErrorKind::Endpoint, std::move(what)), transient_(transient), status_(status) {}
  bool transient() const { return transient_; }
  int status() const { return status_; }

 private:
  bool transient_;
  int status_;
};

inline std::string parse_chat_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(std::string("unexpected response shape: ") + e.what(), false);
  }
}

class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  // Returns the assistant message content. Throws EndpointError.
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct EndpointConfig {
  std::string url = "mock://echo";
  std::string model = "default";
  std::string api_key_env = "CANQA_API_KEY";
  double temperature = 0.0;
  int max_tokens = 256;
  int timeout_s = 60;
};

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;

  std::string origin() const {
    return scheme + "://" + (host.find(':') != std::string::npos ? "[" + host + "]" : host) + ":" +
           std::to_string(port);
  }
};

inline ParsedUrl parse_url(std::string_view url) {
  ParsedUrl u;
  const auto sep = url.find("://");
  if (sep == std::string_view::npos) throw Error(ErrorKind::Config, "endpoint url lacks a scheme");
  u.scheme = detail::lower(url.substr(0, sep));
  auto rest = url.substr(sep + 3);
  const auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  u.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) throw Error(ErrorKind::Config, "bad IPv6 host in url");
    u.host = std::string(authority.substr(1, close - 1));
    authority.remove_prefix(close + 1);
    if (!authority.empty() && authority.front() == ':') u.port = std::atoi(std::string(authority.substr(1)).c_str());
  } else if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    u.host = std::string(authority.substr(0, colon));
    u.port = std::atoi(std::string(authority.substr(colon + 1)).c_str());
  } else {
    u.host = std::string(authority);
  }
  if (u.port == 0) u.port = u.scheme == "https" ? 443 : 80;
  if (u.host.empty() && u.scheme != "mock") throw Error(ErrorKind::Config, "endpoint url has no host");
  return u;
}

inline bool is_local_host(std::string_view host) {
  return host == "localhost" || host == "127.0.0.1" || host == "::1";
}

class HttpChatEndpoint final : public ChatEndpoint {
 public:
  HttpChatEndpoint(ParsedUrl url, std::string api_key, int timeout_s)
      : url_(std::move(url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

  std::string complete(const ChatRequest& request) override {
    httplib::Client client(url_.origin());
    client.set_connection_timeout(timeout_s_);
    client.set_read_timeout(timeout_s_);
    client.set_write_timeout(timeout_s_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(url_.path, headers, to_wire_json(request).dump(), "application/json");
    if (!res) throw EndpointError("transport failure: " + httplib::to_string(res.error()), true);
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorKind::Config, "endpoint rejected the credential (HTTP " + std::to_string(status) + ")");
    }
    if (status == 429 || status >= 500) {
      throw EndpointError("HTTP " + std::to_string(status), true, status);
    }
    if (status < 200 || status >= 300) {
      throw EndpointError("HTTP " + std::to_string(status), false, status);
    }
    return parse_chat_response(res->body);
  }

 private:
  ParsedUrl url_;
  std::string api_key_;
  int timeout_s_;
};

// Ground truth the mock endpoints answer from, keyed by qa_id.
struct AnswerKey {
  std::map<std::string, std::pair<std::string, QaFormat>> answers;

  static AnswerKey from(const std::vector<QaItem>& items) {
    AnswerKey key;
    for (const auto& item : items) key.answers[item.qa_id] = {item.answer, item.format};
    return key;
  }
};

enum class MockKind { Echo, Anti, Random, Fixed };

class MockEndpoint final : public ChatEndpoint {
 public:
  MockEndpoint(MockKind kind, AnswerKey key, std::uint64_t seed = 0, std::string fixed = "A")
      : kind_(kind), key_(std::move(key)), seed_(seed), fixed_(std::move(fixed)) {}

  std::string complete(const ChatRequest& request) override {
    auto it = key_.answers.find(request.qa_id);
    if (it == key_.answers.end()) throw EndpointError("mock has no answer for " + request.qa_id, false);
    const auto& [truth, format] = it->second;
    const bool tf = format == QaFormat::TF;
    switch (kind_) {
      case MockKind::Echo:
        return truth;
      case MockKind::Anti:
        if (tf) return truth == "True" ? "False" : "True";
        return std::string(1, static_cast<char>('A' + (truth[0] - 'A' + 1) % 4));
      case MockKind::Random: {
        Rng rng(derive_seed(seed_, "mock:" + request.qa_id));
        if (tf) return rng.below(2) ? "True" : "False";
        return std::string(1, static_cast<char>('A' + rng.below(4)));
      }
      case MockKind::Fixed:
        return tf ? "True" : fixed_;
    }
    return truth;
  }

 private:
  MockKind kind_;
  AnswerKey key_;
  std::uint64_t seed_;
  std::string fixed_;
};

// mock://echo, mock://anti, mock://random, mock://fixed/B, or an http(s) URL.
// A remote host without a credential is rejected here, before any request.
inline std::unique_ptr<ChatEndpoint> make_endpoint(const EndpointConfig& cfg, const AnswerKey& key,
                                                   std::uint64_t seed) {
  const auto url = parse_url(cfg.url);
  if (url.scheme == "mock") {
    const auto kind = url.host;
    if (kind == "echo") return std::make_unique<MockEndpoint>(MockKind::Echo, key);
    if (kind == "anti") return std::make_unique<MockEndpoint>(MockKind::Anti, key);
    if (kind == "random") return std::make_unique<MockEndpoint>(MockKind::Random, key, seed);
    if (kind == "fixed") {
      std::string letter = url.path.size() > 1 ? url.path.substr(1) : "A";
      if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'D') {
        throw Error(ErrorKind::Config, "mock://fixed takes a letter A-D");
      }
      return std::make_unique<MockEndpoint>(MockKind::Fixed, key, seed, letter);
    }
    throw Error(ErrorKind::Config, "unknown mock endpoint '" + kind + "'");
  }
  if (url.scheme != "http" && url.scheme != "https") {
    throw Error(ErrorKind::Config, "unsupported endpoint scheme '" + url.scheme + "'");
  }
  std::string api_key;
  if (const char* v = std::getenv(cfg.api_key_env.c_str())) api_key = v;
  if (api_key.empty() && !is_local_host(url.host)) {
    throw Error(ErrorKind::Config, "no credential in $" + cfg.api_key_env + " for remote endpoint " + url.host);
  }
  return std::make_unique<HttpChatEndpoint>(url, std::move(api_key), cfg.timeout_s);
}

}  // namespace canqa
