// Copyright 2026 The fedistill Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedistill/llm_provider.h"

#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"

namespace fedistill {
namespace {

nlohmann::json Substitute(const nlohmann::json& node, const std::string& prompt,
                          const std::string& model) {
  if (node.is_string()) {
    const auto& s = node.get_ref<const std::string&>();
    if (s == "${prompt}") return prompt;
    if (s == "${model}") return model;
    return node;
  }
  if (node.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (auto it = node.begin(); it != node.end(); ++it) {
      out[it.key()] = Substitute(it.value(), prompt, model);
    }
    return out;
  }
  if (node.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : node) out.push_back(Substitute(v, prompt, model));
    return out;
  }
  return node;
}

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl SplitEndpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ProviderError("endpoint '" + url + "' lacks a scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

ScriptedProvider::ScriptedProvider(std::vector<std::optional<std::string>> script)
    : script_(std::move(script)) {}

std::string ScriptedProvider::Complete(const std::string& prompt) {
  std::lock_guard<std::mutex> lock(mu_);
  prompts_.push_back(prompt);
  if (next_ >= script_.size()) throw ProviderError("scripted provider exhausted");
  const auto& entry = script_[next_++];
  if (!entry) throw ProviderError("scripted provider failure");
  return *entry;
}

std::vector<std::string> ScriptedProvider::prompts() const {
  std::lock_guard<std::mutex> lock(mu_);
  return prompts_;
}

std::size_t ScriptedProvider::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return next_;
}

std::string OfflineLossProvider::Complete(const std::string& prompt) {
  static const std::string kKey = "minimum training loss:";
  std::istringstream in(prompt);
  std::string line;
  std::ostringstream out;
  int found = 0;
  while (std::getline(in, line)) {
    const auto pos = line.find(kKey);
    if (pos == std::string::npos) continue;
    const double loss = std::strtod(line.c_str() + pos + kKey.size(), nullptr);
    if (found++) out << ", ";
    out << 1.0 / std::max(loss, 1e-8);
  }
  if (!found) throw ProviderError("prompt carries no client loss statistics");
  return out.str();
}

nlohmann::json ToJson(const HttpProviderConfig& c) {
  return {{"endpoint", c.endpoint},
          {"model", c.model},
          {"auth_header", c.auth_header},
          {"auth_prefix", c.auth_prefix},
          {"api_key_env", c.api_key_env},
          {"body_template", c.body_template},
          {"response_path", c.response_path},
          {"timeout_ms", c.timeout.count()},
          {"max_retries", c.max_retries}};
}

HttpProviderConfig HttpProviderConfigFromJson(const nlohmann::json& j) {
  HttpProviderConfig c;
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model = j.value("model", c.model);
  c.auth_header = j.value("auth_header", c.auth_header);
  c.auth_prefix = j.value("auth_prefix", c.auth_prefix);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  if (j.contains("body_template")) c.body_template = j.at("body_template");
  c.response_path = j.value("response_path", c.response_path);
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
  c.max_retries = j.value("max_retries", c.max_retries);
  return c;
}

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {}

nlohmann::json HttpProvider::RenderBody(const std::string& prompt) const {
  return Substitute(config_.body_template, prompt, config_.model);
}

std::string HttpProvider::Complete(const std::string& prompt) {
  const auto url = SplitEndpoint(config_.endpoint);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace(config_.auth_header, config_.auth_prefix + key);
    }
  }
  const std::string body = RenderBody(prompt).dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    try {
      const auto parsed = nlohmann::json::parse(res->body);
      const nlohmann::json::json_pointer ptr(config_.response_path);
      if (!parsed.contains(ptr) || !parsed.at(ptr).is_string()) {
        throw ProviderError("response has no string at " + config_.response_path);
      }
      return parsed.at(ptr).get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("unusable response: ") + e.what());
    }
  }
  throw ProviderError(last_error);
}

}  // namespace fedistill
