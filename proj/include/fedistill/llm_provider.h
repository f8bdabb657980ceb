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

#ifndef FEDISTILL_LLM_PROVIDER_H_
#define FEDISTILL_LLM_PROVIDER_H_

#include <chrono>
#include <cstddef>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace fedistill {

// Any failure to obtain a completion: transport, HTTP status, missing
// response field, exhausted script.
class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A single-turn text completion service.
class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string Complete(const std::string& prompt) = 0;
};

// Replays canned responses in order; entries without text fail with
// ProviderError. Running past the end of the script also fails. Prompts
// received are kept for inspection.
class ScriptedProvider : public LlmProvider {
 public:
  explicit ScriptedProvider(std::vector<std::optional<std::string>> script);

  std::string Complete(const std::string& prompt) override;

  std::vector<std::string> prompts() const;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::optional<std::string>> script_;
  std::size_t next_ = 0;
  std::vector<std::string> prompts_;
};

// Offline stand-in that needs no script: answers with inverse minimum
// training losses read back from the per-client blocks of the prompt.
class OfflineLossProvider : public LlmProvider {
 public:
  std::string Complete(const std::string& prompt) override;
};

struct HttpProviderConfig {
  // Full URL, e.g. https://host/v1/chat/completions.
  std::string endpoint;
  std::string model;
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  // Name of the environment variable that holds the credential. The
  // credential itself is never read from configuration.
  std::string api_key_env = "FEDISTILL_LLM_API_KEY";
  // JSON body; string values "${prompt}" and "${model}" are substituted.
  nlohmann::json body_template = {
      {"model", "${model}"},
      {"messages", {{{"role", "user"}, {"content", "${prompt}"}}}}};
  // JSON pointer to the completion text in the response.
  std::string response_path = "/choices/0/message/content";
  std::chrono::milliseconds timeout{30000};
  int max_retries = 0;
};

nlohmann::json ToJson(const HttpProviderConfig& config);
HttpProviderConfig HttpProviderConfigFromJson(const nlohmann::json& j);

// POSTs the rendered body template and extracts the completion by JSON
// pointer.
class HttpProvider : public LlmProvider {
 public:
  explicit HttpProvider(HttpProviderConfig config);

  std::string Complete(const std::string& prompt) override;

  nlohmann::json RenderBody(const std::string& prompt) const;

 private:
  HttpProviderConfig config_;
};

}  // namespace fedistill

#endif  // FEDISTILL_LLM_PROVIDER_H_
