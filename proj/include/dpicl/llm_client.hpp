//
// Copyright 2026 The dpicl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPICL_LLM_CLIENT_HPP_
#define DPICL_LLM_CLIENT_HPP_

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpicl/error.hpp"

namespace dpicl {

// ---------------------------------------------------------------------------
// Prompt rendering. The templates are fixed; slot values are sanitized to a
// single line so the line structure stays parseable.
// ---------------------------------------------------------------------------

std::string sanitize_slot(std::string_view value);

struct ClassificationDemo {
  std::string text;
  std::string label;
};

// Instruction line listing the classes, one "Article: ..., Class: ..." line
// per demo, then the query line ending with "Class:". Zero demos render the
// zero-shot form.
std::string render_classification_prompt(std::span<const std::string> classes,
                                         std::span<const ClassificationDemo> demos,
                                         std::string_view query_text);

struct QaDemo {
  std::string text;
  std::string question;
  std::string answer;
};

// One three-line block per demo, a blank line between blocks, and a final
// query block whose answer line is left open as the generation target.
std::string render_qa_prompt(std::span<const QaDemo> demos,
                             std::string_view query_text,
                             std::string_view query_question);

// Keyword instruction line followed by the zero-shot query block.
std::string render_keyword_followup_prompt(std::span<const std::string> keywords,
                                           std::string_view query_text,
                                           std::string_view query_question);

// Longest class name that is a case-insensitive prefix of the trimmed
// response; empty when nothing matches (an invalid vote).
std::optional<std::string> extract_class_label(std::string_view response,
                                               std::span<const std::string> classes);

// First line of the response, trimmed.
std::string extract_answer_line(std::string_view response);

// ---------------------------------------------------------------------------
// Chat completion client (OpenAI-compatible wire format).
// ---------------------------------------------------------------------------

struct ChatRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 64;
  std::int64_t query_id = -1;
  int shard_index = -1;
};

struct ChatResponse {
  std::string text;
  std::chrono::milliseconds latency{0};
  int attempt_count = 1;
};

// status == 0 means the request never produced an HTTP response (connect
// failure or timeout).
struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const HttpHeaders& headers) = 0;
};

std::unique_ptr<HttpTransport> make_httplib_transport(
    const std::string& base_url, std::chrono::seconds timeout);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  std::uint64_t jitter_seed = 0;
  // injectable for tests; defaults to sleeping for real
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct ClientConfig {
  std::string model;
  std::string api_key;  // read from DPICL_API_KEY when empty
  RetryPolicy retry;
  std::string trace_path;  // JSON-lines request/response trace when non-empty
};

// POSTs {base_url}/v1/chat/completions with a single user message. Retries
// timeouts, 429 and 5xx with exponential backoff and full jitter; any other
// 4xx fails immediately.
class CompletionClient {
 public:
  CompletionClient(std::unique_ptr<HttpTransport> transport, ClientConfig config);
  ChatResponse complete(const ChatRequest& request);

 private:
  std::unique_ptr<HttpTransport> transport_;
  ClientConfig config_;
};

// ---------------------------------------------------------------------------
// Deterministic mock LLMs; they parse the templates above and fail loudly on
// anything else.
// ---------------------------------------------------------------------------

enum class MockBehavior {
  kMajorityLabel,  // majority demo label in a classification prompt
  kKeywordEcho,    // concatenation of demo answers / follow-up keywords
  kFixedText,
};

std::string mock_llm(MockBehavior behavior, std::string_view prompt,
                     std::string_view fixed_text = "");

// What the pipeline talks to: either a mock or a CompletionClient.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  // whether shard-level concurrency buys anything (network-backed clients)
  virtual bool prefers_parallel() const { return false; }
};

class MockBackend : public LlmBackend {
 public:
  explicit MockBackend(MockBehavior behavior, std::string fixed_text = "")
      : behavior_(behavior), fixed_text_(std::move(fixed_text)) {}
  std::string complete(const ChatRequest& request) override {
    return mock_llm(behavior_, request.prompt, fixed_text_);
  }

 private:
  MockBehavior behavior_;
  std::string fixed_text_;
};

class HttpBackend : public LlmBackend {
 public:
  explicit HttpBackend(std::unique_ptr<CompletionClient> client)
      : client_(std::move(client)) {}
  std::string complete(const ChatRequest& request) override {
    return client_->complete(request).text;
  }
  bool prefers_parallel() const override { return true; }

 private:
  std::unique_ptr<CompletionClient> client_;
};

// Completes the M shard requests of one query, optionally with bounded
// parallelism, and returns responses in shard order.
std::vector<std::string> complete_shards(LlmBackend& backend,
                                         const std::vector<ChatRequest>& requests,
                                         int parallelism);

}  // namespace dpicl

#endif  // DPICL_LLM_CLIENT_HPP_
