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

#include "dpicl/llm_client.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dpicl/rng.hpp"
#include "dpicl/tokenizer.hpp"

namespace dpicl {

namespace {

constexpr std::string_view kClassificationInstruction =
    "Instruction: Classify each article into one of the following categories "
    "separated by comma: ";
constexpr std::string_view kArticlePrefix = "Article: ";
constexpr std::string_view kClassMarker = ", Class:";
constexpr std::string_view kReadText = "Read the text: ";
constexpr std::string_view kQuestionLine =
    "Answer the question with at most 4 words: ";
constexpr std::string_view kAnswerLine = "Do not provide a Yes/No answer:";
constexpr std::string_view kKeywordInstruction =
    "Using the following keywords, answer the question concisely: ";

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace

std::string sanitize_slot(std::string_view value) {
  std::string out(value);
  for (char& c : out) {
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  }
  return out;
}

std::string render_classification_prompt(std::span<const std::string> classes,
                                         std::span<const ClassificationDemo> demos,
                                         std::string_view query_text) {
  if (classes.empty()) {
    throw InvalidParameterError("classification prompt needs a class list");
  }
  std::string prompt(kClassificationInstruction);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (i > 0) prompt += ", ";
    prompt += sanitize_slot(classes[i]);
  }
  prompt += ".\n";
  for (const ClassificationDemo& demo : demos) {
    prompt += std::string(kArticlePrefix) + sanitize_slot(demo.text) +
              std::string(kClassMarker) + " " + sanitize_slot(demo.label) + "\n";
  }
  prompt += std::string(kArticlePrefix) + sanitize_slot(query_text) +
            std::string(kClassMarker);
  return prompt;
}

namespace {

std::string qa_block(std::string_view text, std::string_view question,
                     const std::string* answer) {
  std::string block = std::string(kReadText) + sanitize_slot(text) + "\n" +
                      std::string(kQuestionLine) + sanitize_slot(question) + "\n" +
                      std::string(kAnswerLine);
  if (answer != nullptr) {
    block += " " + sanitize_slot(*answer);
  }
  return block;
}

}  // namespace

std::string render_qa_prompt(std::span<const QaDemo> demos,
                             std::string_view query_text,
                             std::string_view query_question) {
  if (trim(query_question).empty()) {
    throw InvalidParameterError("qa prompt needs a question");
  }
  std::string prompt;
  for (const QaDemo& demo : demos) {
    prompt += qa_block(demo.text, demo.question, &demo.answer);
    prompt += "\n\n";
  }
  prompt += qa_block(query_text, query_question, nullptr);
  return prompt;
}

std::string render_keyword_followup_prompt(std::span<const std::string> keywords,
                                           std::string_view query_text,
                                           std::string_view query_question) {
  std::string prompt(kKeywordInstruction);
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    if (i > 0) prompt += ", ";
    prompt += sanitize_slot(keywords[i]);
  }
  prompt += ".\n";
  prompt += qa_block(query_text, query_question, nullptr);
  return prompt;
}

std::optional<std::string> extract_class_label(std::string_view response,
                                               std::span<const std::string> classes) {
  const std::string lowered = to_lower_ascii(trim(response));
  const std::string* best = nullptr;
  for (const std::string& cls : classes) {
    if (cls.empty() || cls.size() > lowered.size()) continue;
    if (lowered.compare(0, cls.size(), to_lower_ascii(cls)) != 0) continue;
    if (best == nullptr || cls.size() > best->size()) best = &cls;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::string extract_answer_line(std::string_view response) {
  const std::size_t end = response.find('\n');
  return std::string(trim(response.substr(0, end)));
}

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, std::chrono::seconds timeout)
      : base_url_(std::move(base_url)), timeout_(timeout) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  }

  HttpResponse post(const std::string& path, const std::string& body,
                    const HttpHeaders& headers) override {
    // one client per call: httplib clients are not safe for concurrent use
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_.count(), 0);
    client.set_read_timeout(timeout_.count(), 0);
    httplib::Headers hl;
    for (const auto& [key, value] : headers) hl.emplace(key, value);
    const httplib::Result result =
        client.Post(path, hl, body, "application/json");
    if (!result) return HttpResponse{0, httplib::to_string(result.error())};
    return HttpResponse{result->status, result->body};
  }

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

bool retryable_status(int status) {
  return status == 0 || status == 429 || status >= 500;
}

std::string request_tag(const ChatRequest& request) {
  return "query " + std::to_string(request.query_id) + " shard " +
         std::to_string(request.shard_index);
}

std::mutex trace_mutex;

void write_trace(const std::string& path, const ChatRequest& request,
                 int attempt, int status, const std::string& response_text) {
  if (path.empty()) return;
  nlohmann::json line = {{"query_id", request.query_id},
                         {"shard", request.shard_index},
                         {"attempt", attempt},
                         {"status", status},
                         {"prompt", request.prompt},
                         {"response", response_text}};
  const std::lock_guard<std::mutex> lock(trace_mutex);
  std::ofstream out(path, std::ios::app);
  out << line.dump() << "\n";
}

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(const std::string& base_url,
                                                      std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(base_url, timeout);
}

CompletionClient::CompletionClient(std::unique_ptr<HttpTransport> transport,
                                   ClientConfig config)
    : transport_(std::move(transport)), config_(std::move(config)) {
  if (!config_.retry.sleep) {
    config_.retry.sleep = [](std::chrono::milliseconds d) {
      std::this_thread::sleep_for(d);
    };
  }
}

ChatResponse CompletionClient::complete(const ChatRequest& request) {
  if (request.prompt.empty()) {
    throw InvalidParameterError("chat request prompt must be non-empty");
  }
  const std::string model =
      request.model.empty() ? config_.model : request.model;
  const nlohmann::json payload = {
      {"model", model},
      {"messages",
       nlohmann::json::array(
           {{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens}};

  HttpHeaders headers;
  std::string key = config_.api_key;
  if (key.empty()) {
    if (const char* env = std::getenv("DPICL_API_KEY")) key = env;
  }
  if (!key.empty()) headers.emplace_back("Authorization", "Bearer " + key);

  Rng jitter(config_.retry.jitter_seed ^
             static_cast<std::uint64_t>(request.query_id + 1) * 0x9e3779b97f4a7c15ULL);
  const auto start = std::chrono::steady_clock::now();
  const RetryPolicy& retry = config_.retry;

  for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    const HttpResponse response =
        transport_->post("/v1/chat/completions", payload.dump(), headers);
    write_trace(config_.trace_path, request, attempt, response.status,
                response.body);

    if (response.status == 200) {
      std::string text;
      try {
        const auto body = nlohmann::json::parse(response.body);
        text = body.at("choices").at(0).at("message").at("content")
                   .get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw TransportError(request_tag(request) +
                             ": malformed completion body: " + e.what());
      }
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      return ChatResponse{std::move(text), elapsed, attempt};
    }

    if (!retryable_status(response.status)) {
      throw TransportError(request_tag(request) + ": HTTP " +
                           std::to_string(response.status) + " (not retryable)");
    }
    if (attempt == retry.max_attempts) {
      throw TransportError(request_tag(request) + ": exhausted " +
                           std::to_string(retry.max_attempts) +
                           " attempts, last status " +
                           std::to_string(response.status));
    }
    // full jitter: uniform in (0, base * factor^(attempt-1))
    const double cap = static_cast<double>(retry.base_delay.count()) *
                       std::pow(retry.factor, attempt - 1);
    retry.sleep(std::chrono::milliseconds(
        static_cast<std::int64_t>(cap * jitter.uniform01())));
  }
  throw TransportError(request_tag(request) + ": unreachable retry state");
}

// ---------------------------------------------------------------------------
// Mocks
// ---------------------------------------------------------------------------

namespace {

std::string majority_label_of(std::string_view prompt) {
  const auto lines = split_lines(prompt);
  if (lines.empty() ||
      lines[0].substr(0, kClassificationInstruction.size()) !=
          kClassificationInstruction) {
    throw MockError("majority-label mock expects a classification prompt");
  }
  std::map<std::string, int> votes;
  for (const std::string_view line : lines) {
    if (line.substr(0, kArticlePrefix.size()) != kArticlePrefix) continue;
    const std::size_t marker = line.rfind(kClassMarker);
    if (marker == std::string_view::npos) {
      throw MockError("article line without class marker: template drift?");
    }
    const std::string_view label =
        trim(line.substr(marker + kClassMarker.size()));
    if (!label.empty()) ++votes[std::string(label)];
  }
  if (votes.empty()) return "";  // zero-shot prompt: nothing to vote with
  const auto best = std::max_element(
      votes.begin(), votes.end(), [](const auto& a, const auto& b) {
        return a.second < b.second;  // map order breaks ties lexicographically
      });
  return best->first;
}

std::string keyword_echo_of(std::string_view prompt) {
  const auto lines = split_lines(prompt);
  if (!lines.empty() && lines[0].substr(0, kKeywordInstruction.size()) ==
                            kKeywordInstruction) {
    std::string_view rest = lines[0].substr(kKeywordInstruction.size());
    if (!rest.empty() && rest.back() == '.') rest.remove_suffix(1);
    std::string out;
    std::size_t start = 0;
    while (start < rest.size()) {
      std::size_t end = rest.find(", ", start);
      if (end == std::string_view::npos) end = rest.size();
      if (!out.empty()) out += " ";
      out += std::string(rest.substr(start, end - start));
      start = end == rest.size() ? end : end + 2;
    }
    return out;
  }
  if (lines.empty() || lines[0].substr(0, kReadText.size()) != kReadText) {
    throw MockError("keyword-echo mock expects a qa or follow-up prompt");
  }
  std::string out;
  for (const std::string_view line : lines) {
    if (line.substr(0, kAnswerLine.size()) != kAnswerLine) continue;
    const std::string_view answer = trim(line.substr(kAnswerLine.size()));
    if (answer.empty()) continue;  // the open query block
    if (!out.empty()) out += " ";
    out += std::string(answer);
  }
  return out;
}

}  // namespace

std::string mock_llm(MockBehavior behavior, std::string_view prompt,
                     std::string_view fixed_text) {
  switch (behavior) {
    case MockBehavior::kMajorityLabel:
      return majority_label_of(prompt);
    case MockBehavior::kKeywordEcho:
      return keyword_echo_of(prompt);
    case MockBehavior::kFixedText:
      return std::string(fixed_text);
  }
  throw InvalidParameterError("unknown mock behavior");
}

std::vector<std::string> complete_shards(LlmBackend& backend,
                                         const std::vector<ChatRequest>& requests,
                                         int parallelism) {
  std::vector<std::string> responses(requests.size());
  if (parallelism <= 1 || requests.size() <= 1) {
    for (std::size_t i = 0; i < requests.size(); ++i) {
      responses[i] = backend.complete(requests[i]);
    }
    return responses;
  }
  // windows of `parallelism` async calls; responses land in shard order and
  // the first failing shard's exception propagates
  for (std::size_t base = 0; base < requests.size();
       base += static_cast<std::size_t>(parallelism)) {
    const std::size_t end = std::min(
        requests.size(), base + static_cast<std::size_t>(parallelism));
    std::vector<std::future<std::string>> window;
    for (std::size_t i = base; i < end; ++i) {
      window.push_back(std::async(std::launch::async, [&backend, &requests, i] {
        return backend.complete(requests[i]);
      }));
    }
    for (std::size_t i = base; i < end; ++i) {
      responses[i] = window[i - base].get();
    }
  }
  return responses;
}

}  // namespace dpicl
