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

#include "dpicl/tokenizer.hpp"

#include <cctype>
#include <unordered_set>

namespace dpicl {

namespace {

bool is_token_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kStopwords = {
      "a",       "about",   "above",  "after",  "again",  "all",    "am",
      "an",      "and",     "any",    "are",    "as",     "at",     "be",
      "because", "been",    "before", "being",  "below",  "between", "both",
      "but",     "by",      "can",    "did",    "do",     "does",   "doing",
      "down",    "during",  "each",   "few",    "for",    "from",   "further",
      "had",     "has",     "have",   "having", "he",     "her",    "here",
      "hers",    "him",     "his",    "how",    "i",      "if",     "in",
      "into",    "is",      "it",     "its",    "just",   "me",     "more",
      "most",    "my",      "no",     "nor",    "not",    "now",    "of",
      "off",     "on",      "once",   "only",   "or",     "other",  "our",
      "ours",    "out",     "over",   "own",    "same",   "she",    "should",
      "so",      "some",    "such",   "than",   "that",   "the",    "their",
      "theirs",  "them",    "then",   "there",  "these",  "they",   "this",
      "those",   "through", "to",     "too",    "under",  "until",  "up",
      "very",    "was",     "we",     "were",   "what",   "when",   "where",
      "which",   "while",   "who",    "whom",   "why",    "will",   "with",
      "you",     "your",    "yours"};
  return kStopwords;
}

}  // namespace

bool is_stopword(std::string_view token) {
  return stopwords().count(std::string(token)) > 0;
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string_view trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

std::vector<std::string> tokenize(std::string_view text,
                                  const TokenizerConfig& config) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (is_token_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));

  if (config.remove_stopwords) {
    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (auto& t : tokens) {
      if (!is_stopword(t)) kept.push_back(std::move(t));
    }
    tokens = std::move(kept);
  }
  return tokens;
}

}  // namespace dpicl
