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

#ifndef DPICL_TOKENIZER_HPP_
#define DPICL_TOKENIZER_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace dpicl {

// Lowercases and splits on non-alphanumeric runs (bytes >= 0x80 are kept, so
// UTF-8 sequences survive inside tokens). Pure-punctuation tokens vanish by
// construction. Stopword removal is used by keyword aggregation; the metrics
// keep every token.
struct TokenizerConfig {
  bool remove_stopwords = false;
};

std::vector<std::string> tokenize(std::string_view text,
                                  const TokenizerConfig& config = {});

bool is_stopword(std::string_view token);

std::string to_lower_ascii(std::string_view text);

// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view text);

}  // namespace dpicl

#endif  // DPICL_TOKENIZER_HPP_
