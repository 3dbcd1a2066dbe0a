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

#include "dpicl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "dpicl/tokenizer.hpp"

namespace dpicl {

namespace {

constexpr double kBleuSmoothing = 1e-9;

std::string normalize(std::string_view text) {
  return to_lower_ascii(trim(text));
}

// joins n consecutive tokens with a separator that cannot occur in them
std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens,
                                        int n) {
  std::map<std::string, int> counts;
  if (n <= 0 || tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string gram;
    for (int j = 0; j < n; ++j) {
      if (j > 0) gram.push_back('\x1f');
      gram += tokens[i + static_cast<std::size_t>(j)];
    }
    ++counts[gram];
  }
  return counts;
}

int clipped_overlap(const std::map<std::string, int>& a,
                    const std::map<std::string, int>& b) {
  int overlap = 0;
  for (const auto& [gram, count] : a) {
    const auto it = b.find(gram);
    if (it != b.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

int total(const std::map<std::string, int>& counts) {
  int sum = 0;
  for (const auto& [gram, count] : counts) sum += count;
  return sum;
}

double f1(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double exact_match(std::string_view prediction, std::string_view reference) {
  return normalize(prediction) == normalize(reference) ? 1.0 : 0.0;
}

double rouge_n(std::string_view prediction, std::string_view reference, int n) {
  const auto pred = ngram_counts(tokenize(prediction), n);
  const auto ref = ngram_counts(tokenize(reference), n);
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;
  const int overlap = clipped_overlap(pred, ref);
  return f1(static_cast<double>(overlap) / total(pred),
            static_cast<double>(overlap) / total(ref));
}

double rouge_l(std::string_view prediction, std::string_view reference) {
  const auto pred = tokenize(prediction);
  const auto ref = tokenize(reference);
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(pred, ref));
  return f1(lcs / static_cast<double>(pred.size()),
            lcs / static_cast<double>(ref.size()));
}

double bleu(std::string_view prediction, std::string_view reference) {
  const auto pred = tokenize(prediction);
  const auto ref = tokenize(reference);
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;

  const int max_n = static_cast<int>(std::min<std::size_t>(4, pred.size()));
  double log_precision = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto pred_grams = ngram_counts(pred, n);
    const auto ref_grams = ngram_counts(ref, n);
    const int overlap = clipped_overlap(pred_grams, ref_grams);
    const double numerator = overlap > 0 ? overlap : kBleuSmoothing;
    log_precision += std::log(numerator / total(pred_grams));
  }
  log_precision /= max_n;

  const double c = static_cast<double>(pred.size());
  const double r = static_cast<double>(ref.size());
  const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
  return brevity * std::exp(log_precision);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double anls(std::string_view prediction, std::string_view reference,
            double threshold) {
  const std::string pred = normalize(prediction);
  const std::string ref = normalize(reference);
  if (pred.empty() && ref.empty()) return 1.0;
  const double longest = static_cast<double>(std::max(pred.size(), ref.size()));
  const double similarity =
      1.0 - static_cast<double>(levenshtein(pred, ref)) / longest;
  return similarity >= threshold ? similarity : 0.0;
}

QueryScores score_pair(std::string_view prediction, std::string_view reference) {
  QueryScores s;
  s.exact_match = exact_match(prediction, reference);
  s.rouge1 = rouge_n(prediction, reference, 1);
  s.rouge2 = rouge_n(prediction, reference, 2);
  s.rouge_l = rouge_l(prediction, reference);
  s.bleu = bleu(prediction, reference);
  s.anls = anls(prediction, reference);
  return s;
}

QueryScores MetricReport::means() const {
  QueryScores m;
  if (per_query.empty()) return m;
  for (const QueryScores& s : per_query) {
    m.exact_match += s.exact_match;
    m.rouge1 += s.rouge1;
    m.rouge2 += s.rouge2;
    m.rouge_l += s.rouge_l;
    m.bleu += s.bleu;
    m.anls += s.anls;
  }
  const double n = static_cast<double>(per_query.size());
  m.exact_match /= n;
  m.rouge1 /= n;
  m.rouge2 /= n;
  m.rouge_l /= n;
  m.bleu /= n;
  m.anls /= n;
  return m;
}

}  // namespace dpicl
