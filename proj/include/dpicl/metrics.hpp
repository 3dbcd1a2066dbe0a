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

#ifndef DPICL_METRICS_HPP_
#define DPICL_METRICS_HPP_

#include <cstddef>
#include <string_view>
#include <vector>

namespace dpicl {

// Case-folded, whitespace-trimmed equality.
double exact_match(std::string_view prediction, std::string_view reference);

// F1 over n-gram multiset overlap, n in {1, 2}. Both-empty pairs score 1 by
// convention, one-empty pairs 0.
double rouge_n(std::string_view prediction, std::string_view reference, int n);

// F1 over the longest common token subsequence.
double rouge_l(std::string_view prediction, std::string_view reference);

// Geometric mean of clipped n-gram precisions (n up to min(4, |prediction|))
// with 1e-9 smoothing on zero counts, times the brevity penalty.
double bleu(std::string_view prediction, std::string_view reference);

// Normalized Levenshtein similarity with threshold zeroing:
// s = 1 - lev/max(len); returns s if s >= threshold else 0.
double anls(std::string_view prediction, std::string_view reference,
            double threshold = 0.5);

std::size_t levenshtein(std::string_view a, std::string_view b);

struct QueryScores {
  double exact_match = 0.0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rouge_l = 0.0;
  double bleu = 0.0;
  double anls = 0.0;
};

QueryScores score_pair(std::string_view prediction, std::string_view reference);

// Per-query values plus arithmetic means.
struct MetricReport {
  std::vector<QueryScores> per_query;
  QueryScores means() const;
};

}  // namespace dpicl

#endif  // DPICL_METRICS_HPP_
