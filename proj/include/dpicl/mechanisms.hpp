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

#ifndef DPICL_MECHANISMS_HPP_
#define DPICL_MECHANISMS_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dpicl/error.hpp"
#include "dpicl/rng.hpp"
#include "dpicl/tokenizer.hpp"

namespace dpicl {

// Per-class vote counts, one bin per class index.
struct VoteHistogram {
  std::vector<std::int64_t> counts;
};

enum class InvalidVotePolicy {
  kDrop,  // off-vocabulary votes are dropped and counted
};

struct VoteBuildResult {
  VoteHistogram histogram;
  int dropped = 0;
};

// Counts shard votes per class; every class keeps a bin even at zero.
VoteBuildResult build_vote_histogram(std::span<const std::string> labels,
                                     std::span<const std::string> classes,
                                     InvalidVotePolicy policy = InvalidVotePolicy::kDrop);

// Report-noisy-max with Gaussian noise: argmax_i (h_i + N(0, sigma^2)).
// Ties (a probability-zero event for sigma > 0) go to the smaller index.
std::size_t rnm_gaussian(const VoteHistogram& histogram, double sigma,
                         std::uint64_t seed);

// Token counts with per-response set semantics: a token counts once per
// response that contains it.
struct TokenHistogram {
  std::map<std::string, std::int64_t> counts;
  int num_responses = 0;
};

TokenHistogram build_token_histogram(std::span<const std::string> responses,
                                     const TokenizerConfig& config = {
                                         .remove_stopwords = true});

// d_k = H(k) - H(k+1) on the descending-sorted counts, with H(j) = 0 beyond
// the vocabulary.
std::int64_t gap_statistic(const TokenHistogram& histogram, int k);

// Exponential-mechanism choice of k in [k_min, k_max] maximizing the gap,
// via Gumbel noise of scale 4/epsilon_em. Deterministic given the seed;
// epsilon_em = +infinity degenerates to the noiseless argmax (smallest k on
// ties).
int find_best_k(const TokenHistogram& histogram, double epsilon_em, int k_min,
                int k_max, std::uint64_t seed);

// Outcome of the propose-test-release gate.
struct KeywordRelease {
  bool released = false;
  std::vector<std::string> tokens;  // exact top-k when released
};

// Releases the exact top-k tokens iff
//   max(2, d_k) + N(0, (2 sigma)^2) - Phi^{-1}(1 - delta_i; 0, 2 sigma) > 2.
// On d_k <= 2 the release probability is exactly delta_i.
KeywordRelease top_k_with_ptr(const TokenHistogram& histogram, int k,
                              double sigma, double delta_i, std::uint64_t seed);

// Top-k tokens by count, ties toward the lexicographically smaller token.
std::vector<std::string> exact_top_k_tokens(const TokenHistogram& histogram,
                                            int k);

// Inverse normal CDF (absolute error below 1e-9 in standardized units).
double gaussian_quantile(double p, double mean = 0.0, double stddev = 1.0);

double sample_gaussian(Rng& rng, double mean, double stddev);

// scale * (-log(-log U)), U uniform on (0,1).
double sample_gumbel(Rng& rng, double scale);

}  // namespace dpicl

#endif  // DPICL_MECHANISMS_HPP_
