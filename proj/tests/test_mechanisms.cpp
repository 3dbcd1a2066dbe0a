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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "dpicl/mechanisms.hpp"
#include "test_support.hpp"

using namespace dpicl;
using dpicl::testing::gaussian_cdf;

namespace {

TokenHistogram hist_of(std::initializer_list<std::pair<const char*, std::int64_t>> items,
                       int num_responses) {
  TokenHistogram h;
  h.num_responses = num_responses;
  for (const auto& [token, count] : items) h.counts[token] = count;
  return h;
}

}  // namespace

TEST_CASE("build_vote_histogram") {
  const std::vector<std::string> classes = {"A", "B", "C"};
  SUBCASE("counts with explicit zeros") {
    const std::vector<std::string> labels = {"A", "A", "B"};
    const VoteBuildResult r = build_vote_histogram(labels, classes);
    CHECK(r.histogram.counts == std::vector<std::int64_t>{2, 1, 0});
    CHECK(r.dropped == 0);
  }
  SUBCASE("empty labels give all zeros") {
    const VoteBuildResult r = build_vote_histogram({}, classes);
    CHECK(r.histogram.counts == std::vector<std::int64_t>{0, 0, 0});
  }
  SUBCASE("off-vocabulary votes dropped and recorded") {
    const std::vector<std::string> labels = {"A", "nonsense", "B"};
    const VoteBuildResult r = build_vote_histogram(labels, classes);
    CHECK(r.histogram.counts == std::vector<std::int64_t>{1, 1, 0});
    CHECK(r.dropped == 1);
  }
  SUBCASE("empty class set rejected") {
    CHECK_THROWS_AS(build_vote_histogram({}, {}), InvalidParameterError);
  }
}

TEST_CASE("rnm_gaussian") {
  SUBCASE("noiseless argmax and tie rule") {
    CHECK(rnm_gaussian({{5, 3}}, 0.0, 1) == 0);
    CHECK(rnm_gaussian({{3, 5}}, 0.0, 1) == 1);
    CHECK(rnm_gaussian({{4, 4, 4}}, 0.0, 1) == 0);
  }
  SUBCASE("empty histogram rejected") {
    CHECK_THROWS_AS(rnm_gaussian({{}}, 1.0, 1), InvalidParameterError);
  }
  SUBCASE("two-class closed form") {
    // P(class 0) = Phi((h0 - h1) / (sigma * sqrt(2)))
    const double expected = gaussian_cdf(2.0 / (2.0 * std::sqrt(2.0)));
    CHECK(expected == doctest::Approx(0.7602499389065233).epsilon(1e-12));
    const int n = 100000;
    int wins = 0;
    for (int i = 0; i < n; ++i) {
      wins += rnm_gaussian({{5, 3}}, 2.0, 123456 + i) == 0;
    }
    CHECK(std::abs(static_cast<double>(wins) / n - expected) < 0.006);
  }
  SUBCASE("closed form holds for random two-class instances") {
    Rng rng(77);
    const int n = 100000;
    for (int inst = 0; inst < 20; ++inst) {
      const std::int64_t h0 = static_cast<std::int64_t>(rng.below(12));
      const std::int64_t h1 = static_cast<std::int64_t>(rng.below(12));
      const double sigma = 0.5 + 4.0 * rng.uniform01();
      const double p = gaussian_cdf(static_cast<double>(h0 - h1) /
                                    (sigma * std::sqrt(2.0)));
      int wins = 0;
      for (int i = 0; i < n; ++i) {
        wins += rnm_gaussian({{h0, h1}}, sigma, derive_seed(900 + inst, i)) == 0;
      }
      const double phat = static_cast<double>(wins) / n;
      const double tol = 5.0 * std::sqrt(std::max(p * (1 - p), 1e-6) / n);
      CHECK(std::abs(phat - p) < std::max(tol, 1e-3));
    }
  }
  SUBCASE("symmetric histogram splits evenly") {
    const int n = 60000;
    std::vector<int> hits(3, 0);
    for (int i = 0; i < n; ++i) {
      ++hits[rnm_gaussian({{4, 4, 4}}, 1.5, 5000 + i)];
    }
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(hits[c] / static_cast<double>(n) - 1.0 / 3) < 0.01);
    }
  }
}

TEST_CASE("build_token_histogram set semantics") {
  SUBCASE("token counted once per response") {
    const std::vector<std::string> responses = {"paris france", "paris"};
    const TokenHistogram h = build_token_histogram(responses, {});
    CHECK(h.counts.at("paris") == 2);
    CHECK(h.counts.at("france") == 1);
    CHECK(h.num_responses == 2);
  }
  SUBCASE("within-response duplicates collapse") {
    const std::vector<std::string> responses = {"go go go"};
    const TokenHistogram h = build_token_histogram(responses, {});
    CHECK(h.counts.at("go") == 1);
  }
  SUBCASE("lowercasing, punctuation, stopwords") {
    const std::vector<std::string> responses = {"The Answer!", "the answer"};
    const TokenHistogram keep = build_token_histogram(responses, {});
    CHECK(keep.counts.at("the") == 2);
    CHECK(keep.counts.at("answer") == 2);
    const TokenHistogram filtered =
        build_token_histogram(responses, {.remove_stopwords = true});
    CHECK(filtered.counts.count("the") == 0);
    CHECK(filtered.counts.at("answer") == 2);
  }
}

TEST_CASE("gap statistic") {
  const TokenHistogram h = hist_of({{"a", 9}, {"b", 5}, {"c", 2}}, 10);
  CHECK(gap_statistic(h, 1) == 4);
  CHECK(gap_statistic(h, 2) == 3);
  CHECK(gap_statistic(h, 3) == 2);   // H(4) = 0 beyond vocabulary
  CHECK(gap_statistic(h, 7) == 0);
  CHECK_THROWS_AS(gap_statistic(h, 0), InvalidParameterError);
}

TEST_CASE("find_best_k") {
  SUBCASE("noiseless limit picks the largest gap, smallest k on ties") {
    const TokenHistogram h = hist_of({{"a", 10}, {"b", 10}, {"c", 4}, {"d", 1}}, 10);
    // gaps: d_1=0, d_2=6, d_3=3, d_4=1
    CHECK(find_best_k(h, std::numeric_limits<double>::infinity(), 1, 4, 9) == 2);
    const TokenHistogram flat = hist_of({{"a", 5}, {"b", 5}}, 5);
    CHECK(find_best_k(flat, std::numeric_limits<double>::infinity(), 3, 9, 9) == 3);
  }
  SUBCASE("softmax two-candidate probability") {
    // gaps (10, 6), eps=1: P(k=1) = e^{2.5} / (e^{2.5} + e^{1.5})
    const TokenHistogram h = hist_of({{"a", 17}, {"b", 7}, {"c", 1}}, 20);
    REQUIRE(gap_statistic(h, 1) == 10);
    REQUIRE(gap_statistic(h, 2) == 6);
    const double expected = std::exp(2.5) / (std::exp(2.5) + std::exp(1.5));
    CHECK(expected == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    const int n = 100000;
    int first = 0;
    for (int i = 0; i < n; ++i) {
      first += find_best_k(h, 1.0, 1, 2, derive_seed(31337, i)) == 1;
    }
    CHECK(std::abs(static_cast<double>(first) / n - expected) < 0.006);
  }
  SUBCASE("equal gaps spread uniformly") {
    const TokenHistogram h = hist_of({{"a", 3}, {"b", 3}, {"c", 3}}, 3);
    const int k_min = 4, k_max = 8;  // all gaps zero out here
    const int n = 50000;
    std::vector<int> hits(k_max + 1, 0);
    for (int i = 0; i < n; ++i) {
      ++hits[find_best_k(h, 2.0, k_min, k_max, derive_seed(555, i))];
    }
    for (int k = k_min; k <= k_max; ++k) {
      CHECK(std::abs(hits[k] / static_cast<double>(n) - 0.2) < 0.01);
    }
  }
  SUBCASE("bad ranges rejected") {
    const TokenHistogram h = hist_of({{"a", 1}}, 1);
    CHECK_THROWS_AS(find_best_k(h, 1.0, 3, 2, 1), InvalidParameterError);
    CHECK_THROWS_AS(find_best_k(h, 0.0, 1, 2, 1), InvalidParameterError);
    CHECK_THROWS_AS(find_best_k(h, 1.0, 0, 2, 1), InvalidParameterError);
  }
}

TEST_CASE("top_k_with_ptr") {
  SUBCASE("huge gap releases the exact top-k") {
    TokenHistogram h = hist_of({{"zeus", 1000}, {"apollo", 999}, {"hermes", 2}}, 1000);
    const KeywordRelease r = top_k_with_ptr(h, 2, 1.0, 0.05, 424242);
    REQUIRE(r.released);
    CHECK(r.tokens == std::vector<std::string>{"zeus", "apollo"});
    CHECK(r.tokens == exact_top_k_tokens(h, 2));
  }
  SUBCASE("released list always equals the deterministic top-k") {
    Rng rng(808);
    for (int trial = 0; trial < 300; ++trial) {
      TokenHistogram h;
      const int vocab = 1 + static_cast<int>(rng.below(12));
      for (int v = 0; v < vocab; ++v) {
        h.counts["tok" + std::to_string(v)] =
            static_cast<std::int64_t>(rng.below(30));
      }
      h.num_responses = 30;
      const int k = 1 + static_cast<int>(rng.below(6));
      const KeywordRelease r = top_k_with_ptr(h, k, 0.8, 0.2, derive_seed(4, trial));
      if (r.released) {
        CHECK(r.tokens == exact_top_k_tokens(h, k));
      } else {
        CHECK(r.tokens.empty());
      }
    }
  }
  SUBCASE("false release rate equals delta_i when the gap is small") {
    const TokenHistogram h = hist_of({{"a", 3}, {"b", 2}}, 5);  // d_1 = 1 <= 2
    const double delta_i = 0.05;
    const int n = 100000;
    int released = 0;
    for (int i = 0; i < n; ++i) {
      released += top_k_with_ptr(h, 1, 1.0, delta_i, derive_seed(71, i)).released;
    }
    const double rate = static_cast<double>(released) / n;
    const double band = 3.0 * std::sqrt(delta_i * (1 - delta_i) / n);
    CHECK(std::abs(rate - delta_i) < band);
  }
  SUBCASE("tie-breaking is lexicographic") {
    const TokenHistogram h = hist_of({{"pear", 5}, {"apple", 5}, {"fig", 5}}, 5);
    CHECK(exact_top_k_tokens(h, 2) == std::vector<std::string>{"apple", "fig"});
  }
  SUBCASE("parameter validation") {
    const TokenHistogram h = hist_of({{"a", 1}}, 1);
    CHECK_THROWS_AS(top_k_with_ptr(h, 0, 1.0, 0.1, 1), InvalidParameterError);
    CHECK_THROWS_AS(top_k_with_ptr(h, 1, 0.0, 0.1, 1), InvalidParameterError);
    CHECK_THROWS_AS(top_k_with_ptr(h, 1, 1.0, 0.0, 1), InvalidParameterError);
    CHECK_THROWS_AS(top_k_with_ptr(h, 1, 1.0, 1.0, 1), InvalidParameterError);
  }
}

TEST_CASE("token histogram sensitivity bound") {
  // changing one response moves every count by at most 1 and any gap by at
  // most 2; this is what justifies the threshold of 2 and noise std 2*sigma
  Rng rng(4242);
  const std::vector<std::string> vocab = {"red", "green", "blue", "gold", "rust"};
  for (int trial = 0; trial < 400; ++trial) {
    const int m = 2 + static_cast<int>(rng.below(6));
    std::vector<std::string> responses;
    for (int i = 0; i < m; ++i) {
      std::string r;
      for (const auto& w : vocab) {
        if (rng.uniform01() < 0.5) r += w + " ";
      }
      responses.push_back(r);
    }
    std::vector<std::string> changed = responses;
    std::string alt;
    for (const auto& w : vocab) {
      if (rng.uniform01() < 0.5) alt += w + " ";
    }
    changed[rng.below(static_cast<std::uint64_t>(m))] = alt;

    const TokenHistogram ha = build_token_histogram(responses, {});
    const TokenHistogram hb = build_token_histogram(changed, {});
    for (const auto& w : vocab) {
      const std::int64_t ca = ha.counts.count(w) ? ha.counts.at(w) : 0;
      const std::int64_t cb = hb.counts.count(w) ? hb.counts.at(w) : 0;
      CHECK(std::abs(ca - cb) <= 1);
    }
    for (int k = 1; k <= 6; ++k) {
      CHECK(std::abs(gap_statistic(ha, k) - gap_statistic(hb, k)) <= 2);
    }
  }
}

TEST_CASE("gaussian_quantile") {
  SUBCASE("median is the mean") {
    CHECK(gaussian_quantile(0.5, 3.25, 2.0) == doctest::Approx(3.25));
  }
  SUBCASE("reference value") {
    CHECK(gaussian_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
  }
  SUBCASE("round trip against the erf-based CDF") {
    for (double p = 0.0005; p < 1.0; p += 0.0007) {
      CHECK(gaussian_cdf(gaussian_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
    }
    for (double p : {1e-12, 1e-9, 1.0 - 1e-9}) {
      CHECK(gaussian_cdf(gaussian_quantile(p)) == doctest::Approx(p).epsilon(1e-7));
    }
  }
  SUBCASE("domain errors") {
    CHECK_THROWS_AS(gaussian_quantile(0.0), InvalidParameterError);
    CHECK_THROWS_AS(gaussian_quantile(1.0), InvalidParameterError);
    CHECK_THROWS_AS(gaussian_quantile(0.5, 0.0, 0.0), InvalidParameterError);
  }
}
