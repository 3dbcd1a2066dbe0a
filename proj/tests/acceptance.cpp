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

// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line with
// its measured values; the process exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dpicl/pipeline.hpp"
#include "test_support.hpp"

using namespace dpicl;
using dpicl::testing::gaussian_cdf;
using dpicl::testing::levenshtein_oracle;
using dpicl::testing::make_clustered_corpus;
using dpicl::testing::random_unit_vector;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --------------------------------------------------------------------------
// 1. Calibration anchor
// --------------------------------------------------------------------------
Outcome calibration_anchor() {
  const CalibrationResult cal = calibrate_sigma({0.5, 1e-5}, std::sqrt(2.0), 1,
                                                default_alpha_grid());
  std::ostringstream detail;
  detail << "sigma=" << cal.sigma << " alpha*=" << cal.alpha_star.value();
  return {cal.sigma >= 9.0 && cal.sigma <= 15.0, detail.str()};
}

// --------------------------------------------------------------------------
// 2. Retrieval stability under single-element substitution
// --------------------------------------------------------------------------
Outcome stability_suite() {
  Rng rng(20250810);
  int worst = 0;
  for (int k : {1, 4, 40}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 41 + rng.below(160);
      const std::size_t dim = 2 + rng.below(15);
      std::vector<DemoRecord> records;
      for (std::size_t i = 0; i < n; ++i) {
        DemoRecord r;
        r.id = static_cast<std::int64_t>(i);
        r.content = "x";
        r.answer = "y";
        r.embedding = random_unit_vector(rng, dim);
        records.push_back(std::move(r));
      }
      std::vector<DemoRecord> mutated = records;
      mutated[rng.below(n)].embedding = random_unit_vector(rng, dim);
      const EmbeddingVector query = random_unit_vector(rng, dim);

      const FlatIndex a = FlatIndex::build(std::move(records));
      const FlatIndex b = FlatIndex::build(std::move(mutated));
      const auto ids_a = a.all_ids();
      const auto ids_b = b.all_ids();
      const auto ra = top_k(a, query, k, IdSet(ids_a.begin(), ids_a.end())).ids();
      const auto rb = top_k(b, query, k, IdSet(ids_b.begin(), ids_b.end())).ids();
      const std::set<std::int64_t> sa(ra.begin(), ra.end());
      const std::set<std::int64_t> sb(rb.begin(), rb.end());
      int sym_diff = 0;
      for (auto id : sa) sym_diff += sb.count(id) == 0;
      for (auto id : sb) sym_diff += sa.count(id) == 0;
      worst = std::max(worst, sym_diff);
    }
  }
  return {worst <= 2, "worst symmetric difference=" + std::to_string(worst) +
                          " over 3000 trials"};
}

// --------------------------------------------------------------------------
// 3. PTR false-release rate
// --------------------------------------------------------------------------
Outcome ptr_false_release() {
  TokenHistogram hist;
  hist.counts = {{"a", 3}, {"b", 2}};  // d_1 = 1 <= 2
  hist.num_responses = 5;
  const double delta_i = 0.05;
  const int trials = 100000;
  int released = 0;
  for (int i = 0; i < trials; ++i) {
    released += top_k_with_ptr(hist, 1, 1.0, delta_i, derive_seed(3, i)).released;
  }
  const double rate = static_cast<double>(released) / trials;
  std::ostringstream detail;
  detail << "rate=" << rate << " target=0.05 +- 0.0021";
  return {std::abs(rate - delta_i) <= 0.0021, detail.str()};
}

// --------------------------------------------------------------------------
// 4. FindBestK matches the exponential-mechanism softmax
// --------------------------------------------------------------------------
Outcome gumbel_em_fidelity() {
  Rng gen(44);
  const int k_min = 3;
  const int k_max = 18;
  const double epsilon = 1.0;
  const int samples = 100000;
  double worst_tv = 0.0;
  for (int instance = 0; instance < 5; ++instance) {
    TokenHistogram hist;
    const int vocab = 20 + static_cast<int>(gen.below(15));
    for (int v = 0; v < vocab; ++v) {
      hist.counts["tok" + std::to_string(v)] =
          static_cast<std::int64_t>(gen.below(25));
    }
    hist.num_responses = 25;

    std::vector<double> weights;
    double max_gap = 0.0;
    for (int k = k_min; k <= k_max; ++k) {
      max_gap = std::max(max_gap, static_cast<double>(gap_statistic(hist, k)));
    }
    double total = 0.0;
    for (int k = k_min; k <= k_max; ++k) {
      const double w = std::exp(
          epsilon * (static_cast<double>(gap_statistic(hist, k)) - max_gap) / 4.0);
      weights.push_back(w);
      total += w;
    }
    std::vector<int> hits(static_cast<std::size_t>(k_max - k_min + 1), 0);
    for (int i = 0; i < samples; ++i) {
      const int k = find_best_k(hist, epsilon, k_min, k_max,
                                derive_seed(900 + instance, i));
      ++hits[static_cast<std::size_t>(k - k_min)];
    }
    double tv = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      tv += std::abs(hits[j] / static_cast<double>(samples) - weights[j] / total);
    }
    worst_tv = std::max(worst_tv, tv / 2.0);
  }
  std::ostringstream detail;
  detail << "worst TV=" << worst_tv << " limit 0.02";
  return {worst_tv <= 0.02, detail.str()};
}

// --------------------------------------------------------------------------
// 5. RNM-Gaussian two-class closed form
// --------------------------------------------------------------------------
Outcome rnm_closed_form() {
  const double expected = gaussian_cdf(2.0 / (2.0 * std::sqrt(2.0)));
  const int trials = 100000;
  int wins = 0;
  for (int i = 0; i < trials; ++i) {
    wins += rnm_gaussian({{5, 3}}, 2.0, derive_seed(5, i)) == 0;
  }
  const double rate = static_cast<double>(wins) / trials;
  std::ostringstream detail;
  detail << "empirical=" << rate << " closed form=" << expected;
  return {std::abs(rate - expected) <= 0.006, detail.str()};
}

// --------------------------------------------------------------------------
// 6. Conversion round trip
// --------------------------------------------------------------------------
Outcome conversion_round_trip() {
  Rng rng(6);
  const double alphas[] = {1.5, 2, 4, 8, 32, 128};
  double worst_rel = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = alphas[rng.below(6)];
    const double eps = 10.0 * rng.uniform01();
    const double delta = 0.1 * rng.uniform01();
    const double delta_hat = delta + (1.0 - delta) * rng.uniform_open01();
    const ApproxRdp cost(RenyiOrder(a), eps, delta);
    const DpGuarantee inverse = invert_conversion(cost, delta_hat);
    const double round = approx_rdp_to_dp(cost, inverse.epsilon_hat).delta_hat;
    if (inverse.epsilon_hat > 0.0) {
      worst_rel = std::max(worst_rel, std::abs(round - delta_hat) / delta_hat);
    } else if (round > delta_hat * (1.0 + 1e-9)) {
      worst_rel = std::max(worst_rel, 1.0);  // clamped inverse must dominate
    }
  }
  std::ostringstream detail;
  detail << "worst relative error=" << worst_rel;
  return {worst_rel <= 1e-9, detail.str()};
}

// --------------------------------------------------------------------------
// 7. Filter exhaustion and budget safety
// --------------------------------------------------------------------------
Outcome filter_exhaustion() {
  Rng rng(7);
  const auto data = make_clustered_corpus(rng, 4, {40});
  const FlatIndex index = FlatIndex::build(data.records);
  MockBackend mock(MockBehavior::kMajorityLabel);

  RunConfig config;
  config.task = Task::kClassification;
  config.retrieval_mode = RetrievalMode::kKnn;
  config.classes = data.classes;
  config.num_shards = 10;
  config.n_shot = 4;
  config.sigma = 5.0;
  config.uses_per_record = 1;
  config.target_delta = 1e-5;
  config.seed = 77;

  Experiment experiment(config, index, mock);
  DemoRecord query = dpicl::testing::make_cluster_point(rng, 4, 0, 999, 0.05);
  const QueryOutcome first = experiment.run_query(query);
  const QueryOutcome second = experiment.run_query(query);
  const bool pipeline_ok = first.mode == QueryMode::kFull &&
                           first.retrieved.size() == 40 &&
                           second.mode == QueryMode::kFallbackZeroShot &&
                           second.retrieved.empty() &&
                           second.charged.epsilon_t == 0.0;

  // randomized ledger stress: never exceed either budget component
  bool ledger_ok = true;
  {
    std::vector<std::int64_t> ids(50);
    std::iota(ids.begin(), ids.end(), 0);
    FilterState state(ids, BudgetConfig{RenyiOrder(16), 1.0, 0.01, 1e-5});
    for (int op = 0; op < 10000; ++op) {
      const QueryCost cost{0.4 * rng.uniform01(), 0.002 * rng.uniform01()};
      const IdSet eligible = state.eligible_set(cost);
      std::vector<std::int64_t> retrieved;
      for (std::int64_t id : eligible) {
        if (rng.uniform01() < 0.25) retrieved.push_back(id);
      }
      state.charge(retrieved, cost);
    }
    for (std::int64_t id : state.ids()) {
      ledger_ok = ledger_ok && state.ledger(id).spent_epsilon <= 1.0 &&
                  state.ledger(id).spent_delta <= 0.01;
    }
  }
  std::ostringstream detail;
  detail << (pipeline_ok ? "exhaustion+fallback ok" : "exhaustion FAILED")
         << ", ledgers " << (ledger_ok ? "within budget" : "OVER BUDGET")
         << " after 10000 ops";
  return {pipeline_ok && ledger_ok, detail.str()};
}

// --------------------------------------------------------------------------
// 8. Headline-claim proxy: kNN beats the Poisson baseline at equal sigma
// --------------------------------------------------------------------------
double run_accuracy(const RunConfig& config, const FlatIndex& index,
                    const std::vector<DemoRecord>& queries) {
  MockBackend mock(MockBehavior::kMajorityLabel);
  const RunResult result = run_experiment(queries, config, index, mock);
  int correct = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    correct += result.outcomes[i].answer == queries[i].answer;
  }
  return static_cast<double>(correct) / static_cast<double>(queries.size());
}

Outcome headline_proxy() {
  // class mix is deliberately skewed so the baseline's signal (the corpus
  // prior) is separated from the uniform floor, while kNN also sees the
  // query-conditional signal
  const std::vector<int> class_counts = {1300, 300, 240, 160};  // N = 2000
  const std::vector<int> query_counts = {65, 15, 12, 8};        // 100 queries
  const double sigma =
      calibrate_sigma({1.0, 1e-5}, std::sqrt(2.0), 1, default_alpha_grid()).sigma;

  double knn_acc = 0.0;
  double poisson_acc = 0.0;
  double floor_acc = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const auto data = make_clustered_corpus(rng, 16, class_counts);
    const FlatIndex index = FlatIndex::build(data.records);

    std::vector<DemoRecord> queries;
    std::int64_t qid = 100000;
    for (std::size_t c = 0; c < query_counts.size(); ++c) {
      for (int i = 0; i < query_counts[c]; ++i) {
        queries.push_back(dpicl::testing::make_cluster_point(
            rng, 16, static_cast<int>(c), qid++, 0.05));
      }
    }
    // interleave classes deterministically
    std::vector<DemoRecord> shuffled;
    shuffled.reserve(queries.size());
    for (std::size_t step = 0; step < queries.size(); ++step) {
      shuffled.push_back(queries[(step * 37) % queries.size()]);
    }

    RunConfig base;
    base.task = Task::kClassification;
    base.classes = data.classes;
    base.num_shards = 10;
    base.n_shot = 4;
    base.sigma = sigma;
    base.uses_per_record = 3;
    base.target_delta = 1e-5;
    base.seed = seed;

    RunConfig knn = base;
    knn.retrieval_mode = RetrievalMode::kKnn;
    RunConfig poisson = base;
    poisson.retrieval_mode = RetrievalMode::kPoisson;
    RunConfig floor = base;
    floor.retrieval_mode = RetrievalMode::kKnn;
    floor.sigma = 1e9;  // noise drowns every vote: the uniform floor

    knn_acc += run_accuracy(knn, index, shuffled, data.classes);
    poisson_acc += run_accuracy(poisson, index, shuffled, data.classes);
    floor_acc += run_accuracy(floor, index, shuffled, data.classes);
  }
  knn_acc /= 5.0;
  poisson_acc /= 5.0;
  floor_acc /= 5.0;

  std::ostringstream detail;
  detail << "sigma=" << sigma << " knn=" << knn_acc << " poisson=" << poisson_acc
         << " floor=" << floor_acc;
  const bool pass = knn_acc >= poisson_acc + 0.10 && knn_acc > floor_acc &&
                    poisson_acc > floor_acc;
  return {pass, detail.str()};
}

// --------------------------------------------------------------------------
// 9. Guarantee data independence
// --------------------------------------------------------------------------
Outcome guarantee_data_independence() {
  Rng rng(9);
  const auto small = make_clustered_corpus(rng, 4, {10, 10});
  const auto large = make_clustered_corpus(rng, 4, {70, 50});
  const FlatIndex index_small = FlatIndex::build(small.records);
  const FlatIndex index_large = FlatIndex::build(large.records);
  MockBackend mock(MockBehavior::kMajorityLabel);

  RunConfig config;
  config.task = Task::kClassification;
  config.retrieval_mode = RetrievalMode::kKnn;
  config.classes = small.classes;
  config.num_shards = 2;
  config.n_shot = 2;
  config.sigma = 6.0;
  config.alpha_star = 32.0;
  config.uses_per_record = 2;
  config.target_delta = 1e-5;

  std::vector<DemoRecord> queries_a;
  for (int i = 0; i < 3; ++i) {
    queries_a.push_back(dpicl::testing::make_cluster_point(rng, 4, 0, 300 + i, 0.05));
  }
  std::vector<DemoRecord> queries_b;
  for (int i = 0; i < 19; ++i) {
    queries_b.push_back(dpicl::testing::make_cluster_point(rng, 4, i % 2, 400 + i, 0.05));
  }
  const RunResult a = run_experiment(queries_a, config, index_small, mock);
  const RunResult b = run_experiment(queries_b, config, index_large, mock);
  std::ostringstream detail;
  detail << "eps_hat=" << a.guarantee.epsilon_hat << " both runs";
  const bool pass = a.guarantee.epsilon_hat == b.guarantee.epsilon_hat &&
                    a.guarantee.delta_hat == b.guarantee.delta_hat;
  return {pass, detail.str()};
}

// --------------------------------------------------------------------------
// 10. Metrics oracle
// --------------------------------------------------------------------------
Outcome metrics_oracle() {
  bool ok = true;
  std::ostringstream detail;
  ok = ok && std::abs(rouge_n("the cat sat", "the cat", 1) - 0.8) <= 1e-9;
  ok = ok && std::abs(rouge_n("a b c", "a b c", 2) - 1.0) <= 1e-9;
  ok = ok && std::abs(rouge_l("a b c d", "a x c d") - 0.75) <= 1e-9;
  ok = ok && std::abs(anls("paris", "pariss") - (1.0 - 1.0 / 6.0)) <= 1e-9;
  ok = ok && std::abs(bleu("same exact words here", "same exact words here") - 1.0) <= 1e-9;
  ok = ok && bleu("the the the", "the cat") < 0.34;
  ok = ok && exact_match("Paris", "paris") == 1.0;
  ok = ok && exact_match("Paris", "Paris, France") == 0.0;
  if (!ok) detail << "hand-computed example mismatch; ";

  Rng rng(10);
  const std::string alphabet = "abcdxyz ";
  bool lev_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    std::string a, b;
    for (std::size_t i = 0; i < rng.below(24); ++i) {
      a.push_back(alphabet[rng.below(alphabet.size())]);
    }
    for (std::size_t i = 0; i < rng.below(24); ++i) {
      b.push_back(alphabet[rng.below(alphabet.size())]);
    }
    lev_ok = lev_ok && levenshtein(a, b) == levenshtein_oracle(a, b);
  }
  detail << (lev_ok ? "levenshtein matches DP oracle on 1000 pairs"
                    : "levenshtein MISMATCH");
  return {ok && lev_ok, detail.str()};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "calibration anchor sigma in [9,15]", 1.0, calibration_anchor},
      {2, "retrieval stability, 1000 substitutions x k in {1,4,40}", 10.0,
       stability_suite},
      {3, "PTR false-release rate = delta_i", 5.0, ptr_false_release},
      {4, "FindBestK matches the softmax (TV <= 0.02)", 10.0, gumbel_em_fidelity},
      {5, "RNM-Gaussian two-class closed form", 5.0, rnm_closed_form},
      {6, "conversion round trip at 1e-9", 1.0, conversion_round_trip},
      {7, "filter exhaustion and budget safety", 5.0, filter_exhaustion},
      {8, "kNN beats Poisson by >= 10 points at equal sigma", 60.0,
       headline_proxy},
      {9, "reported guarantee is data independent", 5.0,
       guarantee_data_independence},
      {10, "metrics match hand-computed oracles", 5.0, metrics_oracle},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    const bool in_time = elapsed < criterion.time_limit_seconds;
    const bool pass = outcome.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("[%s] criterion %2d: %s (%s) [%.2fs%s]\n",
                pass ? "PASS" : "FAIL", criterion.id, criterion.name,
                outcome.detail.c_str(), elapsed,
                in_time ? "" : " OVER TIME LIMIT");
    std::fflush(stdout);
  }
  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d acceptance criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
