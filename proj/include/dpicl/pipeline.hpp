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

#ifndef DPICL_PIPELINE_HPP_
#define DPICL_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpicl/llm_client.hpp"
#include "dpicl/mechanisms.hpp"
#include "dpicl/metrics.hpp"
#include "dpicl/privacy_core.hpp"
#include "dpicl/privacy_filter.hpp"
#include "dpicl/retrieval.hpp"

namespace dpicl {

enum class Task { kClassification, kQa };
enum class RetrievalMode { kKnn, kPoisson, kDummyNn };

struct RunConfig {
  Task task = Task::kClassification;
  RetrievalMode retrieval_mode = RetrievalMode::kKnn;
  int num_shards = 10;  // M
  int n_shot = 4;       // demos per shard; retrieval depth k = M * n_shot

  // mechanism parameters; sigma == 0 requests calibration from the target
  double sigma = 0.0;
  double epsilon_em = 0.0;  // FindBestK budget, 0 disables it (k = k_min)
  double delta_i = 0.0;     // per-query PTR failure mass, 0 derives it
  int k_min = 15;
  int k_max = 30;

  // end-to-end target guarantee and per-record use budget
  double target_epsilon = 1.0;
  double target_delta = 1e-5;
  int uses_per_record = 1;
  double alpha_star = 0.0;  // 0 picks the best grid order

  double gamma = 0.0;  // poisson inclusion probability, 0 derives M*n_shot/N

  std::vector<std::string> classes;  // classification label set
  double temperature = -1.0;         // <0 uses the task default (0 / 0.7)
  int max_tokens = 64;
  std::string model;
  std::uint64_t seed = 0;
  int parallelism = 0;  // shard-level concurrency; 0 = backend default
  bool audit_responses = false;
};

// Privacy quantities pinned before any query runs.
struct ResolvedPrivacy {
  double sigma = 0.0;
  RenyiOrder alpha_star;
  QueryCost cost;          // per retrieved record, at alpha_star
  BudgetConfig budget;     // epsilon_max = uses * cost.epsilon_t
  double delta_i = 0.0;
  double gamma = 0.0;          // poisson only
  QueryCost poisson_cost;      // subsampled per-query cost (poisson only)
  int max_uses_per_record = 0;
};

ResolvedPrivacy resolve_privacy(const RunConfig& config, std::size_t corpus_size);

enum class QueryMode { kFull, kFallbackZeroShot };
enum class QueryStatus { kOk, kFailed };

struct QueryOutcome {
  std::int64_t query_id = 0;
  QueryStatus status = QueryStatus::kOk;
  std::string answer;
  QueryMode mode = QueryMode::kFull;
  std::vector<std::int64_t> retrieved;
  std::vector<std::string> shard_responses;  // populated when auditing
  QueryCost charged;
  int dropped_votes = 0;
  std::vector<std::string> released_keywords;
  std::string error;

  friend bool operator==(const QueryOutcome&, const QueryOutcome&) = default;
};

// One configured experiment over a fixed corpus: gates the corpus through the
// privacy filter, retrieves and shards demonstrations, queries the LLM per
// shard, aggregates privately and keeps the ledgers current.
class Experiment {
 public:
  Experiment(const RunConfig& config, const FlatIndex& index, LlmBackend& backend);
  // Resume with previously spent ledgers.
  Experiment(const RunConfig& config, const FlatIndex& index, LlmBackend& backend,
             FilterState state);

  // Throws TransportError on shard failures (nothing is charged then).
  QueryOutcome run_query(const DemoRecord& query);

  const RunConfig& config() const { return config_; }
  const ResolvedPrivacy& privacy() const { return privacy_; }
  const FilterState& filter() const { return state_; }
  FilterState& filter() { return state_; }

  // Budget-implied guarantee for filter modes; accumulated subsampled cost
  // for the poisson baseline.
  DpGuarantee report_guarantee() const;

  // Records that can no longer afford one more query.
  std::size_t records_exhausted() const;

 private:
  QueryOutcome classify_query(const DemoRecord& query, std::size_t ordinal);
  QueryOutcome answer_query(const DemoRecord& query, std::size_t ordinal);
  QueryOutcome dummy_nn_query(const DemoRecord& query, std::size_t ordinal);

  struct Retrieval {
    bool fallback = false;
    std::vector<std::int64_t> retrieved;
    ShardPlan plan;
  };
  Retrieval retrieve(const DemoRecord& query, std::size_t ordinal);
  void charge_retrieved(const std::vector<std::int64_t>& retrieved);
  ChatRequest make_request(std::string prompt, std::int64_t query_id,
                           int shard_index) const;
  int effective_parallelism() const;

  RunConfig config_;
  ResolvedPrivacy privacy_;
  const FlatIndex& index_;
  LlmBackend& backend_;
  FilterState state_;
  ApproxRdp poisson_total_;
  std::size_t ordinal_ = 0;
};

struct RunResult {
  std::vector<QueryOutcome> outcomes;
  DpGuarantee guarantee;
  MetricReport metrics;   // over queries with ground truth, in input order
  bool has_metrics = false;
  std::size_t records_exhausted = 0;
  int failures = 0;
};

// Runs the query stream in order against an existing experiment; per-query
// transport failures are recorded (status kFailed, nothing charged) and the
// report is always produced. Asserts every ledger is within budget at the
// end of the run.
RunResult run_queries(Experiment& experiment,
                      std::span<const DemoRecord> queries);

RunResult run_experiment(std::span<const DemoRecord> queries,
                         const RunConfig& config, const FlatIndex& index,
                         LlmBackend& backend,
                         std::optional<FilterState> resume_state = std::nullopt);

}  // namespace dpicl

#endif  // DPICL_PIPELINE_HPP_
