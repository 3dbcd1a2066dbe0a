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

#include "dpicl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpicl/rng.hpp"

namespace dpicl {

namespace {

// seed stream tags, one per randomized mechanism
constexpr std::uint64_t kSeedRnm = 1;
constexpr std::uint64_t kSeedFindBestK = 2;
constexpr std::uint64_t kSeedPtr = 3;
constexpr std::uint64_t kSeedPoisson = 4;

MechanismDescriptor make_descriptor(const RunConfig& config, double sigma,
                                    double delta_i) {
  switch (config.task) {
    case Task::kClassification:
      if (config.retrieval_mode == RetrievalMode::kDummyNn) {
        return NearestNeighborVoteMechanism{sigma};
      }
      return RnmGaussianMechanism{sigma};
    case Task::kQa:
      return KsaPtrMechanism{sigma, delta_i, config.epsilon_em};
  }
  throw InvalidParameterError("unknown task");
}

void validate_config(const RunConfig& config) {
  if (config.num_shards < 1) throw InvalidParameterError("num_shards must be >= 1");
  if (config.n_shot < 0) throw InvalidParameterError("n_shot must be >= 0");
  if (config.uses_per_record < 1) {
    throw InvalidParameterError("uses_per_record must be >= 1");
  }
  if (!(config.target_delta > 0.0 && config.target_delta < 1.0)) {
    throw InvalidParameterError("target_delta must lie in (0, 1)");
  }
  if (config.sigma == 0.0 && !(config.target_epsilon > 0.0)) {
    throw InvalidParameterError(
        "calibration needs target_epsilon > 0 when sigma is not given");
  }
  if (config.task == Task::kClassification && config.classes.empty() &&
      config.retrieval_mode != RetrievalMode::kDummyNn) {
    throw InvalidParameterError("classification needs a class list");
  }
  if (config.task == Task::kQa &&
      config.retrieval_mode == RetrievalMode::kDummyNn) {
    throw InvalidParameterError("dummy-nn retrieval is classification-only");
  }
  if (config.task == Task::kQa && config.k_min > config.k_max) {
    throw InvalidParameterError("need k_min <= k_max");
  }
}

std::vector<RenyiOrder> candidate_orders(const RunConfig& config) {
  if (config.alpha_star > 0.0) {
    return {RenyiOrder(config.alpha_star)};
  }
  std::vector<RenyiOrder> grid = default_alpha_grid();
  if (config.retrieval_mode == RetrievalMode::kPoisson) {
    // the subsampling bound is evaluated at integer orders only
    std::erase_if(grid, [](RenyiOrder a) {
      return std::abs(a.value() - std::round(a.value())) > 1e-9 || a.value() < 2.0;
    });
  }
  return grid;
}

// epsilon_hat achieved at delta target by `uses` compositions at this order
double achieved_epsilon_hat(const RunConfig& config, double sigma,
                            double delta_i, double delta_max, RenyiOrder alpha) {
  const QueryCost cost =
      per_query_cost(make_descriptor(config, sigma, delta_i), alpha);
  const ApproxRdp total(alpha, config.uses_per_record * cost.epsilon_t,
                        delta_max);
  return invert_conversion(total, config.target_delta).epsilon_hat;
}

RenyiOrder pick_alpha(const RunConfig& config, double sigma, double delta_i,
                      double delta_max, std::span<const RenyiOrder> grid) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double eh =
        achieved_epsilon_hat(config, sigma, delta_i, delta_max, grid[i]);
    if (eh < best) {
      best = eh;
      best_idx = i;
    }
  }
  return grid[best_idx];
}

double resolve_sigma(const RunConfig& config, double delta_i, double delta_max,
                     std::span<const RenyiOrder> grid) {
  const auto feasible = [&](double sigma) {
    for (const RenyiOrder alpha : grid) {
      if (achieved_epsilon_hat(config, sigma, delta_i, delta_max, alpha) <=
          config.target_epsilon) {
        return true;
      }
    }
    return false;
  };
  const double sensitivity =
      config.task == Task::kClassification ? std::sqrt(2.0) : 1.0;
  double hi = classical_gaussian_sigma(
      {config.target_epsilon, config.target_delta}, sensitivity,
      config.uses_per_record);
  int expansions = 0;
  while (!feasible(hi)) {
    hi *= 2.0;
    if (++expansions > 64) {
      throw InfeasibleError(
          "target guarantee unreachable at any noise scale; lower epsilon_em "
          "or delta_i, or raise the target");
    }
  }
  double lo = hi * 1e-12;
  while ((hi - lo) / hi > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace

ResolvedPrivacy resolve_privacy(const RunConfig& config, std::size_t corpus_size) {
  validate_config(config);
  const bool qa = config.task == Task::kQa;
  const int uses = config.uses_per_record;

  double delta_i = 0.0;
  double delta_max = 0.0;
  if (qa) {
    // half the reported delta_hat absorbs PTR failures, half the conversion
    delta_i = config.delta_i > 0.0 ? config.delta_i
                                   : config.target_delta / (2.0 * uses);
    delta_max = uses * delta_i;
    if (!(delta_max < config.target_delta)) {
      throw InvalidParameterError(
          "uses_per_record * delta_i must stay below target_delta");
    }
  }

  const std::vector<RenyiOrder> grid = candidate_orders(config);
  const double sigma = config.sigma > 0.0
                           ? config.sigma
                           : resolve_sigma(config, delta_i, delta_max, grid);
  const RenyiOrder alpha = pick_alpha(config, sigma, delta_i, delta_max, grid);
  const QueryCost cost =
      per_query_cost(make_descriptor(config, sigma, delta_i), alpha);

  ResolvedPrivacy resolved{
      sigma,
      alpha,
      cost,
      BudgetConfig{alpha, uses * cost.epsilon_t, delta_max, config.target_delta},
      delta_i,
      0.0,
      QueryCost{},
      uses};

  if (config.retrieval_mode == RetrievalMode::kPoisson) {
    if (corpus_size == 0 && config.gamma <= 0.0) {
      throw InvalidParameterError(
          "poisson mode needs a corpus size or explicit gamma");
    }
    resolved.gamma =
        config.gamma > 0.0
            ? config.gamma
            : std::min(1.0, static_cast<double>(config.num_shards) *
                                config.n_shot /
                                static_cast<double>(corpus_size));
    const RunConfig& cfg = config;
    const RdpCurve base = [cfg, sigma, delta_i](int order) {
      return per_query_cost(make_descriptor(cfg, sigma, delta_i),
                            RenyiOrder(static_cast<double>(order)))
          .epsilon_t;
    };
    const ApproxRdp sub = subsampled_rdp(base, {resolved.gamma}, delta_i, alpha);
    resolved.poisson_cost = QueryCost{sub.epsilon(), sub.delta()};
  }
  return resolved;
}

Experiment::Experiment(const RunConfig& config, const FlatIndex& index,
                       LlmBackend& backend)
    : config_(config),
      privacy_(resolve_privacy(config, index.size())),
      index_(index),
      backend_(backend),
      state_(index.all_ids(), privacy_.budget),
      poisson_total_(privacy_.alpha_star, 0.0, 0.0) {
  config_.sigma = privacy_.sigma;
  config_.alpha_star = privacy_.alpha_star.value();
  config_.delta_i = privacy_.delta_i;
  config_.gamma = privacy_.gamma;
  if (config_.temperature < 0.0) {
    config_.temperature = config_.task == Task::kQa ? 0.7 : 0.0;
  }
}

Experiment::Experiment(const RunConfig& config, const FlatIndex& index,
                       LlmBackend& backend, FilterState state)
    : Experiment(config, index, backend) {
  // resume: the checkpointed budget must match the configured run
  const BudgetConfig& restored = state.budget();
  if (restored.alpha_star != privacy_.budget.alpha_star ||
      restored.epsilon_max != privacy_.budget.epsilon_max ||
      restored.delta_max != privacy_.budget.delta_max) {
    throw ConfigError("checkpoint budget does not match this configuration");
  }
  state_ = std::move(state);
  ordinal_ = state_.query_log().size();
}

int Experiment::effective_parallelism() const {
  if (config_.parallelism > 0) return config_.parallelism;
  return backend_.prefers_parallel() ? config_.num_shards : 1;
}

ChatRequest Experiment::make_request(std::string prompt, std::int64_t query_id,
                                     int shard_index) const {
  ChatRequest request;
  request.model = config_.model;
  request.prompt = std::move(prompt);
  request.temperature = config_.temperature;
  request.max_tokens = config_.max_tokens;
  request.query_id = query_id;
  request.shard_index = shard_index;
  return request;
}

Experiment::Retrieval Experiment::retrieve(const DemoRecord& query,
                                           std::size_t ordinal) {
  Retrieval out;
  const int k = config_.num_shards * config_.n_shot;
  if (config_.retrieval_mode == RetrievalMode::kPoisson) {
    out.plan = poisson_sample(index_, {privacy_.gamma}, config_.num_shards,
                              config_.n_shot,
                              derive_seed(config_.seed, ordinal, kSeedPoisson));
    out.retrieved = out.plan.all_ids();
    return out;
  }
  const IdSet eligible = state_.eligible_set(privacy_.cost);
  if (eligible.empty() || k == 0) {
    out.fallback = eligible.empty();
    return out;
  }
  const RetrievalResult result = top_k(index_, query.embedding, k, eligible);
  out.retrieved = result.ids();
  // fewer than k eligible records: deal what we have, short shards degrade
  // toward zero-shot
  out.plan = result.ranked.size() == static_cast<std::size_t>(k)
                 ? partition_shards(result, config_.num_shards, config_.n_shot)
                 : round_robin_shards(out.retrieved, config_.num_shards);
  return out;
}

void Experiment::charge_retrieved(const std::vector<std::int64_t>& retrieved) {
  if (config_.retrieval_mode == RetrievalMode::kPoisson) {
    poisson_total_ = compose(
        poisson_total_, ApproxRdp(privacy_.alpha_star,
                                  privacy_.poisson_cost.epsilon_t,
                                  privacy_.poisson_cost.delta_t));
    return;
  }
  state_.charge(retrieved, privacy_.cost);
}

QueryOutcome Experiment::run_query(const DemoRecord& query) {
  const std::size_t ordinal = ordinal_++;
  switch (config_.task) {
    case Task::kClassification:
      return config_.retrieval_mode == RetrievalMode::kDummyNn
                 ? dummy_nn_query(query, ordinal)
                 : classify_query(query, ordinal);
    case Task::kQa:
      return answer_query(query, ordinal);
  }
  throw InvalidParameterError("unknown task");
}

QueryOutcome Experiment::classify_query(const DemoRecord& query,
                                        std::size_t ordinal) {
  QueryOutcome outcome;
  outcome.query_id = query.id;

  const Retrieval retrieval = retrieve(query, ordinal);
  if (retrieval.fallback) {
    const std::string response = backend_.complete(
        make_request(render_classification_prompt(config_.classes, {},
                                                  query.content),
                     query.id, -1));
    outcome.mode = QueryMode::kFallbackZeroShot;
    outcome.answer = extract_class_label(response, config_.classes).value_or("");
    if (config_.audit_responses) outcome.shard_responses.push_back(response);
    return outcome;
  }

  std::vector<ChatRequest> requests;
  requests.reserve(retrieval.plan.batches.size());
  for (std::size_t shard = 0; shard < retrieval.plan.batches.size(); ++shard) {
    std::vector<ClassificationDemo> demos;
    for (std::int64_t id : retrieval.plan.batches[shard]) {
      const DemoRecord& r = index_.record(id);
      demos.push_back({r.content, r.answer});
    }
    requests.push_back(make_request(
        render_classification_prompt(config_.classes, demos, query.content),
        query.id, static_cast<int>(shard)));
  }
  const std::vector<std::string> responses =
      complete_shards(backend_, requests, effective_parallelism());

  std::vector<std::string> labels;
  labels.reserve(responses.size());
  for (const std::string& response : responses) {
    labels.push_back(
        extract_class_label(response, config_.classes).value_or("(invalid)"));
  }
  const VoteBuildResult votes = build_vote_histogram(labels, config_.classes);
  const std::size_t winner =
      rnm_gaussian(votes.histogram, privacy_.sigma,
                   derive_seed(config_.seed, ordinal, kSeedRnm));

  charge_retrieved(retrieval.retrieved);
  outcome.answer = config_.classes[winner];
  outcome.retrieved = retrieval.retrieved;
  outcome.charged = config_.retrieval_mode == RetrievalMode::kPoisson
                        ? privacy_.poisson_cost
                        : privacy_.cost;
  outcome.dropped_votes = votes.dropped;
  if (config_.audit_responses) outcome.shard_responses = responses;
  return outcome;
}

QueryOutcome Experiment::dummy_nn_query(const DemoRecord& query,
                                        std::size_t ordinal) {
  QueryOutcome outcome;
  outcome.query_id = query.id;

  const std::vector<std::string>& classes = config_.classes;
  const Retrieval retrieval = retrieve(query, ordinal);
  if (retrieval.fallback || retrieval.retrieved.empty()) {
    outcome.mode = QueryMode::kFallbackZeroShot;  // abstains, no LLM involved
    return outcome;
  }
  std::vector<std::string> labels;
  for (std::int64_t id : retrieval.retrieved) {
    labels.push_back(index_.record(id).answer);
  }
  const VoteBuildResult votes = build_vote_histogram(labels, classes);
  const std::size_t winner =
      rnm_gaussian(votes.histogram, privacy_.sigma,
                   derive_seed(config_.seed, ordinal, kSeedRnm));
  charge_retrieved(retrieval.retrieved);
  outcome.answer = classes[winner];
  outcome.retrieved = retrieval.retrieved;
  outcome.charged = privacy_.cost;
  outcome.dropped_votes = votes.dropped;
  return outcome;
}

QueryOutcome Experiment::answer_query(const DemoRecord& query,
                                      std::size_t ordinal) {
  if (!query.question.has_value()) {
    throw InvalidParameterError("qa query " + std::to_string(query.id) +
                                " has no question");
  }
  QueryOutcome outcome;
  outcome.query_id = query.id;
  const std::string& question = *query.question;

  const auto zero_shot = [&] {
    return make_request(render_qa_prompt({}, query.content, question), query.id,
                        -1);
  };

  const Retrieval retrieval = retrieve(query, ordinal);
  if (retrieval.fallback) {
    const std::string response = backend_.complete(zero_shot());
    outcome.mode = QueryMode::kFallbackZeroShot;
    outcome.answer = extract_answer_line(response);
    if (config_.audit_responses) outcome.shard_responses.push_back(response);
    return outcome;
  }

  std::vector<ChatRequest> requests;
  requests.reserve(retrieval.plan.batches.size());
  for (std::size_t shard = 0; shard < retrieval.plan.batches.size(); ++shard) {
    std::vector<QaDemo> demos;
    for (std::int64_t id : retrieval.plan.batches[shard]) {
      const DemoRecord& r = index_.record(id);
      demos.push_back({r.content, r.question.value_or(""), r.answer});
    }
    requests.push_back(make_request(
        render_qa_prompt(demos, query.content, question), query.id,
        static_cast<int>(shard)));
  }
  const std::vector<std::string> responses =
      complete_shards(backend_, requests, effective_parallelism());

  const TokenHistogram histogram =
      build_token_histogram(responses, {.remove_stopwords = true});
  const int k = config_.epsilon_em > 0.0
                    ? find_best_k(histogram, config_.epsilon_em, config_.k_min,
                                  config_.k_max,
                                  derive_seed(config_.seed, ordinal, kSeedFindBestK))
                    : config_.k_min;
  const KeywordRelease release =
      top_k_with_ptr(histogram, k, privacy_.sigma, privacy_.delta_i,
                     derive_seed(config_.seed, ordinal, kSeedPtr));

  std::string final_response;
  if (release.released) {
    final_response = backend_.complete(make_request(
        render_keyword_followup_prompt(release.tokens, query.content, question),
        query.id, -1));
    outcome.mode = QueryMode::kFull;
    outcome.released_keywords = release.tokens;
  } else {
    final_response = backend_.complete(zero_shot());
    outcome.mode = QueryMode::kFallbackZeroShot;
  }
  // PTR consumed the shard outputs on both branches, so both charge
  charge_retrieved(retrieval.retrieved);
  outcome.answer = extract_answer_line(final_response);
  outcome.retrieved = retrieval.retrieved;
  outcome.charged = config_.retrieval_mode == RetrievalMode::kPoisson
                        ? privacy_.poisson_cost
                        : privacy_.cost;
  if (config_.audit_responses) outcome.shard_responses = responses;
  return outcome;
}

DpGuarantee Experiment::report_guarantee() const {
  if (config_.retrieval_mode == RetrievalMode::kPoisson) {
    if (poisson_total_.epsilon() == 0.0 && poisson_total_.delta() == 0.0) {
      return DpGuarantee{0.0, config_.target_delta};
    }
    if (poisson_total_.delta() >= config_.target_delta) {
      return DpGuarantee{std::numeric_limits<double>::infinity(),
                         config_.target_delta};
    }
    return invert_conversion(poisson_total_, config_.target_delta);
  }
  return state_.report_guarantee();
}

std::size_t Experiment::records_exhausted() const {
  if (config_.retrieval_mode == RetrievalMode::kPoisson) return 0;
  return index_.size() - state_.eligible_set(privacy_.cost).size();
}

RunResult run_queries(Experiment& experiment,
                      std::span<const DemoRecord> queries) {
  RunResult result;
  for (const DemoRecord& query : queries) {
    try {
      result.outcomes.push_back(experiment.run_query(query));
    } catch (const TransportError& e) {
      QueryOutcome failed;
      failed.query_id = query.id;
      failed.status = QueryStatus::kFailed;
      failed.error = e.what();
      result.outcomes.push_back(std::move(failed));
      ++result.failures;
      continue;
    }
    if (!query.answer.empty()) {
      result.metrics.per_query.push_back(
          score_pair(result.outcomes.back().answer, query.answer));
      result.has_metrics = true;
    }
  }
  result.guarantee = experiment.report_guarantee();
  result.records_exhausted = experiment.records_exhausted();

  // end-of-run conservation check: no ledger may ever exceed its budget
  const BudgetConfig& budget = experiment.filter().budget();
  for (std::int64_t id : experiment.filter().ids()) {
    const ElementLedger& ledger = experiment.filter().ledger(id);
    if (ledger.spent_epsilon > budget.epsilon_max ||
        ledger.spent_delta > budget.delta_max) {
      throw InvariantViolationError("record " + std::to_string(id) +
                                    " ended the run over budget");
    }
  }
  return result;
}

RunResult run_experiment(std::span<const DemoRecord> queries,
                         const RunConfig& config, const FlatIndex& index,
                         LlmBackend& backend,
                         std::optional<FilterState> resume_state) {
  Experiment experiment =
      resume_state.has_value()
          ? Experiment(config, index, backend, std::move(*resume_state))
          : Experiment(config, index, backend);
  return run_queries(experiment, queries);
}

}  // namespace dpicl
