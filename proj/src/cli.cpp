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

#include "dpicl/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace dpicl {

namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys = {
    "preset",        "task",        "retrieval_mode", "shards",
    "n_shot",        "sigma",       "epsilon_em",     "delta_i",
    "k_min",         "k_max",       "target_epsilon", "target_delta",
    "uses_per_record", "alpha_star", "gamma",         "classes",
    "temperature",   "max_tokens",  "seed",           "parallelism",
    "audit_responses", "mock",      "mock_text",      "endpoint",
    "corpus",        "queries",     "output"};

const std::set<std::string> kEndpointKeys = {
    "base_url", "model", "timeout_seconds", "max_attempts", "base_delay_ms",
    "trace"};

Task parse_task(const std::string& name) {
  if (name == "classification") return Task::kClassification;
  if (name == "qa") return Task::kQa;
  throw ConfigError("unknown task '" + name + "'");
}

RetrievalMode parse_mode(const std::string& name) {
  if (name == "knn") return RetrievalMode::kKnn;
  if (name == "poisson") return RetrievalMode::kPoisson;
  if (name == "dummy-nn") return RetrievalMode::kDummyNn;
  throw ConfigError("unknown retrieval_mode '" + name + "'");
}

std::string task_name(Task task) {
  return task == Task::kQa ? "qa" : "classification";
}

std::string mode_name(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::kKnn: return "knn";
    case RetrievalMode::kPoisson: return "poisson";
    case RetrievalMode::kDummyNn: return "dummy-nn";
  }
  return "?";
}

void apply_preset(const std::string& name, RunConfig& run) {
  // experiment shapes from the evaluation setup: 10 shards of 4
  // demonstrations at delta 1e-5; qa adds temperature 0.7 and the k window
  if (name == "classification") {
    run.task = Task::kClassification;
    run.num_shards = 10;
    run.n_shot = 4;
    run.target_delta = 1e-5;
    run.temperature = 0.0;
  } else if (name == "qa") {
    run.task = Task::kQa;
    run.num_shards = 10;
    run.n_shot = 4;
    run.target_delta = 1e-5;
    run.temperature = 0.7;
    run.k_min = 15;
    run.k_max = 30;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
}

template <typename T>
void read_into(const json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

ExperimentFile load_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  for (const auto& [key, value] : j.items()) {
    if (kTopLevelKeys.count(key) == 0) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  ExperimentFile file;
  try {
    if (j.contains("preset")) {
      apply_preset(j.at("preset").get<std::string>(), file.run);
    }
    if (j.contains("task")) {
      file.run.task = parse_task(j.at("task").get<std::string>());
    }
    if (j.contains("retrieval_mode")) {
      file.run.retrieval_mode =
          parse_mode(j.at("retrieval_mode").get<std::string>());
    }
    read_into(j, "shards", file.run.num_shards);
    read_into(j, "n_shot", file.run.n_shot);
    read_into(j, "sigma", file.run.sigma);
    read_into(j, "epsilon_em", file.run.epsilon_em);
    read_into(j, "delta_i", file.run.delta_i);
    read_into(j, "k_min", file.run.k_min);
    read_into(j, "k_max", file.run.k_max);
    read_into(j, "target_epsilon", file.run.target_epsilon);
    read_into(j, "target_delta", file.run.target_delta);
    read_into(j, "uses_per_record", file.run.uses_per_record);
    read_into(j, "alpha_star", file.run.alpha_star);
    read_into(j, "gamma", file.run.gamma);
    read_into(j, "classes", file.run.classes);
    read_into(j, "temperature", file.run.temperature);
    read_into(j, "max_tokens", file.run.max_tokens);
    read_into(j, "seed", file.run.seed);
    read_into(j, "parallelism", file.run.parallelism);
    read_into(j, "audit_responses", file.run.audit_responses);
    read_into(j, "mock", file.mock);
    read_into(j, "mock_text", file.mock_text);
    if (j.contains("endpoint")) {
      const json& e = j.at("endpoint");
      if (!e.is_object()) throw ConfigError("endpoint must be an object");
      for (const auto& [key, value] : e.items()) {
        if (kEndpointKeys.count(key) == 0) {
          throw ConfigError("unknown endpoint key '" + key + "'");
        }
      }
      read_into(e, "base_url", file.base_url);
      read_into(e, "model", file.model);
      read_into(e, "timeout_seconds", file.timeout_seconds);
      read_into(e, "max_attempts", file.max_attempts);
      read_into(e, "base_delay_ms", file.base_delay_ms);
      read_into(e, "trace", file.trace_path);
    }
    read_into(j, "corpus", file.corpus_path);
    read_into(j, "queries", file.queries_path);
    read_into(j, "output", file.output_path);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config value: " + std::string(e.what()));
  }
  file.run.model = file.model;
  return file;
}

namespace {

std::unique_ptr<LlmBackend> make_backend(const ExperimentFile& file) {
  if (file.mock == "majority") {
    return std::make_unique<MockBackend>(MockBehavior::kMajorityLabel);
  }
  if (file.mock == "keyword-echo") {
    return std::make_unique<MockBackend>(MockBehavior::kKeywordEcho);
  }
  if (file.mock == "fixed") {
    return std::make_unique<MockBackend>(MockBehavior::kFixedText, file.mock_text);
  }
  if (!file.mock.empty()) {
    throw ConfigError("unknown mock '" + file.mock + "'");
  }
  if (file.base_url.empty()) {
    throw ConfigError("config needs either a mock or an endpoint.base_url");
  }
  ClientConfig client_config;
  client_config.model = file.model;
  client_config.trace_path = file.trace_path;
  client_config.retry.jitter_seed = file.run.seed;
  client_config.retry.max_attempts = file.max_attempts;
  client_config.retry.base_delay = std::chrono::milliseconds(file.base_delay_ms);
  auto transport = make_httplib_transport(
      file.base_url, std::chrono::seconds(file.timeout_seconds));
  return std::make_unique<HttpBackend>(std::make_unique<CompletionClient>(
      std::move(transport), std::move(client_config)));
}

int max_uses_per_record(const ResolvedPrivacy& privacy) {
  if (privacy.cost.epsilon_t == 0.0 && privacy.cost.delta_t == 0.0) return 0;
  double uses = std::numeric_limits<double>::infinity();
  if (privacy.cost.epsilon_t > 0.0) {
    uses = std::floor(privacy.budget.epsilon_max / privacy.cost.epsilon_t);
  }
  if (privacy.cost.delta_t > 0.0) {
    uses = std::min(uses,
                    std::floor(privacy.budget.delta_max / privacy.cost.delta_t));
  }
  return static_cast<int>(uses);
}

void print_accounting(const ExperimentFile& file, const ResolvedPrivacy& privacy,
                      std::ostream& out) {
  const DpGuarantee guarantee = budget_guarantee(privacy.budget);
  out << std::setprecision(10);
  out << "task               " << task_name(file.run.task) << "\n";
  out << "retrieval_mode     " << mode_name(file.run.retrieval_mode) << "\n";
  out << "sigma              " << privacy.sigma << "\n";
  out << "alpha_star         " << privacy.alpha_star.value() << "\n";
  out << "per_query_epsilon  " << privacy.cost.epsilon_t << "\n";
  out << "per_query_delta    " << privacy.cost.delta_t << "\n";
  out << "epsilon_max        " << privacy.budget.epsilon_max << "\n";
  out << "delta_max          " << privacy.budget.delta_max << "\n";
  out << "max_uses           " << max_uses_per_record(privacy) << "\n";
  if (file.run.retrieval_mode == RetrievalMode::kPoisson) {
    out << "gamma              " << privacy.gamma << "\n";
    out << "subsampled_epsilon " << privacy.poisson_cost.epsilon_t << "\n";
    out << "subsampled_delta   " << privacy.poisson_cost.delta_t << "\n";
  }
  out << "epsilon_hat        " << guarantee.epsilon_hat << "\n";
  out << "delta_hat          " << guarantee.delta_hat << "\n";
}

json config_to_json(const RunConfig& run) {
  return json{{"task", task_name(run.task)},
              {"retrieval_mode", mode_name(run.retrieval_mode)},
              {"shards", run.num_shards},
              {"n_shot", run.n_shot},
              {"sigma", run.sigma},
              {"epsilon_em", run.epsilon_em},
              {"delta_i", run.delta_i},
              {"k_min", run.k_min},
              {"k_max", run.k_max},
              {"target_epsilon", run.target_epsilon},
              {"target_delta", run.target_delta},
              {"uses_per_record", run.uses_per_record},
              {"alpha_star", run.alpha_star},
              {"gamma", run.gamma},
              {"classes", run.classes},
              {"temperature", run.temperature},
              {"max_tokens", run.max_tokens},
              {"seed", run.seed},
              {"parallelism", run.parallelism},
              {"audit_responses", run.audit_responses}};
}

json outcome_to_json(const QueryOutcome& outcome) {
  json j{{"query_id", outcome.query_id},
         {"status", outcome.status == QueryStatus::kOk ? "ok" : "failed"},
         {"answer", outcome.answer},
         {"mode", outcome.mode == QueryMode::kFull ? "full" : "fallback-zero-shot"},
         {"retrieved", outcome.retrieved},
         {"charged_epsilon", outcome.charged.epsilon_t},
         {"charged_delta", outcome.charged.delta_t},
         {"dropped_votes", outcome.dropped_votes},
         {"released_keywords", outcome.released_keywords}};
  if (!outcome.error.empty()) j["error"] = outcome.error;
  if (!outcome.shard_responses.empty()) j["shard_responses"] = outcome.shard_responses;
  return j;
}

json metrics_to_json(const MetricReport& metrics) {
  const QueryScores mean = metrics.means();
  json per_query = json::array();
  for (const QueryScores& s : metrics.per_query) {
    per_query.push_back({{"exact_match", s.exact_match},
                         {"rouge1", s.rouge1},
                         {"rouge2", s.rouge2},
                         {"rougeL", s.rouge_l},
                         {"bleu", s.bleu},
                         {"anls", s.anls}});
  }
  return json{{"mean",
               {{"exact_match", mean.exact_match},
                {"rouge1", mean.rouge1},
                {"rouge2", mean.rouge2},
                {"rougeL", mean.rouge_l},
                {"bleu", mean.bleu},
                {"anls", mean.anls}}},
              {"per_query", per_query}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::ostringstream out;
  out << std::put_time(&tm_utc, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

int cmd_index_build(const std::string& corpus_path, std::ostream& out) {
  const Corpus corpus = load_corpus_jsonl(corpus_path);
  FlatIndex::build(corpus.records);  // validates duplicate ids etc.
  out << "records    " << corpus.records.size() << "\n";
  out << "dimension  " << corpus.dimension << "\n";
  out << std::setprecision(6) << "raw_norm   min " << corpus.min_raw_norm
      << " mean " << corpus.mean_raw_norm << " max " << corpus.max_raw_norm
      << "\n";
  return kExitOk;
}

int cmd_account(const std::string& config_path, std::ostream& out) {
  const ExperimentFile file = load_experiment_file(config_path);
  std::size_t corpus_size = 0;
  if (!file.corpus_path.empty() &&
      file.run.retrieval_mode == RetrievalMode::kPoisson) {
    corpus_size = load_corpus_jsonl(file.corpus_path).records.size();
  }
  try {
    print_accounting(file, resolve_privacy(file.run, corpus_size), out);
  } catch (const InvalidParameterError& e) {
    throw ConfigError(e.what());
  }
  return kExitOk;
}

int cmd_run(const std::string& config_path, std::uint64_t seed_override,
            bool has_seed_override, const std::string& mock_override,
            bool dry_run, const std::string& resume_path, std::ostream& out) {
  ExperimentFile file = load_experiment_file(config_path);
  if (has_seed_override) file.run.seed = seed_override;
  if (!mock_override.empty()) file.mock = mock_override;
  if (file.corpus_path.empty()) throw ConfigError("config needs a corpus path");

  const Corpus corpus = load_corpus_jsonl(file.corpus_path);
  const FlatIndex index = FlatIndex::build(corpus.records);

  std::optional<ResolvedPrivacy> resolved;
  try {
    resolved = resolve_privacy(file.run, index.size());
  } catch (const InvalidParameterError& e) {
    throw ConfigError(e.what());
  }
  const ResolvedPrivacy& privacy = *resolved;
  if (dry_run) {
    print_accounting(file, privacy, out);
    return kExitOk;
  }

  if (file.queries_path.empty()) throw ConfigError("config needs a queries path");
  if (file.output_path.empty()) throw ConfigError("config needs an output path");
  const Corpus query_set = load_corpus_jsonl(file.queries_path);

  std::optional<FilterState> resume;
  if (!resume_path.empty()) {
    std::ifstream in(resume_path);
    if (!in) throw ConfigError("cannot open checkpoint " + resume_path);
    json checkpoint;
    try {
      in >> checkpoint;
    } catch (const json::exception& e) {
      throw ConfigError("invalid checkpoint JSON: " + std::string(e.what()));
    }
    resume = FilterState::from_checkpoint(checkpoint);
  }

  const std::unique_ptr<LlmBackend> backend = make_backend(file);
  Experiment experiment =
      resume.has_value() ? Experiment(file.run, index, *backend, std::move(*resume))
                         : Experiment(file.run, index, *backend);

  const RunResult result = run_queries(experiment, query_set.records);

  json report{{"config", config_to_json(experiment.config())},
              {"guarantee",
               {{"epsilon_hat", result.guarantee.epsilon_hat},
                {"delta_hat", result.guarantee.delta_hat}}},
              {"privacy",
               {{"sigma", privacy.sigma},
                {"alpha_star", privacy.alpha_star.value()},
                {"per_query_epsilon", privacy.cost.epsilon_t},
                {"per_query_delta", privacy.cost.delta_t},
                {"epsilon_max", privacy.budget.epsilon_max},
                {"delta_max", privacy.budget.delta_max},
                {"records_exhausted", result.records_exhausted}}},
              {"failures", result.failures},
              {"timestamp", utc_timestamp()}};
  json outcomes = json::array();
  for (const QueryOutcome& outcome : result.outcomes) {
    outcomes.push_back(outcome_to_json(outcome));
  }
  report["outcomes"] = std::move(outcomes);
  if (result.has_metrics) report["metrics"] = metrics_to_json(result.metrics);

  {
    std::ofstream report_out(file.output_path);
    if (!report_out) throw ConfigError("cannot write report " + file.output_path);
    report_out << report.dump(2) << "\n";
  }
  if (file.run.retrieval_mode != RetrievalMode::kPoisson) {
    std::ofstream ledger_out(file.output_path + ".ledger.json");
    if (!ledger_out) {
      throw ConfigError("cannot write ledger checkpoint next to report");
    }
    ledger_out << experiment.filter().to_checkpoint().dump(2) << "\n";
  }

  out << "queries    " << result.outcomes.size() << "\n";
  out << "failures   " << result.failures << "\n";
  out << "exhausted  " << result.records_exhausted << "\n";
  out << std::setprecision(10) << "epsilon    " << result.guarantee.epsilon_hat
      << "\n";
  out << "report     " << file.output_path << "\n";
  return result.failures == 0 ? kExitOk : kExitTransport;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"differentially private in-context learning toolkit"};
  app.require_subcommand(1);

  std::string corpus_path;
  CLI::App* index_build =
      app.add_subcommand("index-build", "validate a corpus file");
  index_build->add_option("corpus", corpus_path, "JSONL corpus path")->required();

  std::string account_config;
  CLI::App* account =
      app.add_subcommand("account", "print the privacy accounting table");
  account->add_option("--config", account_config, "experiment JSON")->required();

  std::string run_config;
  std::uint64_t seed_override = 0;
  std::string mock_override;
  bool dry_run = false;
  std::string resume_path;
  CLI::App* run = app.add_subcommand("run", "run an experiment");
  run->add_option("--config", run_config, "experiment JSON")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed_override, "seed override");
  run->add_option("--mock", mock_override,
                  "mock backend: majority | keyword-echo | fixed");
  run->add_flag("--dry-run", dry_run, "print accounting and exit");
  run->add_option("--resume", resume_path, "ledger checkpoint to resume from");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return kExitOk;
    }
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (index_build->parsed()) return cmd_index_build(corpus_path, out);
    if (account->parsed()) return cmd_account(account_config, out);
    return cmd_run(run_config, seed_override, seed_opt->count() > 0,
                   mock_override, dry_run, resume_path, out);
  } catch (const InvariantViolationError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const TransportError& e) {
    std::cerr << "transport failure: " << e.what() << "\n";
    return kExitTransport;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IngestError& e) {
    std::cerr << "corpus error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
}

}  // namespace dpicl
