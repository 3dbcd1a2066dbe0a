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

#include "dpicl/privacy_filter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dpicl {

namespace {

void validate_cost(const QueryCost& cost) {
  if (!std::isfinite(cost.epsilon_t) || cost.epsilon_t < 0.0 ||
      !std::isfinite(cost.delta_t) || cost.delta_t < 0.0) {
    throw InvalidParameterError("query cost must be finite and non-negative");
  }
}

bool affordable(const ElementLedger& ledger, const QueryCost& cost,
                const BudgetConfig& budget) {
  return ledger.spent_epsilon + cost.epsilon_t <= budget.epsilon_max &&
         ledger.spent_delta + cost.delta_t <= budget.delta_max;
}

}  // namespace

QueryCost per_query_cost(const MechanismDescriptor& mechanism,
                         RenyiOrder alpha_star) {
  // One substituted example moves at most one vote between two histogram
  // bins, hence l2 sensitivity sqrt(2) for the vote histograms; the PTR gap
  // test has unit sensitivity and composes with FindBestK's pure DP.
  return std::visit(
      [&](const auto& m) -> QueryCost {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RnmGaussianMechanism> ||
                      std::is_same_v<T, NearestNeighborVoteMechanism>) {
          const ApproxRdp rdp =
              gaussian_rdp({m.sigma, std::sqrt(2.0)}, alpha_star);
          return QueryCost{rdp.epsilon(), 0.0};
        } else {
          static_assert(std::is_same_v<T, KsaPtrMechanism>);
          if (!(m.delta_i > 0.0 && m.delta_i < 1.0)) {
            throw InvalidParameterError("KSA-PTR needs delta_i in (0, 1)");
          }
          const ApproxRdp ptr = gaussian_rdp({m.sigma, 1.0}, alpha_star);
          const ApproxRdp em = pure_dp_to_rdp(m.epsilon_em, alpha_star);
          const ApproxRdp total = compose(ptr, em);
          return QueryCost{total.epsilon(), m.delta_i};
        }
      },
      mechanism);
}

FilterState::FilterState(std::span<const std::int64_t> ids, BudgetConfig budget)
    : budget_(budget) {
  if (!(budget.epsilon_max >= 0.0) || !std::isfinite(budget.epsilon_max)) {
    throw InvalidParameterError("epsilon_max must be finite and >= 0");
  }
  if (!(budget.delta_max >= 0.0 && budget.delta_max <= 1.0)) {
    throw InvalidParameterError("delta_max must lie in [0, 1]");
  }
  for (std::int64_t id : ids) {
    if (!ledgers_.emplace(id, ElementLedger{}).second) {
      throw InvalidParameterError("duplicate id " + std::to_string(id) +
                                  " in filter universe");
    }
  }
}

IdSet FilterState::eligible_set(const QueryCost& upcoming) const {
  validate_cost(upcoming);
  IdSet eligible;
  eligible.reserve(ledgers_.size());
  for (const auto& [id, ledger] : ledgers_) {
    if (affordable(ledger, upcoming, budget_)) eligible.insert(id);
  }
  return eligible;
}

void FilterState::charge(std::span<const std::int64_t> retrieved,
                         const QueryCost& cost) {
  validate_cost(cost);
  // validate the full set before mutating anything
  for (std::int64_t id : retrieved) {
    const auto it = ledgers_.find(id);
    if (it == ledgers_.end()) {
      throw InvariantViolationError("charge of unknown record " +
                                    std::to_string(id));
    }
    if (!affordable(it->second, cost, budget_)) {
      throw InvariantViolationError(
          "record " + std::to_string(id) +
          " cannot afford this query; retrieval must be gated by eligible_set");
    }
  }
  for (std::int64_t id : retrieved) {
    ElementLedger& ledger = ledgers_.find(id)->second;
    ledger.spent_epsilon += cost.epsilon_t;
    ledger.spent_delta += cost.delta_t;
  }
  ChargeLogEntry entry;
  entry.ordinal = log_.size();
  entry.charged_ids.assign(retrieved.begin(), retrieved.end());
  std::sort(entry.charged_ids.begin(), entry.charged_ids.end());
  entry.cost = cost;
  log_.push_back(std::move(entry));
}

const ElementLedger& FilterState::ledger(std::int64_t id) const {
  const auto it = ledgers_.find(id);
  if (it == ledgers_.end()) {
    throw InvalidParameterError("unknown record id " + std::to_string(id));
  }
  return it->second;
}

std::vector<std::int64_t> FilterState::ids() const {
  std::vector<std::int64_t> out;
  out.reserve(ledgers_.size());
  for (const auto& [id, ledger] : ledgers_) out.push_back(id);
  return out;
}

DpGuarantee budget_guarantee(const BudgetConfig& budget) {
  if (!(budget.target_delta_hat > 0.0 && budget.target_delta_hat < 1.0)) {
    throw InvalidParameterError("target_delta_hat must lie in (0, 1)");
  }
  // A zero budget admits no spend at all: the composed mechanism never
  // touches the data, so its output distributions coincide exactly.
  if (budget.epsilon_max == 0.0 && budget.delta_max == 0.0) {
    return DpGuarantee{0.0, budget.target_delta_hat};
  }
  const ApproxRdp total(budget.alpha_star, budget.epsilon_max, budget.delta_max);
  return invert_conversion(total, budget.target_delta_hat);
}

DpGuarantee FilterState::report_guarantee() const {
  return budget_guarantee(budget_);
}

nlohmann::json FilterState::to_checkpoint() const {
  nlohmann::json ledgers = nlohmann::json::array();
  for (const auto& [id, ledger] : ledgers_) {
    ledgers.push_back({{"id", id},
                       {"spent_epsilon", ledger.spent_epsilon},
                       {"spent_delta", ledger.spent_delta}});
  }
  nlohmann::json log = nlohmann::json::array();
  for (const ChargeLogEntry& entry : log_) {
    log.push_back({{"ordinal", entry.ordinal},
                   {"charged_ids", entry.charged_ids},
                   {"epsilon_t", entry.cost.epsilon_t},
                   {"delta_t", entry.cost.delta_t}});
  }
  return {{"budget",
           {{"alpha_star", budget_.alpha_star.value()},
            {"epsilon_max", budget_.epsilon_max},
            {"delta_max", budget_.delta_max},
            {"target_delta_hat", budget_.target_delta_hat}}},
          {"ledgers", ledgers},
          {"query_log", log}};
}

FilterState FilterState::from_checkpoint(const nlohmann::json& checkpoint) {
  try {
    const auto& jb = checkpoint.at("budget");
    const BudgetConfig budget{RenyiOrder(jb.at("alpha_star").get<double>()),
                              jb.at("epsilon_max").get<double>(),
                              jb.at("delta_max").get<double>(),
                              jb.at("target_delta_hat").get<double>()};
    std::vector<std::int64_t> ids;
    for (const auto& jl : checkpoint.at("ledgers")) {
      ids.push_back(jl.at("id").get<std::int64_t>());
    }
    FilterState state(ids, budget);
    for (const auto& jl : checkpoint.at("ledgers")) {
      ElementLedger& ledger = state.ledgers_.at(jl.at("id").get<std::int64_t>());
      ledger.spent_epsilon = jl.at("spent_epsilon").get<double>();
      ledger.spent_delta = jl.at("spent_delta").get<double>();
    }
    for (const auto& je : checkpoint.at("query_log")) {
      ChargeLogEntry entry;
      entry.ordinal = je.at("ordinal").get<std::size_t>();
      entry.charged_ids = je.at("charged_ids").get<std::vector<std::int64_t>>();
      entry.cost.epsilon_t = je.at("epsilon_t").get<double>();
      entry.cost.delta_t = je.at("delta_t").get<double>();
      state.log_.push_back(std::move(entry));
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed ledger checkpoint: " + std::string(e.what()));
  }
}

}  // namespace dpicl
