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

#ifndef DPICL_PRIVACY_FILTER_HPP_
#define DPICL_PRIVACY_FILTER_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dpicl/privacy_core.hpp"
#include "dpicl/retrieval.hpp"

namespace dpicl {

// Per-record budgets at a committed order, plus the delta at which the final
// (epsilon, delta)-DP guarantee is reported.
struct BudgetConfig {
  RenyiOrder alpha_star;
  double epsilon_max = 0.0;      // per-record RDP budget at alpha_star
  double delta_max = 0.0;        // per-record approximation budget
  double target_delta_hat = 0.0; // delta of the reported DP guarantee
};

// Cumulative spend of one record.
struct ElementLedger {
  double spent_epsilon = 0.0;
  double spent_delta = 0.0;
};

// Cost charged to each retrieved record for one query.
struct QueryCost {
  double epsilon_t = 0.0;
  double delta_t = 0.0;

  friend bool operator==(const QueryCost&, const QueryCost&) = default;
};

struct ChargeLogEntry {
  std::size_t ordinal = 0;
  std::vector<std::int64_t> charged_ids;  // sorted
  QueryCost cost;
};

// Mechanism descriptors for per-query cost computation.
struct RnmGaussianMechanism {
  double sigma = 0.0;  // vote histogram noise; l2 sensitivity sqrt(2)
};
struct KsaPtrMechanism {
  double sigma = 0.0;       // PTR test noise parameter
  double delta_i = 0.0;     // per-query PTR failure probability
  double epsilon_em = 0.0;  // FindBestK budget; 0 disables the selection step
};
struct NearestNeighborVoteMechanism {
  double sigma = 0.0;  // label-vote histogram noise, same shape as RNM
};
using MechanismDescriptor = std::variant<RnmGaussianMechanism, KsaPtrMechanism,
                                         NearestNeighborVoteMechanism>;

// RDP + approximation charge of one query at the committed order.
QueryCost per_query_cost(const MechanismDescriptor& mechanism,
                         RenyiOrder alpha_star);

// Individual privacy filter: per-record ledgers with prospective gating. A
// record is eligible for a query only if charging it would keep both sums
// within budget, so no ledger can ever end a query over budget.
class FilterState {
 public:
  FilterState(std::span<const std::int64_t> ids, BudgetConfig budget);

  const BudgetConfig& budget() const { return budget_; }
  std::size_t num_records() const { return ledgers_.size(); }

  // Exactly the records that can afford `upcoming` on top of their spend.
  IdSet eligible_set(const QueryCost& upcoming) const;

  // Charges every retrieved record; the caller must have retrieved from
  // eligible_set(cost). Charging an ineligible record throws
  // InvariantViolationError before any state changes.
  void charge(std::span<const std::int64_t> retrieved, const QueryCost& cost);

  const ElementLedger& ledger(std::int64_t id) const;
  const std::vector<ChargeLogEntry>& query_log() const { return log_; }
  std::vector<std::int64_t> ids() const;

  // The (epsilon_hat, target_delta_hat)-DP guarantee implied by the budget.
  // Depends only on the budget, never on the spend.
  DpGuarantee report_guarantee() const;

  nlohmann::json to_checkpoint() const;
  static FilterState from_checkpoint(const nlohmann::json& checkpoint);

 private:
  BudgetConfig budget_;
  std::map<std::int64_t, ElementLedger> ledgers_;  // ordered for determinism
  std::vector<ChargeLogEntry> log_;
};

// Guarantee implied by a budget alone (what FilterState::report_guarantee
// returns); usable before any state exists.
DpGuarantee budget_guarantee(const BudgetConfig& budget);

}  // namespace dpicl

#endif  // DPICL_PRIVACY_FILTER_HPP_
