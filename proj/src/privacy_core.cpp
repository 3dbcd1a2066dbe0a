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

#include "dpicl/privacy_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dpicl {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidParameterError(message);
}

double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

RenyiOrder::RenyiOrder(double alpha) : alpha_(alpha) {
  require(std::isfinite(alpha) && alpha > 1.0,
          "Renyi order must be finite and > 1, got " + std::to_string(alpha));
}

ApproxRdp::ApproxRdp(RenyiOrder alpha, double epsilon, double delta)
    : alpha_(alpha), epsilon_(epsilon), delta_(delta) {
  require(std::isfinite(epsilon) && epsilon >= 0.0,
          "RDP epsilon must be finite and >= 0");
  require(std::isfinite(delta) && delta >= 0.0 && delta <= 1.0,
          "RDP delta must lie in [0, 1]");
}

ApproxRdp gaussian_rdp(const GaussianMechanismSpec& spec, RenyiOrder alpha) {
  require(std::isfinite(spec.sigma) && spec.sigma > 0.0, "sigma must be > 0");
  require(std::isfinite(spec.sensitivity) && spec.sensitivity > 0.0,
          "sensitivity must be > 0");
  const double eps = alpha.value() * spec.sensitivity * spec.sensitivity /
                     (2.0 * spec.sigma * spec.sigma);
  return ApproxRdp(alpha, eps, 0.0);
}

ApproxRdp pure_dp_to_rdp(double epsilon, RenyiOrder alpha) {
  require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be >= 0");
  const double quadratic = alpha.value() * epsilon * epsilon / 2.0;
  return ApproxRdp(alpha, std::min(epsilon, quadratic), 0.0);
}

ApproxRdp compose(std::span<const ApproxRdp> costs) {
  require(!costs.empty(), "compose requires at least one cost");
  const RenyiOrder alpha = costs.front().alpha();
  double epsilon = 0.0;
  double delta = 0.0;
  for (const ApproxRdp& cost : costs) {
    require(cost.alpha() == alpha, "compose requires a common Renyi order");
    epsilon += cost.epsilon();
    delta += cost.delta();
  }
  return ApproxRdp(alpha, epsilon, std::min(delta, 1.0));
}

ApproxRdp compose(const ApproxRdp& a, const ApproxRdp& b) {
  const ApproxRdp costs[] = {a, b};
  return compose(costs);
}

DpGuarantee approx_rdp_to_dp(const ApproxRdp& cost, double epsilon_hat) {
  require(!std::isnan(epsilon_hat), "epsilon_hat must not be NaN");
  const double a = cost.alpha().value();
  const double log_term = -(a - 1.0) * (epsilon_hat - cost.epsilon()) -
                          std::log(a) + (a - 1.0) * std::log1p(-1.0 / a);
  const double delta_hat = cost.delta() + std::exp(log_term);
  return DpGuarantee{epsilon_hat, std::min(delta_hat, 1.0)};
}

DpGuarantee invert_conversion(const ApproxRdp& cost, double delta_hat) {
  require(std::isfinite(delta_hat) && delta_hat <= 1.0,
          "delta_hat must be finite and <= 1");
  const double available = delta_hat - cost.delta();
  if (!(available > 0.0)) {
    throw InfeasibleError("delta_hat must exceed the approximation delta " +
                          std::to_string(cost.delta()));
  }
  const double a = cost.alpha().value();
  const double epsilon_hat = cost.epsilon() +
                             (-std::log(available) - std::log(a)) / (a - 1.0) +
                             std::log1p(-1.0 / a);
  return DpGuarantee{std::max(0.0, epsilon_hat), delta_hat};
}

ApproxRdp subsampled_rdp(const RdpCurve& base_epsilon, SamplingConfig sampling,
                         double base_delta, RenyiOrder alpha) {
  require(std::isfinite(sampling.gamma) && sampling.gamma >= 0.0 &&
              sampling.gamma <= 1.0,
          "gamma must lie in [0, 1]");
  require(std::isfinite(base_delta) && base_delta >= 0.0 && base_delta <= 1.0,
          "base delta must lie in [0, 1]");
  const double rounded = std::round(alpha.value());
  if (std::abs(alpha.value() - rounded) > 1e-9 || rounded < 2.0) {
    throw UnsupportedOrderError(
        "subsampled_rdp supports integer orders >= 2, got " +
        std::to_string(alpha.value()));
  }
  const int order = static_cast<int>(rounded);
  const double gamma = sampling.gamma;
  const double delta_out = gamma * base_delta;
  if (gamma == 0.0) return ApproxRdp(alpha, 0.0, delta_out);

  const double adjusted =
      gamma * (1.0 - base_delta) / (1.0 - gamma * base_delta);
  const double log_rate = std::log(adjusted);

  std::vector<double> log_terms;
  log_terms.reserve(order);
  log_terms.push_back(0.0);  // the j = 0,1 part of the binomial expansion

  // j = 2 term uses min(4(e^eps2 - 1), 2 e^eps2); the min switches at ln 2.
  const double eps2 = base_epsilon(2);
  const double log_j2_factor = eps2 < std::log(2.0)
                                   ? std::log(4.0 * std::expm1(eps2))
                                   : std::log(2.0) + eps2;
  log_terms.push_back(2.0 * log_rate + log_binom(order, 2) + log_j2_factor);

  for (int j = 3; j <= order; ++j) {
    log_terms.push_back(j * log_rate + log_binom(order, j) + std::log(2.0) +
                        (j - 1.0) * base_epsilon(j));
  }

  // log(1 + sum of positive terms) via log-sum-exp over [0, terms...].
  const double log_total = log_sum_exp(log_terms);
  double eps_sub = log_total / (order - 1.0);
  eps_sub = std::min(eps_sub, base_epsilon(order));
  return ApproxRdp(alpha, eps_sub, delta_out);
}

double classical_gaussian_sigma(const DpGuarantee& target, double sensitivity,
                                int uses) {
  return sensitivity * std::sqrt(2.0 * uses * std::log(1.25 / target.delta_hat)) /
         target.epsilon_hat;
}

CalibrationResult calibrate_sigma(const DpGuarantee& target, double sensitivity,
                                  int uses,
                                  std::span<const RenyiOrder> alpha_grid) {
  require(std::isfinite(target.epsilon_hat) && target.epsilon_hat > 0.0,
          "target epsilon must be > 0");
  require(target.delta_hat > 0.0 && target.delta_hat < 1.0,
          "target delta must lie in (0, 1)");
  require(std::isfinite(sensitivity) && sensitivity > 0.0,
          "sensitivity must be > 0");
  require(uses >= 1, "uses must be >= 1");
  require(!alpha_grid.empty(), "alpha grid must be non-empty");

  // Best achievable epsilon_hat at delta_hat for a given sigma.
  const auto best_epsilon_hat = [&](double sigma) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
      const ApproxRdp per_use =
          gaussian_rdp({sigma, sensitivity}, alpha_grid[i]);
      const ApproxRdp total(alpha_grid[i], uses * per_use.epsilon(), 0.0);
      const double eh = invert_conversion(total, target.delta_hat).epsilon_hat;
      if (eh < best) {
        best = eh;
        best_idx = i;
      }
    }
    return std::pair<double, std::size_t>(best, best_idx);
  };

  double hi = classical_gaussian_sigma(target, sensitivity, uses);
  int expansions = 0;
  while (best_epsilon_hat(hi).first > target.epsilon_hat) {
    hi *= 2.0;
    if (++expansions > 64) {
      throw InfeasibleError("calibration target unreachable");
    }
  }
  double lo = hi * 1e-12;
  while ((hi - lo) / hi > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (best_epsilon_hat(mid).first <= target.epsilon_hat) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return CalibrationResult{hi, alpha_grid[best_epsilon_hat(hi).second]};
}

const std::vector<RenyiOrder>& default_alpha_grid() {
  static const std::vector<RenyiOrder> kGrid = [] {
    std::vector<RenyiOrder> grid;
    for (double a : {1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0}) {
      grid.emplace_back(a);
    }
    return grid;
  }();
  return kGrid;
}

double log_sum_exp(std::span<const double> log_terms) {
  const double max_term = *std::max_element(log_terms.begin(), log_terms.end());
  if (!std::isfinite(max_term)) return max_term;
  double sum = 0.0;
  for (double t : log_terms) sum += std::exp(t - max_term);
  return max_term + std::log(sum);
}

}  // namespace dpicl
