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

#ifndef DPICL_PRIVACY_CORE_HPP_
#define DPICL_PRIVACY_CORE_HPP_

#include <functional>
#include <span>
#include <vector>

#include "dpicl/error.hpp"

namespace dpicl {

// Renyi divergence order; always finite and > 1.
class RenyiOrder {
 public:
  explicit RenyiOrder(double alpha);
  double value() const { return alpha_; }

  friend bool operator==(const RenyiOrder& a, const RenyiOrder& b) {
    return a.alpha_ == b.alpha_;
  }
  friend bool operator!=(const RenyiOrder& a, const RenyiOrder& b) {
    return !(a == b);
  }

 private:
  double alpha_;
};

// A delta-approximate (alpha, epsilon)-RDP privacy cost. This triple is the
// currency of all accounting in this library.
class ApproxRdp {
 public:
  ApproxRdp(RenyiOrder alpha, double epsilon, double delta);

  RenyiOrder alpha() const { return alpha_; }
  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }

 private:
  RenyiOrder alpha_;
  double epsilon_;
  double delta_;
};

// An (epsilon_hat, delta_hat)-DP statement.
struct DpGuarantee {
  double epsilon_hat = 0.0;
  double delta_hat = 0.0;
};

// Gaussian mechanism with noise std sigma on a statistic of l2-sensitivity
// `sensitivity`.
struct GaussianMechanismSpec {
  double sigma = 0.0;
  double sensitivity = 1.0;
};

// Poisson inclusion probability for the subsampled baseline.
struct SamplingConfig {
  double gamma = 0.0;
};

// RDP of the Gaussian mechanism at a fixed order:
// epsilon(alpha) = alpha * sensitivity^2 / (2 sigma^2), delta = 0.
ApproxRdp gaussian_rdp(const GaussianMechanismSpec& spec, RenyiOrder alpha);

// RDP implied by pure epsilon-DP: min(epsilon, alpha * epsilon^2 / 2).
ApproxRdp pure_dp_to_rdp(double epsilon, RenyiOrder alpha);

// Additive composition at a common order; deltas sum and clip at 1.
ApproxRdp compose(std::span<const ApproxRdp> costs);
ApproxRdp compose(const ApproxRdp& a, const ApproxRdp& b);

// Converts delta-approximate (alpha, epsilon)-RDP to (epsilon_hat,
// delta_hat)-DP:
//   delta_hat = delta + exp(-(alpha-1)(epsilon_hat-epsilon))
//               * (1 - 1/alpha)^(alpha-1) / alpha,
// clipped at 1.
DpGuarantee approx_rdp_to_dp(const ApproxRdp& cost, double epsilon_hat);

// Smallest epsilon_hat >= 0 whose conversion meets delta_hat. Requires
// delta_hat > cost.delta.
DpGuarantee invert_conversion(const ApproxRdp& cost, double delta_hat);

// RDP curve of a base mechanism evaluated at integer orders.
using RdpCurve = std::function<double(int)>;

// Poisson amplification at integer order alpha >= 2, with the amplification
// rate adjusted to gamma(1-delta)/(1-gamma*delta) and delta' = gamma*delta.
// Result is capped at the unamplified base cost.
ApproxRdp subsampled_rdp(const RdpCurve& base_epsilon, SamplingConfig sampling,
                         double base_delta, RenyiOrder alpha);

struct CalibrationResult {
  double sigma = 0.0;
  RenyiOrder alpha_star;
};

// Smallest sigma (relative tolerance 1e-6) such that `uses` compositions of
// the Gaussian mechanism meet `target` under the best order in the grid.
// Never exceeds the classical closed form
// sigma = sensitivity * sqrt(2 * uses * ln(1.25/delta)) / epsilon.
CalibrationResult calibrate_sigma(const DpGuarantee& target, double sensitivity,
                                  int uses,
                                  std::span<const RenyiOrder> alpha_grid);

double classical_gaussian_sigma(const DpGuarantee& target, double sensitivity,
                                int uses);

// Orders used by calibration and the filters.
const std::vector<RenyiOrder>& default_alpha_grid();

// Numerically stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> log_terms);

}  // namespace dpicl

#endif  // DPICL_PRIVACY_CORE_HPP_
