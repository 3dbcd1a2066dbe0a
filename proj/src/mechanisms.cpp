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

#include "dpicl/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace dpicl {

VoteBuildResult build_vote_histogram(std::span<const std::string> labels,
                                     std::span<const std::string> classes,
                                     InvalidVotePolicy policy) {
  (void)policy;  // kDrop is the only policy
  if (classes.empty()) throw InvalidParameterError("class set must be non-empty");
  std::unordered_map<std::string, std::size_t> class_index;
  for (std::size_t i = 0; i < classes.size(); ++i) class_index.emplace(classes[i], i);

  VoteBuildResult result;
  result.histogram.counts.assign(classes.size(), 0);
  for (const std::string& label : labels) {
    const auto it = class_index.find(label);
    if (it == class_index.end()) {
      ++result.dropped;
    } else {
      ++result.histogram.counts[it->second];
    }
  }
  return result;
}

std::size_t rnm_gaussian(const VoteHistogram& histogram, double sigma,
                         std::uint64_t seed) {
  if (histogram.counts.empty()) {
    throw InvalidParameterError("vote histogram must have at least one class");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidParameterError("sigma must be finite and >= 0");
  }
  Rng rng(seed);
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
    double value = static_cast<double>(histogram.counts[i]);
    if (sigma > 0.0) value += sample_gaussian(rng, 0.0, sigma);
    if (value > best_value) {
      best_value = value;
      best = i;
    }
  }
  return best;
}

TokenHistogram build_token_histogram(std::span<const std::string> responses,
                                     const TokenizerConfig& config) {
  TokenHistogram hist;
  for (const std::string& response : responses) {
    const std::vector<std::string> tokens = tokenize(response, config);
    const std::set<std::string> unique(tokens.begin(), tokens.end());
    for (const std::string& t : unique) ++hist.counts[t];
    ++hist.num_responses;
  }
  return hist;
}

namespace {

std::vector<std::int64_t> sorted_counts_desc(const TokenHistogram& histogram) {
  std::vector<std::int64_t> counts;
  counts.reserve(histogram.counts.size());
  for (const auto& [token, count] : histogram.counts) counts.push_back(count);
  std::sort(counts.begin(), counts.end(), std::greater<>());
  return counts;
}

std::int64_t nth_largest(const std::vector<std::int64_t>& sorted, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > sorted.size()) return 0;
  return sorted[static_cast<std::size_t>(k) - 1];
}

}  // namespace

std::int64_t gap_statistic(const TokenHistogram& histogram, int k) {
  if (k < 1) throw InvalidParameterError("k must be >= 1");
  const auto sorted = sorted_counts_desc(histogram);
  return nth_largest(sorted, k) - nth_largest(sorted, k + 1);
}

int find_best_k(const TokenHistogram& histogram, double epsilon_em, int k_min,
                int k_max, std::uint64_t seed) {
  if (!(epsilon_em > 0.0)) {
    throw InvalidParameterError("epsilon_em must be > 0");
  }
  if (k_min < 1 || k_min > k_max) {
    throw InvalidParameterError("need 1 <= k_min <= k_max");
  }
  const double scale = std::isinf(epsilon_em) ? 0.0 : 4.0 / epsilon_em;
  const auto sorted = sorted_counts_desc(histogram);
  Rng rng(seed);
  int best_k = k_min;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    double score =
        static_cast<double>(nth_largest(sorted, k) - nth_largest(sorted, k + 1));
    if (scale > 0.0) score += sample_gumbel(rng, scale);
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }
  return best_k;
}

std::vector<std::string> exact_top_k_tokens(const TokenHistogram& histogram,
                                            int k) {
  if (k < 0) throw InvalidParameterError("k must be >= 0");
  std::vector<std::pair<std::string, std::int64_t>> entries(
      histogram.counts.begin(), histogram.counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(k), entries.size());
  std::vector<std::string> tokens;
  tokens.reserve(take);
  for (std::size_t i = 0; i < take; ++i) tokens.push_back(entries[i].first);
  return tokens;
}

KeywordRelease top_k_with_ptr(const TokenHistogram& histogram, int k,
                              double sigma, double delta_i, std::uint64_t seed) {
  if (k < 1) throw InvalidParameterError("k must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidParameterError("sigma must be finite and > 0");
  }
  if (!(delta_i > 0.0 && delta_i < 1.0)) {
    throw InvalidParameterError("delta_i must lie in (0, 1)");
  }
  const double d_k = static_cast<double>(gap_statistic(histogram, k));
  Rng rng(seed);
  const double noisy = std::max(2.0, d_k) + sample_gaussian(rng, 0.0, 2.0 * sigma) -
                       gaussian_quantile(1.0 - delta_i, 0.0, 2.0 * sigma);
  if (noisy > 2.0) {
    return KeywordRelease{true, exact_top_k_tokens(histogram, k)};
  }
  return KeywordRelease{false, {}};
}

// Wichura's PPND16 rational approximations (Applied Statistics 37, 1988);
// absolute error around 1e-15 in standardized units.
double gaussian_quantile(double p, double mean, double stddev) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidParameterError("quantile requires p in (0, 1)");
  }
  if (!(stddev > 0.0)) {
    throw InvalidParameterError("quantile requires stddev > 0");
  }

  static constexpr double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e+2,
      1.9715909503065514427e+3, 1.3731693765509461125e+4,
      4.5921953931549871457e+4, 6.7265770927008700853e+4,
      3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr double b[8] = {
      1.0,                      4.2313330701600911252e+1,
      6.8718700749205790830e+2, 5.3941960214247511077e+3,
      2.1213794301586595867e+4, 3.9307895800092710610e+4,
      2.8729085735721942674e+4, 5.2264952788528545610e+3};
  static constexpr double c[8] = {
      1.42343711074968357734e0,  4.63033784615654529590e0,
      5.76949722146069140550e0,  3.64784832476320460504e0,
      1.27045825245236838258e0,  2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[8] = {
      1.0,                       2.05319162663775882187e0,
      1.67638483018380384940e0,  6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static constexpr double e[8] = {
      6.65790464350110377720e0,  5.46378491116411436990e0,
      1.78482653991729133580e0,  2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[8] = {
      1.0,                       5.99832206555887937690e-1,
      1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};

  const auto ratio = [](const double (&num)[8], const double (&den)[8], double r) {
    double n = num[7];
    double m = den[7];
    for (int i = 6; i >= 0; --i) {
      n = n * r + num[i];
      m = m * r + den[i];
    }
    return n / m;
  };

  const double q = p - 0.5;
  double z;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    z = q * ratio(a, b, r);
  } else {
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      z = ratio(c, d, r - 1.6);
    } else {
      z = ratio(e, f, r - 5.0);
    }
    if (q < 0.0) z = -z;
  }
  return mean + stddev * z;
}

double sample_gaussian(Rng& rng, double mean, double stddev) {
  return gaussian_quantile(rng.uniform_open01(), mean, stddev);
}

double sample_gumbel(Rng& rng, double scale) {
  return scale * -std::log(-std::log(rng.uniform_open01()));
}

}  // namespace dpicl
