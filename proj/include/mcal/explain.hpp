#pragma once

#include <functional>

#include "mcal/metrics.hpp"

namespace mcal {

struct ExplainerConfig {
  int num_samples = 1000;
  double mask_prob = 0.5;
  // LIME kernel width; values <= 0 select the 0.75 * sqrt(n) default.
  double kernel_width = 0.0;
  double ridge_lambda = 1e-3;
  std::uint64_t seed = 0;

  void validate(int n) const;  // num_samples >= n + 2 etc.
};

// Coalition game over keep-vectors (true = feature kept). Mock games plug in
// directly; pipeline explanations wrap the pipeline into one of these.
using CoalitionValueFn = std::function<double(const std::vector<bool>&)>;

// LIME: Bernoulli keep-vectors, exponential kernel on normalized Hamming
// distance from the all-keep vector, weighted ridge with an unpenalized
// intercept; returns the keep-bit coefficients.
AttributionVector lime_attribute(const CoalitionValueFn& value, int n,
                                 const ExplainerConfig& cfg);
AttributionVector lime_attribute(const PredictablePipeline& pipe,
                                 const Eigen::VectorXd& x,
                                 const ExplainerConfig& cfg);

// KernelSHAP: coalition sizes stratified by total Shapley-kernel weight,
// strata small enough to enumerate are enumerated, and the efficiency
// constraint sum(alpha) = v(full) - v(empty) is enforced exactly.
AttributionVector kernelshap_attribute(const CoalitionValueFn& value, int n,
                                       const ExplainerConfig& cfg);
AttributionVector kernelshap_attribute(const PredictablePipeline& pipe,
                                       const Eigen::VectorXd& x,
                                       const ExplainerConfig& cfg);

// Exact Shapley values by full 2^n enumeration (n <= 12).
AttributionVector exact_shapley(const CoalitionValueFn& value, int n);
AttributionVector exact_shapley(const PredictablePipeline& pipe,
                                const Eigen::VectorXd& x);

// Indices of the k largest scores, descending, ties to the lower index.
std::vector<int> top_k_rank(const AttributionVector& alpha, int k);

// The game the pipeline explainers play: the probability of the clean
// predicted class (fixed up front) after ablating the non-kept features, with
// the ensemble member selected by the realized mask rate.
CoalitionValueFn pipeline_value_fn(const PredictablePipeline& pipe,
                                   const Eigen::VectorXd& x);

}  // namespace mcal
