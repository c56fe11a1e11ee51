#pragma once

#include <vector>

#include "mcal/fit.hpp"

namespace mcal {

struct DeskModel;
struct LabeledDataset;

// true = feature removed.
using FeatureMask = std::vector<bool>;

enum class ImputeKind { Zero, Mean, CustomBaseline };

const char* to_string(ImputeKind k);
ImputeKind impute_kind_from_string(const std::string& name);

struct AblationPolicy {
  ImputeKind kind = ImputeKind::Zero;
  Eigen::VectorXd feature_means;  // required for Mean, length n
  Eigen::VectorXd baseline;       // required for CustomBaseline, length n

  void validate(Eigen::Index n) const;
};

struct AblationRateGrid {
  std::vector<double> rates;  // sorted, distinct, within [0, 1]

  // {0/d, 1/d, ..., (d-1)/d}.
  static AblationRateGrid fractions(int denominator);
  void validate() const;
};

// Exactly k ablated features, uniform over k-subsets.
FeatureMask sample_mask_fixed(int n, int k, Rng& rng);

// Each feature ablated independently with probability p.
FeatureMask sample_mask_bernoulli(int n, double p, Rng& rng);

// Expands a per-group mask to feature granularity; group g covers the
// contiguous feature block [g*group_size, min((g+1)*group_size, n)).
FeatureMask expand_group_mask(const FeatureMask& group_mask, int group_size,
                              int n);

inline int group_count(int n, int group_size) {
  return (n + group_size - 1) / group_size;
}

Eigen::VectorXd apply_ablation(const Eigen::VectorXd& x,
                               const FeatureMask& mask,
                               const AblationPolicy& policy);

// For each selected row, pairs the model's clean logits with logits on
// ablations_per_input ablated copies. The requested rate quantizes to
// k = round(rate * groups); the realized k/groups is what gets recorded.
std::vector<PairedLogitSample> build_pair_dataset(
    const DeskModel& model, const LabeledDataset& data,
    const std::vector<int>& rows, double rate, const AblationPolicy& policy,
    int ablations_per_input, Rng& rng, int group_size = 1);

// Bernoulli(p) masks instead of a fixed rate; feeds the rate-agnostic
// calibrators. The realized per-sample rate is the drawn mask's group rate.
std::vector<PairedLogitSample> build_pair_dataset_bernoulli(
    const DeskModel& model, const LabeledDataset& data,
    const std::vector<int>& rows, double p, const AblationPolicy& policy,
    int ablations_per_input, Rng& rng, int group_size = 1);

}  // namespace mcal
