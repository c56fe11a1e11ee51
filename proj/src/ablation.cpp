#include "mcal/ablation.hpp"

#include <algorithm>
#include <numeric>

#include "mcal/models.hpp"

namespace mcal {

const char* to_string(ImputeKind k) {
  switch (k) {
    case ImputeKind::Zero:
      return "zero";
    case ImputeKind::Mean:
      return "mean";
    case ImputeKind::CustomBaseline:
      return "custom";
  }
  throw ContractError("unknown impute kind");
}

ImputeKind impute_kind_from_string(const std::string& name) {
  if (name == "zero") return ImputeKind::Zero;
  if (name == "mean") return ImputeKind::Mean;
  if (name == "custom") return ImputeKind::CustomBaseline;
  throw ContractError("unknown impute kind '" + name + "'");
}

void AblationPolicy::validate(Eigen::Index n) const {
  switch (kind) {
    case ImputeKind::Zero:
      break;
    case ImputeKind::Mean:
      if (feature_means.size() != n) {
        throw ContractError("mean imputation needs feature means of length " +
                            std::to_string(n));
      }
      if (!feature_means.allFinite()) {
        throw ContractError("feature means must be finite");
      }
      break;
    case ImputeKind::CustomBaseline:
      if (baseline.size() != n) {
        throw ContractError("custom baseline must have length " +
                            std::to_string(n));
      }
      if (!baseline.allFinite()) {
        throw ContractError("baseline must be finite");
      }
      break;
  }
}

AblationRateGrid AblationRateGrid::fractions(int denominator) {
  if (denominator < 1) {
    throw ContractError("rate grid denominator must be positive");
  }
  AblationRateGrid grid;
  grid.rates.reserve(static_cast<std::size_t>(denominator));
  for (int k = 0; k < denominator; ++k) {
    grid.rates.push_back(static_cast<double>(k) /
                         static_cast<double>(denominator));
  }
  return grid;
}

void AblationRateGrid::validate() const {
  if (rates.empty()) throw ContractError("rate grid is empty");
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] >= 0.0 && rates[i] <= 1.0)) {
      throw ContractError("rate grid entries must lie in [0, 1]");
    }
    if (i > 0 && !(rates[i] > rates[i - 1])) {
      throw ContractError("rate grid must be sorted and distinct");
    }
  }
}

FeatureMask sample_mask_fixed(int n, int k, Rng& rng) {
  if (n < 0 || k < 0 || k > n) {
    throw ContractError("fixed mask needs 0 <= k <= n");
  }
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  FeatureMask mask(static_cast<std::size_t>(n), false);
  for (int i = 0; i < k; ++i) {
    const int j =
        i + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    mask[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = true;
  }
  return mask;
}

FeatureMask sample_mask_bernoulli(int n, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ContractError("bernoulli mask probability must lie in [0, 1]");
  }
  if (n < 0) throw ContractError("mask length must be non-negative");
  FeatureMask mask(static_cast<std::size_t>(n), false);
  for (auto&& bit : mask) bit = bernoulli_draw(rng, p);
  return mask;
}

FeatureMask expand_group_mask(const FeatureMask& group_mask, int group_size,
                              int n) {
  if (group_size < 1) throw ContractError("group size must be positive");
  const int groups = group_count(n, group_size);
  if (static_cast<int>(group_mask.size()) != groups) {
    throw ContractError("group mask length must equal the group count");
  }
  FeatureMask mask(static_cast<std::size_t>(n), false);
  for (int g = 0; g < groups; ++g) {
    if (!group_mask[static_cast<std::size_t>(g)]) continue;
    const int lo = g * group_size;
    const int hi = std::min((g + 1) * group_size, n);
    for (int i = lo; i < hi; ++i) mask[static_cast<std::size_t>(i)] = true;
  }
  return mask;
}

Eigen::VectorXd apply_ablation(const Eigen::VectorXd& x,
                               const FeatureMask& mask,
                               const AblationPolicy& policy) {
  if (static_cast<Eigen::Index>(mask.size()) != x.size()) {
    throw ContractError("mask length must equal the feature count");
  }
  policy.validate(x.size());
  Eigen::VectorXd out = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    switch (policy.kind) {
      case ImputeKind::Zero:
        out[i] = 0.0;
        break;
      case ImputeKind::Mean:
        out[i] = policy.feature_means[i];
        break;
      case ImputeKind::CustomBaseline:
        out[i] = policy.baseline[i];
        break;
    }
  }
  return out;
}

namespace {

std::vector<PairedLogitSample> build_pairs_impl(
    const DeskModel& model, const LabeledDataset& data,
    const std::vector<int>& rows, const AblationPolicy& policy,
    int ablations_per_input, Rng& rng, int group_size, bool bernoulli,
    double rate_or_p) {
  data.validate();
  model.validate();
  if (rows.empty()) throw ContractError("pair dataset needs at least one row");
  if (ablations_per_input < 1) {
    throw ContractError("ablations per input must be positive");
  }
  if (group_size < 1) throw ContractError("group size must be positive");
  const int n = static_cast<int>(data.n());
  policy.validate(n);
  if (!(rate_or_p >= 0.0 && rate_or_p <= 1.0)) {
    throw ContractError("ablation rate must lie in [0, 1]");
  }
  const int groups = group_count(n, group_size);
  const int k = static_cast<int>(std::lround(rate_or_p * groups));

  std::vector<PairedLogitSample> pairs;
  pairs.reserve(rows.size() * static_cast<std::size_t>(ablations_per_input));
  for (const int row : rows) {
    if (row < 0 || row >= data.rows()) {
      throw ContractError("row index " + std::to_string(row) +
                          " out of range");
    }
    const Eigen::VectorXd x = data.features.row(row);
    const LogitVector clean = model_logits(model, x);
    for (int a = 0; a < ablations_per_input; ++a) {
      FeatureMask group_mask =
          bernoulli ? sample_mask_bernoulli(groups, rate_or_p, rng)
                    : sample_mask_fixed(groups, k, rng);
      const int ablated_groups = static_cast<int>(
          std::count(group_mask.begin(), group_mask.end(), true));
      const FeatureMask mask =
          group_size == 1 ? std::move(group_mask)
                          : expand_group_mask(group_mask, group_size, n);
      PairedLogitSample s;
      s.clean_logits = clean;
      s.ablated_logits = model_logits(model, apply_ablation(x, mask, policy));
      s.ablation_rate =
          static_cast<double>(ablated_groups) / static_cast<double>(groups);
      s.clean_label = data.labels[static_cast<std::size_t>(row)];
      pairs.push_back(std::move(s));
    }
  }
  return pairs;
}

}  // namespace

std::vector<PairedLogitSample> build_pair_dataset(
    const DeskModel& model, const LabeledDataset& data,
    const std::vector<int>& rows, double rate, const AblationPolicy& policy,
    int ablations_per_input, Rng& rng, int group_size) {
  return build_pairs_impl(model, data, rows, policy, ablations_per_input, rng,
                          group_size, /*bernoulli=*/false, rate);
}

std::vector<PairedLogitSample> build_pair_dataset_bernoulli(
    const DeskModel& model, const LabeledDataset& data,
    const std::vector<int>& rows, double p, const AblationPolicy& policy,
    int ablations_per_input, Rng& rng, int group_size) {
  return build_pairs_impl(model, data, rows, policy, ablations_per_input, rng,
                          group_size, /*bernoulli=*/true, p);
}

}  // namespace mcal
