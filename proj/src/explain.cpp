#include "mcal/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>

#include "mcal/ablation.hpp"
#include "mcal/rng.hpp"

namespace mcal {

namespace {

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) {
    c *= static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return c;
}

std::vector<bool> keep_from_bitmask(std::uint64_t bits, int n) {
  std::vector<bool> keep(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    if (bits & (1ULL << i)) keep[static_cast<std::size_t>(i)] = true;
  }
  return keep;
}

double checked_value(const CoalitionValueFn& value,
                     const std::vector<bool>& keep) {
  const double v = value(keep);
  if (!std::isfinite(v)) {
    throw ExplainerError("coalition value function returned a non-finite value");
  }
  return v;
}

}  // namespace

void ExplainerConfig::validate(int n) const {
  if (n < 1) throw ContractError("explainer needs at least one feature");
  if (num_samples < n + 2) {
    throw ContractError("num_samples must be at least n + 2");
  }
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) {
    throw ContractError("mask probability must lie in [0, 1]");
  }
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
    throw ContractError("ridge lambda must be finite and non-negative");
  }
  if (!std::isfinite(kernel_width)) {
    throw ContractError("kernel width must be finite");
  }
}

std::vector<int> top_k_rank(const AttributionVector& alpha, int k) {
  const int n = static_cast<int>(alpha.size());
  if (k < 0 || k > n) throw ContractError("need 0 <= k <= n");
  if (!alpha.allFinite()) {
    throw ContractError("attribution scores must be finite");
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return alpha[a] > alpha[b];  // stable: ties keep the lower index first
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

CoalitionValueFn pipeline_value_fn(const PredictablePipeline& pipe,
                                   const Eigen::VectorXd& x) {
  pipe.validate();
  pipe.policy.validate(x.size());
  const int yhat = pipe.predict(x, 0.0);  // class fixed before perturbing
  return [pipe, x, yhat](const std::vector<bool>& keep) {
    const int n = static_cast<int>(x.size());
    if (static_cast<int>(keep.size()) != n) {
      throw ContractError("keep vector length must equal the feature count");
    }
    FeatureMask mask(keep.size());
    int ablated = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      mask[i] = !keep[i];
      ablated += mask[i];
    }
    const double realized =
        static_cast<double>(ablated) / static_cast<double>(n);
    return pipe.probs(apply_ablation(x, mask, pipe.policy), realized)[yhat];
  };
}

AttributionVector lime_attribute(const CoalitionValueFn& value, int n,
                                 const ExplainerConfig& cfg) {
  cfg.validate(n);
  const double width =
      cfg.kernel_width > 0.0 ? cfg.kernel_width : 0.75 * std::sqrt(n);
  Rng rng(cfg.seed);

  const int s = cfg.num_samples;
  Eigen::MatrixXd design(s, n + 1);  // keep bits plus intercept
  Eigen::VectorXd targets(s);
  Eigen::VectorXd weights(s);
  std::vector<bool> keep(static_cast<std::size_t>(n));
  for (int r = 0; r < s; ++r) {
    int dropped = 0;
    for (int i = 0; i < n; ++i) {
      keep[static_cast<std::size_t>(i)] = !bernoulli_draw(rng, cfg.mask_prob);
      dropped += !keep[static_cast<std::size_t>(i)];
      design(r, i) = keep[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    }
    design(r, n) = 1.0;
    const double dist = static_cast<double>(dropped) / static_cast<double>(n);
    weights[r] = std::exp(-(dist * dist) / (width * width));
    targets[r] = checked_value(value, keep);
  }

  const Eigen::MatrixXd wx = weights.asDiagonal() * design;
  Eigen::MatrixXd gram = design.transpose() * wx;
  for (int i = 0; i < n; ++i) gram(i, i) += cfg.ridge_lambda;
  const Eigen::VectorXd rhs = wx.transpose() * targets;

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  if (!lu.isInvertible()) {
    throw ExplainerError(
        "singular LIME regression; increase num_samples or ridge_lambda");
  }
  const Eigen::VectorXd sol = lu.solve(rhs);
  return sol.head(n);
}

AttributionVector lime_attribute(const PredictablePipeline& pipe,
                                 const Eigen::VectorXd& x,
                                 const ExplainerConfig& cfg) {
  return lime_attribute(pipeline_value_fn(pipe, x),
                        static_cast<int>(x.size()), cfg);
}

AttributionVector kernelshap_attribute(const CoalitionValueFn& value, int n,
                                       const ExplainerConfig& cfg) {
  if (n < 2) throw ContractError("kernel shap needs at least two features");
  cfg.validate(n);
  Rng rng(cfg.seed);

  const double v_full =
      checked_value(value, std::vector<bool>(static_cast<std::size_t>(n), true));
  const double v_empty = checked_value(
      value, std::vector<bool>(static_cast<std::size_t>(n), false));

  // Shapley-kernel weight of the whole size-s stratum:
  // C(n,s) * pi(s) = (n-1) / (s * (n-s)).
  std::vector<double> stratum_weight(static_cast<std::size_t>(n), 0.0);
  double total_weight = 0.0;
  for (int s = 1; s < n; ++s) {
    stratum_weight[static_cast<std::size_t>(s)] =
        static_cast<double>(n - 1) / (static_cast<double>(s) * (n - s));
    total_weight += stratum_weight[static_cast<std::size_t>(s)];
  }

  // Largest-remainder apportionment of the sample budget, at least one row
  // per stratum so the regression sees every coalition size.
  std::vector<int> alloc(static_cast<std::size_t>(n), 0);
  std::vector<std::pair<double, int>> remainders;
  int used = 0;
  for (int s = 1; s < n; ++s) {
    const double ideal = cfg.num_samples *
                         stratum_weight[static_cast<std::size_t>(s)] /
                         total_weight;
    alloc[static_cast<std::size_t>(s)] = static_cast<int>(std::floor(ideal));
    used += alloc[static_cast<std::size_t>(s)];
    remainders.emplace_back(ideal - std::floor(ideal), s);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int t = 0; t < cfg.num_samples - used; ++t) {
    alloc[static_cast<std::size_t>(
        remainders[static_cast<std::size_t>(t) % remainders.size()].second)]++;
  }
  for (int s = 1; s < n; ++s) {
    alloc[static_cast<std::size_t>(s)] =
        std::max(1, alloc[static_cast<std::size_t>(s)]);
  }

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> values;
  std::vector<double> row_weights;
  const auto add_row = [&](const std::vector<bool>& keep, double weight) {
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r[i] = keep[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    rows.push_back(std::move(r));
    values.push_back(checked_value(value, keep) - v_empty);
    row_weights.push_back(weight);
  };

  for (int s = 1; s < n; ++s) {
    const int budget = alloc[static_cast<std::size_t>(s)];
    const double count = binomial(n, s);
    const double w_total = stratum_weight[static_cast<std::size_t>(s)];
    if (count <= 1e6 && static_cast<double>(budget) >= count) {
      // Enumerate the stratum with true per-coalition kernel weight so a
      // fully enumerated problem reproduces exact Shapley values.
      std::uint64_t bits = (1ULL << s) - 1ULL;
      const std::uint64_t limit = 1ULL << n;
      while (bits < limit) {
        add_row(keep_from_bitmask(bits, n), w_total / count);
        const std::uint64_t c = bits & (~bits + 1ULL);
        const std::uint64_t r = bits + c;
        bits = (((r ^ bits) >> 2) / c) | r;  // Gosper: next same-popcount set
      }
    } else {
      for (int t = 0; t < budget; ++t) {
        add_row(sample_mask_fixed(n, s, rng),
                w_total / static_cast<double>(budget));
      }
    }
  }

  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd design(m, n);
  Eigen::VectorXd targets(m), weights(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    design.row(r) = rows[static_cast<std::size_t>(r)];
    targets[r] = values[static_cast<std::size_t>(r)];
    weights[r] = row_weights[static_cast<std::size_t>(r)];
  }

  // Equality-constrained weighted ridge via the KKT system:
  // minimize sum w (y - X a)^2 + lambda |a|^2  s.t.  1' a = v_full - v_empty.
  const Eigen::MatrixXd wx = weights.asDiagonal() * design;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = 2.0 * (design.transpose() * wx);
  for (int i = 0; i < n; ++i) kkt(i, i) += 2.0 * cfg.ridge_lambda;
  kkt.topRightCorner(n, 1).setOnes();
  kkt.bottomLeftCorner(1, n).setOnes();
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = 2.0 * (wx.transpose() * targets);
  rhs[n] = v_full - v_empty;

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) {
    throw ExplainerError(
        "singular kernel shap regression; increase num_samples");
  }
  const Eigen::VectorXd sol = lu.solve(rhs);
  return sol.head(n);
}

AttributionVector kernelshap_attribute(const PredictablePipeline& pipe,
                                       const Eigen::VectorXd& x,
                                       const ExplainerConfig& cfg) {
  return kernelshap_attribute(pipeline_value_fn(pipe, x),
                              static_cast<int>(x.size()), cfg);
}

AttributionVector exact_shapley(const CoalitionValueFn& value, int n) {
  if (n < 1) throw ContractError("exact shapley needs at least one feature");
  if (n > 12) {
    throw CapacityError("exact shapley enumerates 2^n subsets; n must be <= 12");
  }
  const std::uint64_t total = 1ULL << n;
  std::vector<double> v(total);
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    v[bits] = checked_value(value, keep_from_bitmask(bits, n));
  }

  // weight(s) = s! (n-1-s)! / n! for coalitions of size s not containing i.
  std::vector<double> fact(static_cast<std::size_t>(n) + 1, 1.0);
  for (int i = 1; i <= n; ++i) fact[static_cast<std::size_t>(i)] = fact[i - 1] * i;
  std::vector<double> weight(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < n; ++s) {
    weight[static_cast<std::size_t>(s)] =
        fact[static_cast<std::size_t>(s)] *
        fact[static_cast<std::size_t>(n - 1 - s)] /
        fact[static_cast<std::size_t>(n)];
  }

  AttributionVector alpha = AttributionVector::Zero(n);
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    const int s = static_cast<int>(std::popcount(bits));
    for (int i = 0; i < n; ++i) {
      if (bits & (1ULL << i)) continue;
      alpha[i] += weight[static_cast<std::size_t>(s)] *
                  (v[bits | (1ULL << i)] - v[bits]);
    }
  }
  return alpha;
}

AttributionVector exact_shapley(const PredictablePipeline& pipe,
                                const Eigen::VectorXd& x) {
  return exact_shapley(pipeline_value_fn(pipe, x),
                       static_cast<int>(x.size()));
}

}  // namespace mcal
