#include "mcal/metrics.hpp"

#include "mcal/explain.hpp"

namespace mcal {

void PredictablePipeline::validate() const {
  model.validate();
  if (calibrator.has_value() && ensemble.has_value()) {
    throw ContractError(
        "pipeline takes a single calibrator or an ensemble, not both");
  }
  if (calibrator.has_value()) {
    calibrator->validate();
    if (calibrator->m != model.m) {
      throw ContractError("calibrator and model disagree on the class count");
    }
  }
  if (ensemble.has_value()) {
    if (ensemble->entries.empty() && !ensemble->unconditioned.has_value()) {
      throw ContractError("calibrator ensemble is empty");
    }
    if (ensemble->m != model.m) {
      throw ContractError("ensemble and model disagree on the class count");
    }
  }
}

LogitVector PredictablePipeline::base_logits(const Eigen::VectorXd& x) const {
  return model_logits(model, x);
}

LogitVector PredictablePipeline::logits(const Eigen::VectorXd& x,
                                        double realized_rate) const {
  LogitVector z = model_logits(model, x);
  if (calibrator.has_value()) {
    return apply_calibrator(*calibrator, z);
  }
  if (ensemble.has_value()) {
    return apply_calibrator(select_calibrator(*ensemble, realized_rate), z);
  }
  return z;
}

ClassDistribution PredictablePipeline::probs(const Eigen::VectorXd& x,
                                             double realized_rate) const {
  return softmax(logits(x, realized_rate));
}

int PredictablePipeline::predict(const Eigen::VectorXd& x,
                                 double realized_rate) const {
  return predict_class(logits(x, realized_rate));
}

ClassDistribution class_frequency(const std::vector<int>& preds, int m) {
  if (preds.empty()) {
    throw ContractError("class frequency needs at least one prediction");
  }
  if (m < 2) throw ContractError("class frequency needs m >= 2");
  ClassDistribution freq = ClassDistribution::Zero(m);
  for (const int p : preds) {
    if (p < 0 || p >= m) {
      throw ContractError("prediction " + std::to_string(p) +
                          " out of range for m = " + std::to_string(m));
    }
    freq[p] += 1.0;
  }
  return freq / static_cast<double>(preds.size());
}

namespace {

struct RateEvaluation {
  double bias = 0.0;
  double accuracy = 0.0;
};

RateEvaluation evaluate_rate(const PredictablePipeline& pipe,
                             const LabeledDataset& data,
                             const std::vector<int>& rows, double rate,
                             int ablations_per_input, std::uint64_t seed,
                             double eps, int group_size) {
  pipe.validate();
  data.validate();
  if (rows.empty()) throw ContractError("bias evaluation needs a non-empty split");
  if (ablations_per_input < 1) {
    throw ContractError("ablations per input must be positive");
  }
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ContractError("ablation rate must lie in [0, 1]");
  }
  if (group_size < 1) throw ContractError("group size must be positive");
  const int n = static_cast<int>(data.n());
  pipe.policy.validate(n);

  const int groups = group_count(n, group_size);
  const int k = static_cast<int>(std::lround(rate * groups));
  const double realized = static_cast<double>(k) / static_cast<double>(groups);

  Rng rng(seed);
  std::vector<int> clean_preds;
  std::vector<int> ablated_preds;
  clean_preds.reserve(rows.size());
  ablated_preds.reserve(rows.size() *
                        static_cast<std::size_t>(ablations_per_input));
  long hits = 0;
  for (const int row : rows) {
    if (row < 0 || row >= data.rows()) {
      throw ContractError("row index " + std::to_string(row) +
                          " out of range");
    }
    const Eigen::VectorXd x = data.features.row(row);
    clean_preds.push_back(predict_class(pipe.base_logits(x)));
    const int label = data.labels[static_cast<std::size_t>(row)];
    for (int a = 0; a < ablations_per_input; ++a) {
      FeatureMask mask = sample_mask_fixed(groups, k, rng);
      if (group_size != 1) mask = expand_group_mask(mask, group_size, n);
      const int pred =
          pipe.predict(apply_ablation(x, mask, pipe.policy), realized);
      ablated_preds.push_back(pred);
      hits += pred == label;
    }
  }

  RateEvaluation out;
  out.bias = kl_divergence(class_frequency(ablated_preds, data.m),
                           class_frequency(clean_preds, data.m), eps);
  out.accuracy =
      static_cast<double>(hits) / static_cast<double>(ablated_preds.size());
  return out;
}

}  // namespace

double missingness_bias(const PredictablePipeline& pipe,
                        const LabeledDataset& data,
                        const std::vector<int>& rows, double rate,
                        int ablations_per_input, std::uint64_t seed,
                        double eps, int group_size) {
  return evaluate_rate(pipe, data, rows, rate, ablations_per_input, seed, eps,
                       group_size)
      .bias;
}

BiasReport accuracy_vs_rate(const PredictablePipeline& pipe,
                            const LabeledDataset& data,
                            const std::vector<int>& rows,
                            const AblationRateGrid& grid,
                            int ablations_per_input, std::uint64_t seed,
                            double eps, int group_size) {
  grid.validate();
  BiasReport report;
  report.per_rate.reserve(grid.rates.size());
  double total = 0.0;
  for (std::size_t i = 0; i < grid.rates.size(); ++i) {
    const RateEvaluation ev =
        evaluate_rate(pipe, data, rows, grid.rates[i], ablations_per_input,
                      derive_seed(seed, i), eps, group_size);
    report.per_rate.push_back({grid.rates[i], ev.bias, ev.accuracy});
    total += ev.bias;
  }
  report.mean_bias = total / static_cast<double>(report.per_rate.size());
  return report;
}

namespace {

double faithfulness_drop(const PredictablePipeline& pipe,
                         const Eigen::VectorXd& x,
                         const AttributionVector& alpha, int k,
                         bool ablate_top) {
  pipe.validate();
  const int n = static_cast<int>(x.size());
  if (alpha.size() != n) {
    throw ContractError("attribution length must equal the feature count");
  }
  if (!alpha.allFinite()) {
    throw ContractError("attribution scores must be finite");
  }
  if (k < 0 || k > n) throw ContractError("need 0 <= k <= n");
  pipe.policy.validate(n);

  const int yhat = pipe.predict(x, 0.0);
  const double p_clean = pipe.probs(x, 0.0)[yhat];

  // Ablate either the top-k set (sensitivity) or everything outside it
  // (sufficiency keeps the top-k and removes the rest).
  const std::vector<int> top = top_k_rank(alpha, k);
  FeatureMask mask(static_cast<std::size_t>(n), !ablate_top);
  for (const int i : top) mask[static_cast<std::size_t>(i)] = ablate_top;
  const int ablated =
      static_cast<int>(std::count(mask.begin(), mask.end(), true));
  const double realized =
      static_cast<double>(ablated) / static_cast<double>(n);
  const double p_masked =
      pipe.probs(apply_ablation(x, mask, pipe.policy), realized)[yhat];
  return p_clean - p_masked;
}

}  // namespace

double sufficiency(const PredictablePipeline& pipe, const Eigen::VectorXd& x,
                   const AttributionVector& alpha, int k) {
  return faithfulness_drop(pipe, x, alpha, k, /*ablate_top=*/false);
}

double sensitivity(const PredictablePipeline& pipe, const Eigen::VectorXd& x,
                   const AttributionVector& alpha, int k) {
  return faithfulness_drop(pipe, x, alpha, k, /*ablate_top=*/true);
}

}  // namespace mcal
