#pragma once

#include "mcal/models.hpp"

namespace mcal {

// A model plus (optionally) a calibrator and the imputation policy it is
// evaluated under: the drop-in replacement pipeline. At most one of
// `calibrator` (rate-agnostic) and `ensemble` (rate-conditioned) is set.
struct PredictablePipeline {
  DeskModel model;
  std::optional<CalibratorParams> calibrator;
  std::optional<CalibratorEnsemble> ensemble;
  AblationPolicy policy;

  void validate() const;
  // Raw model logits, never calibrated: the bias metric's reference anchor.
  LogitVector base_logits(const Eigen::VectorXd& x) const;
  // Calibrated logits; the ensemble member is chosen by realized_rate.
  LogitVector logits(const Eigen::VectorXd& x, double realized_rate) const;
  ClassDistribution probs(const Eigen::VectorXd& x,
                          double realized_rate) const;
  int predict(const Eigen::VectorXd& x, double realized_rate) const;
};

ClassDistribution class_frequency(const std::vector<int>& preds, int m);

// Missingness bias: KL between the pipeline's class frequencies on rate-ablated inputs
// and the *uncalibrated base model's* frequencies on the clean inputs. The
// reference side is always the base model so every method is measured
// against one fixed anchor.
double missingness_bias(const PredictablePipeline& pipe,
                        const LabeledDataset& data,
                        const std::vector<int>& rows, double rate,
                        int ablations_per_input, std::uint64_t seed,
                        double eps = 1e-9, int group_size = 1);

struct BiasReportRow {
  double rate = 0.0;
  double bias_nats = 0.0;
  double accuracy = 0.0;
};

struct BiasReport {
  std::vector<BiasReportRow> per_rate;
  double mean_bias = 0.0;
};

// Bias and ground-truth accuracy across the grid. Rate index i uses the
// sub-seed derive_seed(seed, i), so each row is reproducible in isolation by
// missingness_bias with that seed.
BiasReport accuracy_vs_rate(const PredictablePipeline& pipe,
                            const LabeledDataset& data,
                            const std::vector<int>& rows,
                            const AblationRateGrid& grid,
                            int ablations_per_input, std::uint64_t seed,
                            double eps = 1e-9, int group_size = 1);

// f(x)_yhat - f(Top_k(x, alpha))_yhat: probability the pipeline loses when
// only the k highest-attributed features are kept (lower = more faithful).
double sufficiency(const PredictablePipeline& pipe, const Eigen::VectorXd& x,
                   const AttributionVector& alpha, int k);

// f(x)_yhat - f(Bot_{n-k}(x, alpha))_yhat: probability lost when the k
// highest-attributed features are ablated (higher = more faithful).
double sensitivity(const PredictablePipeline& pipe, const Eigen::VectorXd& x,
                   const AttributionVector& alpha, int k);

}  // namespace mcal
