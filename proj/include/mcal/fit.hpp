#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mcal/core.hpp"
#include "mcal/rng.hpp"

namespace mcal {

// One calibration example: the model's logits on the clean input and on an
// ablated copy of it. The fit target is always the argmax of clean_logits;
// clean_label is carried for downstream evaluation only.
struct PairedLogitSample {
  LogitVector clean_logits;
  LogitVector ablated_logits;
  double ablation_rate = 0.0;
  std::optional<int> clean_label;
};

struct FitConfig {
  // 1e-2 converges the CE objective within the default step budget; smaller
  // rates leave high-ablation-rate fits visibly short of the optimum.
  double learning_rate = 1e-2;
  int steps = 5000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double l2_lambda = 0.0;  // penalty weight toward the identity transform
  Parametrization parametrization = Parametrization::Dense;
  std::uint64_t seed = 0;
  // Standard deviation of the Gaussian perturbation applied to the identity
  // start. Zero (the default) starts exactly at the identity.
  double init_jitter = 0.0;
};

struct FitResult {
  CalibratorParams params;
  // Objective value entering each step, plus the value after the last step;
  // size is steps + 1 and loss_trace.back() == final_loss.
  std::vector<double> loss_trace;
  double final_loss = 0.0;
};

// Inverse temperature is clamped into this range after every update.
inline constexpr double kMinInvTemperature = 1e-6;
inline constexpr double kMaxInvTemperature = 1e6;

// Mean cross-entropy of calibrated ablated logits against the clean argmax,
// plus l2_lambda * (squared distance of the parameters from the identity).
double fit_objective(const CalibratorParams& params,
                     const std::vector<PairedLogitSample>& pairs,
                     double l2_lambda);

// Analytic gradient of fit_objective in packed coordinates.
Eigen::VectorXd fit_gradient(const CalibratorParams& params,
                             const std::vector<PairedLogitSample>& pairs,
                             double l2_lambda);

// Flat coordinates used by the optimizer: Dense packs W row-major then b,
// Diagonal packs diag(W) then b, Temperature packs the single 1/T.
Eigen::VectorXd pack_params(const CalibratorParams& params);
CalibratorParams unpack_params(const Eigen::VectorXd& flat,
                               Parametrization kind, int m);

FitResult fit_calibrator(const std::vector<PairedLogitSample>& pairs,
                         const FitConfig& config);

struct RateBucket {
  double rate = 0.0;
  std::vector<PairedLogitSample> pairs;
};

struct EnsembleEntry {
  double rate = 0.0;
  CalibratorParams params;
  double final_loss = 0.0;
};

// Rate-conditioned calibrator bank plus an optional rate-agnostic member
// fitted on mixed-rate data.
struct CalibratorEnsemble {
  int m = 0;
  std::vector<EnsembleEntry> entries;  // sorted by rate, ascending
  std::optional<CalibratorParams> unconditioned;
};

CalibratorEnsemble fit_ensemble(
    const std::vector<RateBucket>& buckets, const FitConfig& config,
    const std::vector<PairedLogitSample>* unconditioned_pairs = nullptr);

// Nearest-rate lookup; midpoint ties resolve to the lower rate. Falls back to
// the unconditioned member when the ensemble has no rate entries.
const CalibratorParams& select_calibrator(const CalibratorEnsemble& ensemble,
                                          double realized_rate);

}  // namespace mcal
