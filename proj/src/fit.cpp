#include "mcal/fit.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mcal {

namespace {

// Pairs compiled into column-major matrices once per fit.
struct PairMatrix {
  Eigen::MatrixXd ablated;   // m x N
  std::vector<int> targets;  // clean argmax per column
  int m = 0;
};

PairMatrix compile_pairs(const std::vector<PairedLogitSample>& pairs) {
  if (pairs.empty()) {
    throw ContractError("calibrator fit needs at least one paired sample");
  }
  PairMatrix mat;
  mat.m = static_cast<int>(pairs.front().clean_logits.size());
  if (mat.m < 2) {
    throw ContractError("paired samples need at least two classes");
  }
  const auto n = static_cast<Eigen::Index>(pairs.size());
  mat.ablated.resize(mat.m, n);
  mat.targets.resize(pairs.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const PairedLogitSample& s = pairs[static_cast<std::size_t>(j)];
    if (s.clean_logits.size() != mat.m || s.ablated_logits.size() != mat.m) {
      throw ContractError("paired sample " + std::to_string(j) +
                          " has inconsistent logit dimensions");
    }
    if (!s.clean_logits.allFinite() || !s.ablated_logits.allFinite()) {
      throw ContractError("paired sample " + std::to_string(j) +
                          " contains non-finite logits");
    }
    if (!(s.ablation_rate >= 0.0 && s.ablation_rate <= 1.0)) {
      throw ContractError("paired sample " + std::to_string(j) +
                          " has ablation rate outside [0, 1]");
    }
    mat.ablated.col(j) = s.ablated_logits;
    mat.targets[static_cast<std::size_t>(j)] = predict_class(s.clean_logits);
  }
  return mat;
}

// Buffers reused across optimizer steps; a 5000-step fit would otherwise
// allocate (and page in) fresh m x N matrices every step.
struct EvalWorkspace {
  Eigen::MatrixXd logits;  // holds calibrated logits, then softmax in place
  Eigen::RowVectorXd colmax;
  Eigen::RowVectorXd expsum;
};

// Objective (and optionally its packed gradient) at the given parameters.
double evaluate(const CalibratorParams& params, const PairMatrix& mat,
                double l2_lambda, Eigen::VectorXd* grad, EvalWorkspace& ws) {
  const int m = mat.m;
  const auto n = mat.ablated.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::MatrixXd& logits = ws.logits;  // m x N calibrated logits
  switch (params.parametrization) {
    case Parametrization::Dense:
      logits.noalias() = params.weight * mat.ablated;
      logits.colwise() += params.bias;
      break;
    case Parametrization::Diagonal:
      logits.noalias() = params.scale.asDiagonal() * mat.ablated;
      logits.colwise() += params.bias;
      break;
    case Parametrization::Temperature:
      logits.noalias() = params.inv_temperature * mat.ablated;
      break;
  }

  // Max-subtracted softmax per column, shared by the loss and the gradient.
  ws.colmax = logits.colwise().maxCoeff();
  double tgt = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    tgt += logits(mat.targets[static_cast<std::size_t>(j)], j);
  }
  logits.rowwise() -= ws.colmax;
  logits.array() = logits.array().exp();  // logits now holds exp(z - max)
  ws.expsum = logits.colwise().sum();

  const double ce =
      (ws.expsum.array().log().sum() + ws.colmax.sum() - tgt) * inv_n;

  double penalty = 0.0;
  switch (params.parametrization) {
    case Parametrization::Dense:
      penalty = (params.weight - Eigen::MatrixXd::Identity(m, m)).squaredNorm() +
                params.bias.squaredNorm();
      break;
    case Parametrization::Diagonal:
      penalty = (params.scale.array() - 1.0).matrix().squaredNorm() +
                params.bias.squaredNorm();
      break;
    case Parametrization::Temperature: {
      const double d = params.inv_temperature - 1.0;
      penalty = static_cast<double>(m) * d * d;
      break;
    }
  }
  const double objective = ce + l2_lambda * penalty;

  if (grad != nullptr) {
    // d(mean CE)/d(logits) = (softmax - one_hot(target)) / N, built in place:
    // scale each exp column by inv_n / expsum, then subtract inv_n at the
    // target rows.
    Eigen::MatrixXd& probs = logits;
    probs.array().rowwise() *= (inv_n / ws.expsum.array());
    for (Eigen::Index j = 0; j < n; ++j) {
      probs(mat.targets[static_cast<std::size_t>(j)], j) -= inv_n;
    }
    switch (params.parametrization) {
      case Parametrization::Dense: {
        Eigen::MatrixXd dw = probs * mat.ablated.transpose();
        dw += 2.0 * l2_lambda *
              (params.weight - Eigen::MatrixXd::Identity(m, m));
        const Eigen::VectorXd db =
            probs.rowwise().sum() + 2.0 * l2_lambda * params.bias;
        grad->resize(m * m + m);
        for (int r = 0; r < m; ++r) {
          grad->segment(r * m, m) = dw.row(r);
        }
        grad->tail(m) = db;
        break;
      }
      case Parametrization::Diagonal: {
        const Eigen::VectorXd dscale =
            (probs.array() * mat.ablated.array()).rowwise().sum().matrix() +
            2.0 * l2_lambda * (params.scale.array() - 1.0).matrix();
        const Eigen::VectorXd db =
            probs.rowwise().sum() + 2.0 * l2_lambda * params.bias;
        grad->resize(2 * m);
        grad->head(m) = dscale;
        grad->tail(m) = db;
        break;
      }
      case Parametrization::Temperature: {
        grad->resize(1);
        (*grad)[0] = (probs.array() * mat.ablated.array()).sum() +
                     2.0 * l2_lambda * static_cast<double>(m) *
                         (params.inv_temperature - 1.0);
        break;
      }
    }
  }
  return objective;
}

void validate_fit_config(const FitConfig& c) {
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ContractError("learning rate must be finite and positive");
  }
  if (c.steps < 0) throw ContractError("step count must be non-negative");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0) ||
      !(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) {
    throw ContractError("adam betas must lie in [0, 1)");
  }
  if (!(c.adam_eps > 0.0)) throw ContractError("adam eps must be positive");
  if (!(c.l2_lambda >= 0.0) || !std::isfinite(c.l2_lambda)) {
    throw ContractError("l2 lambda must be finite and non-negative");
  }
  if (!(c.init_jitter >= 0.0) || !std::isfinite(c.init_jitter)) {
    throw ContractError("init jitter must be finite and non-negative");
  }
}

std::string format_rate(double rate) {
  std::ostringstream os;
  os << rate;
  return os.str();
}

}  // namespace

double fit_objective(const CalibratorParams& params,
                     const std::vector<PairedLogitSample>& pairs,
                     double l2_lambda) {
  params.validate();
  const PairMatrix mat = compile_pairs(pairs);
  if (mat.m != params.m) {
    throw ContractError("paired samples and calibrator disagree on m");
  }
  EvalWorkspace ws;
  return evaluate(params, mat, l2_lambda, nullptr, ws);
}

Eigen::VectorXd fit_gradient(const CalibratorParams& params,
                             const std::vector<PairedLogitSample>& pairs,
                             double l2_lambda) {
  params.validate();
  const PairMatrix mat = compile_pairs(pairs);
  if (mat.m != params.m) {
    throw ContractError("paired samples and calibrator disagree on m");
  }
  Eigen::VectorXd grad;
  EvalWorkspace ws;
  evaluate(params, mat, l2_lambda, &grad, ws);
  return grad;
}

Eigen::VectorXd pack_params(const CalibratorParams& params) {
  params.validate();
  const int m = params.m;
  Eigen::VectorXd flat;
  switch (params.parametrization) {
    case Parametrization::Dense:
      flat.resize(m * m + m);
      for (int r = 0; r < m; ++r) {
        flat.segment(r * m, m) = params.weight.row(r);
      }
      flat.tail(m) = params.bias;
      break;
    case Parametrization::Diagonal:
      flat.resize(2 * m);
      flat.head(m) = params.scale;
      flat.tail(m) = params.bias;
      break;
    case Parametrization::Temperature:
      flat.resize(1);
      flat[0] = params.inv_temperature;
      break;
  }
  return flat;
}

CalibratorParams unpack_params(const Eigen::VectorXd& flat,
                               Parametrization kind, int m) {
  CalibratorParams p = CalibratorParams::identity(kind, m);
  switch (kind) {
    case Parametrization::Dense:
      if (flat.size() != m * m + m) {
        throw ContractError("dense pack needs m*m + m coordinates");
      }
      for (int r = 0; r < m; ++r) {
        p.weight.row(r) = flat.segment(r * m, m);
      }
      p.bias = flat.tail(m);
      break;
    case Parametrization::Diagonal:
      if (flat.size() != 2 * m) {
        throw ContractError("diagonal pack needs 2m coordinates");
      }
      p.scale = flat.head(m);
      p.bias = flat.tail(m);
      break;
    case Parametrization::Temperature:
      if (flat.size() != 1) {
        throw ContractError("temperature pack needs one coordinate");
      }
      p.inv_temperature = flat[0];
      break;
  }
  p.validate();
  return p;
}

FitResult fit_calibrator(const std::vector<PairedLogitSample>& pairs,
                         const FitConfig& config) {
  validate_fit_config(config);
  const PairMatrix mat = compile_pairs(pairs);

  CalibratorParams params =
      CalibratorParams::identity(config.parametrization, mat.m);
  if (config.init_jitter > 0.0) {
    Rng rng(derive_seed(config.seed, 0x66697469));  // "fiti"
    Eigen::VectorXd flat = pack_params(params);
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      flat[i] += config.init_jitter * gaussian(rng);
    }
    if (config.parametrization == Parametrization::Temperature) {
      flat[0] = std::clamp(flat[0], kMinInvTemperature, kMaxInvTemperature);
    }
    params = unpack_params(flat, config.parametrization, mat.m);
  }

  Eigen::VectorXd x = pack_params(params);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd grad(x.size());

  EvalWorkspace ws;
  FitResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.steps) + 1);
  for (int step = 0; step < config.steps; ++step) {
    const double objective =
        evaluate(params, mat, config.l2_lambda, &grad, ws);
    if (!std::isfinite(objective)) {
      throw OptimizationError("calibrator fit diverged at step " +
                              std::to_string(step));
    }
    result.loss_trace.push_back(objective);

    m1 = config.adam_beta1 * m1 + (1.0 - config.adam_beta1) * grad;
    m2 = config.adam_beta2 * m2 +
         (1.0 - config.adam_beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(config.adam_beta1, step + 1);
    const double bc2 = 1.0 - std::pow(config.adam_beta2, step + 1);
    x -= (config.learning_rate *
          (m1 / bc1).array() /
          ((m2 / bc2).array().sqrt() + config.adam_eps))
             .matrix();
    if (!x.allFinite()) {
      throw OptimizationError("calibrator fit diverged at step " +
                              std::to_string(step));
    }
    if (config.parametrization == Parametrization::Temperature) {
      x[0] = std::clamp(x[0], kMinInvTemperature, kMaxInvTemperature);
    }
    params = unpack_params(x, config.parametrization, mat.m);
  }

  const double final_objective =
      evaluate(params, mat, config.l2_lambda, nullptr, ws);
  if (!std::isfinite(final_objective)) {
    throw OptimizationError("calibrator fit diverged at step " +
                            std::to_string(config.steps));
  }
  result.loss_trace.push_back(final_objective);
  result.final_loss = final_objective;
  result.params = params;
  return result;
}

CalibratorEnsemble fit_ensemble(
    const std::vector<RateBucket>& buckets, const FitConfig& config,
    const std::vector<PairedLogitSample>* unconditioned_pairs) {
  validate_fit_config(config);
  if (buckets.empty() &&
      (unconditioned_pairs == nullptr || unconditioned_pairs->empty())) {
    throw ContractError("ensemble fit needs at least one rate bucket");
  }

  CalibratorEnsemble ensemble;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const RateBucket& bucket = buckets[i];
    if (!(bucket.rate >= 0.0 && bucket.rate <= 1.0)) {
      throw ContractError("rate bucket " + format_rate(bucket.rate) +
                          " lies outside [0, 1]");
    }
    if (bucket.pairs.empty()) {
      throw ContractError("rate bucket " + format_rate(bucket.rate) +
                          " has no paired samples");
    }
    FitConfig cfg = config;
    cfg.seed = derive_seed(config.seed, 1000 + i);
    FitResult fit = fit_calibrator(bucket.pairs, cfg);
    if (ensemble.m == 0) {
      ensemble.m = fit.params.m;
    } else if (ensemble.m != fit.params.m) {
      throw ContractError("rate buckets disagree on the class count");
    }
    ensemble.entries.push_back(
        EnsembleEntry{bucket.rate, std::move(fit.params), fit.final_loss});
  }
  std::sort(ensemble.entries.begin(), ensemble.entries.end(),
            [](const EnsembleEntry& a, const EnsembleEntry& b) {
              return a.rate < b.rate;
            });
  for (std::size_t i = 1; i < ensemble.entries.size(); ++i) {
    if (ensemble.entries[i].rate == ensemble.entries[i - 1].rate) {
      throw ContractError("duplicate rate bucket " +
                          format_rate(ensemble.entries[i].rate));
    }
  }

  if (unconditioned_pairs != nullptr && !unconditioned_pairs->empty()) {
    FitConfig cfg = config;
    cfg.seed = derive_seed(config.seed, 999);
    FitResult fit = fit_calibrator(*unconditioned_pairs, cfg);
    if (ensemble.m == 0) {
      ensemble.m = fit.params.m;
    } else if (ensemble.m != fit.params.m) {
      throw ContractError(
          "unconditioned pairs disagree with rate buckets on the class count");
    }
    ensemble.unconditioned = std::move(fit.params);
  }
  return ensemble;
}

const CalibratorParams& select_calibrator(const CalibratorEnsemble& ensemble,
                                          double realized_rate) {
  if (!(realized_rate >= 0.0 && realized_rate <= 1.0)) {
    throw ContractError("realized rate must lie in [0, 1]");
  }
  if (ensemble.entries.empty()) {
    if (ensemble.unconditioned.has_value()) return *ensemble.unconditioned;
    throw ContractError("calibrator ensemble is empty");
  }
  std::size_t best = 0;
  double best_dist = std::abs(ensemble.entries[0].rate - realized_rate);
  for (std::size_t i = 1; i < ensemble.entries.size(); ++i) {
    const double dist = std::abs(ensemble.entries[i].rate - realized_rate);
    if (dist < best_dist) {  // strict: midpoint ties keep the lower rate
      best = i;
      best_dist = dist;
    }
  }
  return ensemble.entries[best].params;
}

}  // namespace mcal
