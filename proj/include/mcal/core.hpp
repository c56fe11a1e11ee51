#pragma once

#include <string>

#include <Eigen/Dense>

#include "mcal/errors.hpp"

namespace mcal {

using LogitVector = Eigen::VectorXd;
using ClassDistribution = Eigen::VectorXd;
using AttributionVector = Eigen::VectorXd;

enum class Parametrization { Dense, Diagonal, Temperature };

const char* to_string(Parametrization p);
Parametrization parametrization_from_string(const std::string& name);

// Affine logit calibrator R(z) = Wz + b. Which fields are live depends on the
// parametrization: Dense keeps the full m x m matrix, Diagonal keeps only the
// diagonal of W (vector scaling), Temperature keeps the single scalar 1/T with
// the bias pinned at zero.
struct CalibratorParams {
  Parametrization parametrization = Parametrization::Dense;
  int m = 0;
  Eigen::MatrixXd weight;        // Dense: m x m
  Eigen::VectorXd scale;         // Diagonal: m entries of diag(W)
  double inv_temperature = 1.0;  // Temperature: 1/T, kept > 0
  Eigen::VectorXd bias;          // m entries; all zero for Temperature

  // Identity transform under the given parametrization (W = I, b = 0, T = 1).
  static CalibratorParams identity(Parametrization kind, int m);

  // Embeds the active parametrization into a full m x m matrix.
  Eigen::MatrixXd dense_weight() const;

  int free_parameter_count() const;
  void validate() const;
};

// Max-subtracted log(sum(exp(z))); every probability computation routes
// through this, logs of raw softmax outputs are never taken.
double log_sum_exp(const LogitVector& z);

ClassDistribution softmax(const LogitVector& z);

LogitVector apply_calibrator(const CalibratorParams& p, const LogitVector& z);

// Argmax with ties broken to the lowest index.
int predict_class(const LogitVector& z);

ClassDistribution one_hot(int index, int m);

// -log softmax(z)[target] in nats, computed as log_sum_exp(z) - z[target].
double cross_entropy(const LogitVector& calibrated, int target);

// KL(p || q) in nats over additively smoothed copies (p + eps)/(1 + m*eps).
double kl_divergence(const ClassDistribution& p, const ClassDistribution& q,
                     double eps = 1e-9);

}  // namespace mcal
