#include "mcal/core.hpp"

#include <cmath>
#include <limits>

namespace mcal {

namespace {

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw ContractError(std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

const char* to_string(Parametrization p) {
  switch (p) {
    case Parametrization::Dense:
      return "dense";
    case Parametrization::Diagonal:
      return "diagonal";
    case Parametrization::Temperature:
      return "temperature";
  }
  throw ContractError("unknown parametrization");
}

Parametrization parametrization_from_string(const std::string& name) {
  if (name == "dense") return Parametrization::Dense;
  if (name == "diagonal") return Parametrization::Diagonal;
  if (name == "temperature") return Parametrization::Temperature;
  throw ContractError("unknown parametrization '" + name + "'");
}

CalibratorParams CalibratorParams::identity(Parametrization kind, int m) {
  if (m < 2) throw ContractError("calibrator needs m >= 2 classes");
  CalibratorParams p;
  p.parametrization = kind;
  p.m = m;
  p.bias = Eigen::VectorXd::Zero(m);
  switch (kind) {
    case Parametrization::Dense:
      p.weight = Eigen::MatrixXd::Identity(m, m);
      break;
    case Parametrization::Diagonal:
      p.scale = Eigen::VectorXd::Ones(m);
      break;
    case Parametrization::Temperature:
      p.inv_temperature = 1.0;
      break;
  }
  return p;
}

Eigen::MatrixXd CalibratorParams::dense_weight() const {
  validate();
  switch (parametrization) {
    case Parametrization::Dense:
      return weight;
    case Parametrization::Diagonal:
      return scale.asDiagonal();
    case Parametrization::Temperature:
      return inv_temperature * Eigen::MatrixXd::Identity(m, m);
  }
  throw ContractError("unknown parametrization");
}

int CalibratorParams::free_parameter_count() const {
  switch (parametrization) {
    case Parametrization::Dense:
      return m * m + m;
    case Parametrization::Diagonal:
      return 2 * m;
    case Parametrization::Temperature:
      return 1;
  }
  throw ContractError("unknown parametrization");
}

void CalibratorParams::validate() const {
  if (m < 2) throw ContractError("calibrator needs m >= 2 classes");
  switch (parametrization) {
    case Parametrization::Dense:
      if (weight.rows() != m || weight.cols() != m) {
        throw ContractError("dense calibrator weight must be m x m");
      }
      if (!weight.allFinite()) {
        throw ContractError("dense calibrator weight must be finite");
      }
      break;
    case Parametrization::Diagonal:
      if (scale.size() != m) {
        throw ContractError("diagonal calibrator scale must have m entries");
      }
      if (!scale.allFinite()) {
        throw ContractError("diagonal calibrator scale must be finite");
      }
      break;
    case Parametrization::Temperature:
      if (!std::isfinite(inv_temperature) || inv_temperature <= 0.0) {
        throw ContractError("inverse temperature must be finite and positive");
      }
      if (bias.size() == m && bias.cwiseAbs().maxCoeff() != 0.0) {
        throw ContractError("temperature calibrator must have zero bias");
      }
      break;
  }
  if (bias.size() != m) {
    throw ContractError("calibrator bias must have m entries");
  }
  if (!bias.allFinite()) {
    throw ContractError("calibrator bias must be finite");
  }
}

double log_sum_exp(const LogitVector& z) {
  if (z.size() == 0) throw ContractError("log_sum_exp of an empty vector");
  require_finite(z, "logit vector");
  Eigen::Index imax = 0;
  const double zmax = z.maxCoeff(&imax);
  // log1p keeps the result exact when the max dominates: the remaining terms
  // would otherwise vanish against the implicit exp(0) = 1.
  double rest = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (i != imax) rest += std::exp(z[i] - zmax);
  }
  return zmax + std::log1p(rest);
}

ClassDistribution softmax(const LogitVector& z) {
  if (z.size() < 2) throw DomainError("softmax needs at least two classes");
  if (!z.allFinite()) {
    throw DomainError("softmax input contains a non-finite value");
  }
  const double zmax = z.maxCoeff();
  ClassDistribution p = (z.array() - zmax).exp();
  p /= p.sum();
  return p;
}

LogitVector apply_calibrator(const CalibratorParams& p, const LogitVector& z) {
  p.validate();
  if (z.size() != p.m) {
    throw ContractError("calibrator expects " + std::to_string(p.m) +
                        " logits, got " + std::to_string(z.size()));
  }
  require_finite(z, "logit vector");
  switch (p.parametrization) {
    case Parametrization::Dense:
      return p.weight * z + p.bias;
    case Parametrization::Diagonal:
      return p.scale.cwiseProduct(z) + p.bias;
    case Parametrization::Temperature:
      return p.inv_temperature * z;
  }
  throw ContractError("unknown parametrization");
}

int predict_class(const LogitVector& z) {
  if (z.size() == 0) throw ContractError("predict_class of an empty vector");
  require_finite(z, "logit vector");
  int best = 0;
  for (int i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;
  }
  return best;
}

ClassDistribution one_hot(int index, int m) {
  if (m < 2) throw ContractError("one_hot needs m >= 2 classes");
  if (index < 0 || index >= m) {
    throw ContractError("one_hot index " + std::to_string(index) +
                        " out of range for m = " + std::to_string(m));
  }
  ClassDistribution p = ClassDistribution::Zero(m);
  p[index] = 1.0;
  return p;
}

double cross_entropy(const LogitVector& calibrated, int target) {
  if (calibrated.size() < 2) {
    throw ContractError("cross_entropy needs at least two classes");
  }
  if (target < 0 || target >= calibrated.size()) {
    throw ContractError("cross_entropy target out of range");
  }
  require_finite(calibrated, "calibrated logit vector");
  // Fused form of log_sum_exp(z) - z[target]: adding the log1p term to zmax
  // first would round it away whenever the correct logit dominates.
  Eigen::Index imax = 0;
  const double zmax = calibrated.maxCoeff(&imax);
  double rest = 0.0;
  for (Eigen::Index i = 0; i < calibrated.size(); ++i) {
    if (i != imax) rest += std::exp(calibrated[i] - zmax);
  }
  return (zmax - calibrated[target]) + std::log1p(rest);
}

double kl_divergence(const ClassDistribution& p, const ClassDistribution& q,
                     double eps) {
  if (p.size() != q.size()) {
    throw ContractError("kl_divergence needs distributions of equal length");
  }
  const auto m = p.size();
  if (m < 2) throw ContractError("kl_divergence needs m >= 2 classes");
  if (eps < 0.0 || !std::isfinite(eps)) {
    throw ContractError("kl_divergence smoothing eps must be >= 0 and finite");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0 || !std::isfinite(q[i]) ||
        q[i] < 0.0) {
      throw ContractError("kl_divergence inputs must be non-negative");
    }
  }
  const double denom = 1.0 + static_cast<double>(m) * eps;
  double kl = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double ps = (p[i] + eps) / denom;
    if (ps == 0.0) continue;  // 0 * log(0/q) = 0
    const double qs = (q[i] + eps) / denom;
    if (qs == 0.0) return std::numeric_limits<double>::infinity();
    kl += ps * std::log(ps / qs);
  }
  return kl;
}

}  // namespace mcal
