#pragma once

#include <string>
#include <vector>

#include "mcal/ablation.hpp"

namespace mcal {

struct LabeledDataset {
  Eigen::MatrixXd features;  // N x n, feature units (see load_csv_dataset)
  std::vector<int> labels;   // values in [0, m)
  int m = 0;
  Eigen::VectorXd feature_means;  // train-split means, feature units
  std::vector<int> train_rows;
  std::vector<int> calib_rows;
  std::vector<int> test_rows;

  Eigen::Index n() const { return features.cols(); }
  Eigen::Index rows() const { return features.rows(); }
  void validate() const;
};

enum class ModelKind { SoftmaxRegression, Mlp };

const char* to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& name);

// Frozen classifier. The standardizer is part of the model: raw features go
// through (x - input_mean) / input_scale before the linear layers, so a fixed
// raw imputation value always lands on the same point in model space.
struct DeskModel {
  ModelKind kind = ModelKind::SoftmaxRegression;
  int n = 0;
  int m = 0;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;  // strictly positive
  Eigen::MatrixXd w1;           // SoftmaxRegression: m x n; Mlp: h x n
  Eigen::VectorXd b1;           // m or h
  Eigen::MatrixXd w2;           // Mlp only: m x h
  Eigen::VectorXd b2;           // Mlp only: m

  int hidden_width() const {
    return kind == ModelKind::Mlp ? static_cast<int>(w1.rows()) : 0;
  }
  void validate() const;
};

struct SyntheticSpec {
  int m = 3;
  int n = 16;
  int samples_per_class = 400;
  Eigen::MatrixXd cluster_means;  // m x n, row 0 must be the origin
  double cluster_scale = 1.0;
  std::uint64_t seed = 0;

  // Origin-attractor construction: class 0 at the origin (the ZeroImpute
  // image), every other class offset inside its own disjoint coordinate
  // block, scaled so inter-class distance is `separation * cluster_scale`.
  static SyntheticSpec origin_attractor(int m, int n, int samples_per_class,
                                        double cluster_scale, double separation,
                                        std::uint64_t seed);
  void validate() const;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int steps = 500;
  int hidden_width = 32;  // Mlp only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

LabeledDataset gen_synthetic_clusters(const SyntheticSpec& spec);

struct CsvSchema {
  std::string label_column;
  // Label strings mapped to classes 0..m-1 in this order; empty means infer
  // the sorted distinct values from the file.
  std::vector<std::string> class_values;
};

// Parses a header-row CSV, splits 70/15/15 by seeded shuffle, then
// standardizes all features with train-split statistics (so a zero feature
// value afterwards means "at the training mean").
LabeledDataset load_csv_dataset(const std::string& path,
                                const CsvSchema& schema, std::uint64_t seed);

DeskModel train_model(const LabeledDataset& data, ModelKind kind,
                      const TrainConfig& config);

LogitVector model_logits(const DeskModel& model, const Eigen::VectorXd& x);

int model_predict(const DeskModel& model, const Eigen::VectorXd& x);

// Retrain baseline: same optimizer, but every step draws a fresh
// Bernoulli(mask_prob) mask per training row and ablates before the forward
// pass. mask_prob = 0 reduces exactly to train_model.
DeskModel retrain_on_ablations(const LabeledDataset& data, ModelKind kind,
                               const TrainConfig& config,
                               const AblationPolicy& policy,
                               double mask_prob = 0.5);

double split_accuracy(const DeskModel& model, const LabeledDataset& data,
                      const std::vector<int>& rows);

}  // namespace mcal
