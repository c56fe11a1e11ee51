#include "mcal/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mcal {

namespace {

constexpr std::uint64_t kTagSyntheticData = 11;
constexpr std::uint64_t kTagSyntheticSplit = 12;
constexpr std::uint64_t kTagCsvSplit = 13;
constexpr std::uint64_t kTagModelInit = 21;
constexpr std::uint64_t kTagRetrainMasks = 22;

void assign_splits(int total, Rng& rng, std::vector<int>& train,
                   std::vector<int>& calib, std::vector<int>& test) {
  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  for (int i = total - 1; i > 0; --i) {
    const int j = static_cast<int>(
        uniform_below(rng, static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(j)]);
  }
  int n_train = std::max(1, total * 70 / 100);
  const int n_calib = std::min(total - n_train, total * 15 / 100);
  train.assign(order.begin(), order.begin() + n_train);
  calib.assign(order.begin() + n_train, order.begin() + n_train + n_calib);
  test.assign(order.begin() + n_train + n_calib, order.end());
  std::sort(train.begin(), train.end());
  std::sort(calib.begin(), calib.end());
  std::sort(test.begin(), test.end());
}

Eigen::VectorXd rows_mean(const Eigen::MatrixXd& features,
                          const std::vector<int>& rows) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(features.cols());
  for (const int r : rows) mean += features.row(r).transpose();
  return mean / static_cast<double>(rows.size());
}

void standardizer_from_rows(const Eigen::MatrixXd& features,
                            const std::vector<int>& rows,
                            Eigen::VectorXd& mean, Eigen::VectorXd& scale) {
  mean = rows_mean(features, rows);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(features.cols());
  for (const int r : rows) {
    var += (features.row(r).transpose() - mean).array().square().matrix();
  }
  var /= static_cast<double>(rows.size());
  scale = var.array().sqrt();
  for (Eigen::Index i = 0; i < scale.size(); ++i) {
    if (scale[i] < 1e-12) scale[i] = 1.0;  // constant feature: center only
  }
}

template <class Mat>
struct AdamState {
  Mat m1, m2;
  explicit AdamState(const Mat& shape)
      : m1(Mat::Zero(shape.rows(), shape.cols())),
        m2(Mat::Zero(shape.rows(), shape.cols())) {}
  void update(Mat& param, const Mat& grad, int step, const TrainConfig& cfg) {
    m1 = cfg.adam_beta1 * m1 + (1.0 - cfg.adam_beta1) * grad;
    m2 = cfg.adam_beta2 * m2 +
         (1.0 - cfg.adam_beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, step + 1);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, step + 1);
    param -= (cfg.learning_rate * (m1 / bc1).array() /
              ((m2 / bc2).array().sqrt() + cfg.adam_eps))
                 .matrix();
  }
};

// Mean cross-entropy and the softmax-minus-onehot gradient for a logit batch.
double batch_ce_and_grad(const Eigen::MatrixXd& logits,
                         const std::vector<int>& targets,
                         Eigen::MatrixXd& grad) {
  const auto n = logits.cols();
  const Eigen::RowVectorXd colmax = logits.colwise().maxCoeff();
  grad = (logits.rowwise() - colmax).array().exp();
  const Eigen::RowVectorXd expsum = grad.colwise().sum();
  grad.array().rowwise() /= expsum.array();
  double ce = expsum.array().log().sum() + colmax.sum();
  for (Eigen::Index j = 0; j < n; ++j) {
    ce -= logits(targets[static_cast<std::size_t>(j)], j);
    grad(targets[static_cast<std::size_t>(j)], j) -= 1.0;
  }
  grad /= static_cast<double>(n);
  return ce / static_cast<double>(n);
}

void validate_train_config(const TrainConfig& c, ModelKind kind) {
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ContractError("learning rate must be finite and positive");
  }
  if (c.steps < 0) throw ContractError("step count must be non-negative");
  if (kind == ModelKind::Mlp && c.hidden_width < 1) {
    throw ContractError("mlp hidden width must be positive");
  }
  if (!(c.adam_eps > 0.0)) throw ContractError("adam eps must be positive");
}

DeskModel train_impl(const LabeledDataset& data, ModelKind kind,
                     const TrainConfig& config, const AblationPolicy* policy,
                     double mask_prob) {
  data.validate();
  validate_train_config(config, kind);
  if (data.train_rows.empty()) {
    throw ContractError("training needs a non-empty train split");
  }
  const int n = static_cast<int>(data.n());
  const int m = data.m;
  const auto n_train = static_cast<Eigen::Index>(data.train_rows.size());

  DeskModel model;
  model.kind = kind;
  model.n = n;
  model.m = m;
  standardizer_from_rows(data.features, data.train_rows, model.input_mean,
                         model.input_scale);

  Eigen::MatrixXd raw(n, n_train);  // column per training row
  std::vector<int> targets(data.train_rows.size());
  for (Eigen::Index j = 0; j < n_train; ++j) {
    const int row = data.train_rows[static_cast<std::size_t>(j)];
    raw.col(j) = data.features.row(row).transpose();
    targets[static_cast<std::size_t>(j)] = data.labels[static_cast<std::size_t>(row)];
  }
  const auto standardize = [&](const Eigen::MatrixXd& x) {
    return ((x.colwise() - model.input_mean).array().colwise() /
            model.input_scale.array())
        .matrix();
  };

  const int h = config.hidden_width;
  Rng init_rng(derive_seed(config.seed, kTagModelInit));
  if (kind == ModelKind::SoftmaxRegression) {
    model.w1 = Eigen::MatrixXd::Zero(m, n);
    model.b1 = Eigen::VectorXd::Zero(m);
  } else {
    model.w1.resize(h, n);
    const double s1 = std::sqrt(2.0 / n);
    for (Eigen::Index i = 0; i < model.w1.size(); ++i) {
      model.w1.data()[i] = s1 * gaussian(init_rng);
    }
    model.b1 = Eigen::VectorXd::Zero(h);
    model.w2.resize(m, h);
    const double s2 = std::sqrt(2.0 / h);
    for (Eigen::Index i = 0; i < model.w2.size(); ++i) {
      model.w2.data()[i] = s2 * gaussian(init_rng);
    }
    model.b2 = Eigen::VectorXd::Zero(m);
  }

  AdamState<Eigen::MatrixXd> aw1(model.w1);
  AdamState<Eigen::VectorXd> ab1(model.b1);
  AdamState<Eigen::MatrixXd> aw2(kind == ModelKind::Mlp ? model.w2
                                                        : Eigen::MatrixXd());
  AdamState<Eigen::VectorXd> ab2(kind == ModelKind::Mlp ? model.b2
                                                        : Eigen::VectorXd());

  Rng mask_rng(derive_seed(config.seed, kTagRetrainMasks));
  Eigen::MatrixXd grad;
  for (int step = 0; step < config.steps; ++step) {
    Eigen::MatrixXd batch = raw;
    if (policy != nullptr) {
      for (Eigen::Index j = 0; j < n_train; ++j) {
        const FeatureMask mask = sample_mask_bernoulli(n, mask_prob, mask_rng);
        batch.col(j) = apply_ablation(batch.col(j), mask, *policy);
      }
    }
    const Eigen::MatrixXd x = standardize(batch);

    double loss = 0.0;
    if (kind == ModelKind::SoftmaxRegression) {
      Eigen::MatrixXd logits = model.w1 * x;
      logits.colwise() += model.b1;
      loss = batch_ce_and_grad(logits, targets, grad);
      aw1.update(model.w1, (grad * x.transpose()).eval(), step, config);
      ab1.update(model.b1, grad.rowwise().sum().eval(), step, config);
    } else {
      Eigen::MatrixXd pre = model.w1 * x;
      pre.colwise() += model.b1;
      const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
      Eigen::MatrixXd logits = model.w2 * hidden;
      logits.colwise() += model.b2;
      loss = batch_ce_and_grad(logits, targets, grad);
      const Eigen::MatrixXd ghidden =
          (model.w2.transpose() * grad).array() *
          (pre.array() > 0.0).cast<double>();
      aw2.update(model.w2, (grad * hidden.transpose()).eval(), step, config);
      ab2.update(model.b2, grad.rowwise().sum().eval(), step, config);
      aw1.update(model.w1, (ghidden * x.transpose()).eval(), step, config);
      ab1.update(model.b1, ghidden.rowwise().sum().eval(), step, config);
    }
    if (!std::isfinite(loss)) {
      throw OptimizationError("model training diverged at step " +
                              std::to_string(step));
    }
  }
  model.validate();
  return model;
}

}  // namespace

void LabeledDataset::validate() const {
  if (m < 2) throw ContractError("dataset needs m >= 2 classes");
  if (features.rows() < 1 || features.cols() < 1) {
    throw ContractError("dataset features must be non-empty");
  }
  if (!features.allFinite()) {
    throw ContractError("dataset features must be finite");
  }
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw ContractError("dataset labels must match the feature rows");
  }
  for (const int y : labels) {
    if (y < 0 || y >= m) throw ContractError("dataset label out of range");
  }
  if (feature_means.size() != features.cols() || !feature_means.allFinite()) {
    throw ContractError("dataset feature means must be finite with length n");
  }
  std::vector<int> seen(static_cast<std::size_t>(features.rows()), 0);
  for (const auto* split : {&train_rows, &calib_rows, &test_rows}) {
    for (const int r : *split) {
      if (r < 0 || r >= features.rows()) {
        throw ContractError("split row index out of range");
      }
      if (seen[static_cast<std::size_t>(r)]++) {
        throw ContractError("splits must be disjoint");
      }
    }
  }
  if (std::count(seen.begin(), seen.end(), 1) !=
      static_cast<long>(features.rows())) {
    throw ContractError("splits must cover every row");
  }
}

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::SoftmaxRegression:
      return "softmax_regression";
    case ModelKind::Mlp:
      return "mlp";
  }
  throw ContractError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "softmax_regression") return ModelKind::SoftmaxRegression;
  if (name == "mlp") return ModelKind::Mlp;
  throw ContractError("unknown model kind '" + name + "'");
}

void DeskModel::validate() const {
  if (n < 1 || m < 2) throw ContractError("model needs n >= 1 and m >= 2");
  if (input_mean.size() != n || input_scale.size() != n) {
    throw ContractError("model standardizer must have length n");
  }
  if (!input_mean.allFinite() || !(input_scale.array() > 0.0).all()) {
    throw ContractError("model standardizer scale must be positive");
  }
  if (kind == ModelKind::SoftmaxRegression) {
    if (w1.rows() != m || w1.cols() != n || b1.size() != m) {
      throw ContractError("softmax regression weights must be m x n");
    }
  } else {
    const auto h = w1.rows();
    if (h < 1 || w1.cols() != n || b1.size() != h || w2.rows() != m ||
        w2.cols() != h || b2.size() != m) {
      throw ContractError("mlp layer dimensions are inconsistent");
    }
  }
  if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() ||
      !b2.allFinite()) {
    throw ContractError("model weights must be finite");
  }
}

SyntheticSpec SyntheticSpec::origin_attractor(int m, int n,
                                              int samples_per_class,
                                              double cluster_scale,
                                              double separation,
                                              std::uint64_t seed) {
  if (m < 2) throw ContractError("origin attractor needs m >= 2");
  if (n < m - 1) throw ContractError("origin attractor needs n >= m - 1");
  if (!(separation > 0.0)) throw ContractError("separation must be positive");
  SyntheticSpec spec;
  spec.m = m;
  spec.n = n;
  spec.samples_per_class = samples_per_class;
  spec.cluster_scale = cluster_scale;
  spec.seed = seed;
  spec.cluster_means = Eigen::MatrixXd::Zero(m, n);
  const int block = n / (m - 1);
  for (int c = 1; c < m; ++c) {
    const double value =
        separation * cluster_scale / std::sqrt(static_cast<double>(block));
    for (int i = (c - 1) * block; i < c * block; ++i) {
      spec.cluster_means(c, i) = value;
    }
  }
  return spec;
}

void SyntheticSpec::validate() const {
  if (m < 2 || n < 1 || samples_per_class < 1) {
    throw ContractError("synthetic spec needs m >= 2, n >= 1, samples >= 1");
  }
  if (!(cluster_scale > 0.0) || !std::isfinite(cluster_scale)) {
    throw ContractError("cluster scale must be finite and positive");
  }
  if (cluster_means.rows() != m || cluster_means.cols() != n ||
      !cluster_means.allFinite()) {
    throw ContractError("cluster means must be a finite m x n matrix");
  }
  if (cluster_means.row(0).cwiseAbs().maxCoeff() != 0.0) {
    throw ContractError("class 0 cluster mean must be the origin");
  }
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      if ((cluster_means.row(a) - cluster_means.row(b)).norm() == 0.0) {
        throw ContractError("cluster means must be distinct");
      }
    }
  }
}

LabeledDataset gen_synthetic_clusters(const SyntheticSpec& spec) {
  spec.validate();
  const int total = spec.m * spec.samples_per_class;
  LabeledDataset data;
  data.m = spec.m;
  data.features.resize(total, spec.n);
  data.labels.resize(static_cast<std::size_t>(total));

  Rng data_rng(derive_seed(spec.seed, kTagSyntheticData));
  int row = 0;
  for (int c = 0; c < spec.m; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (int i = 0; i < spec.n; ++i) {
        data.features(row, i) =
            spec.cluster_means(c, i) + spec.cluster_scale * gaussian(data_rng);
      }
      data.labels[static_cast<std::size_t>(row)] = c;
    }
  }

  Rng split_rng(derive_seed(spec.seed, kTagSyntheticSplit));
  assign_splits(total, split_rng, data.train_rows, data.calib_rows,
                data.test_rows);
  data.feature_means = rows_mean(data.features, data.train_rows);
  data.validate();
  return data;
}

LabeledDataset load_csv_dataset(const std::string& path,
                                const CsvSchema& schema, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open dataset file '" + path + "'");
  if (schema.label_column.empty()) {
    throw IngestError("schema must name a label column");
  }

  const auto split_line = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };

  std::string line;
  if (!std::getline(in, line)) throw IngestError("dataset file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);
  int label_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == schema.label_column) {
      label_col = static_cast<int>(i);
      break;
    }
  }
  if (label_col < 0) {
    throw IngestError("label column '" + schema.label_column +
                      "' not found in header");
  }
  const int n = static_cast<int>(header.size()) - 1;
  if (n < 1) throw IngestError("dataset needs at least one feature column");

  std::vector<std::vector<double>> feature_rows;
  std::vector<std::string> label_cells;
  int row_index = 0;  // 1-based data row in error messages
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_index;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw IngestError("row " + std::to_string(row_index) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    }
    std::vector<double> feats;
    feats.reserve(static_cast<std::size_t>(n));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<int>(c) == label_col) continue;
      const std::string& cell = cells[c];
      char* end = nullptr;
      const double value = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() ||
          !std::isfinite(value)) {
        throw IngestError("row " + std::to_string(row_index) + ", column '" +
                          header[c] + "': non-numeric value '" + cell + "'");
      }
      feats.push_back(value);
    }
    feature_rows.push_back(std::move(feats));
    label_cells.push_back(cells[static_cast<std::size_t>(label_col)]);
  }
  if (feature_rows.empty()) throw IngestError("dataset has no data rows");

  std::vector<std::string> classes = schema.class_values;
  if (classes.empty()) {
    classes = label_cells;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  }
  if (classes.size() < 2) {
    throw IngestError("dataset needs at least two classes");
  }

  LabeledDataset data;
  data.m = static_cast<int>(classes.size());
  const auto total = static_cast<Eigen::Index>(feature_rows.size());
  data.features.resize(total, n);
  data.labels.resize(feature_rows.size());
  for (Eigen::Index r = 0; r < total; ++r) {
    for (int c = 0; c < n; ++c) {
      data.features(r, c) = feature_rows[static_cast<std::size_t>(r)]
                                        [static_cast<std::size_t>(c)];
    }
    const std::string& cell = label_cells[static_cast<std::size_t>(r)];
    const auto it = std::find(classes.begin(), classes.end(), cell);
    if (it == classes.end()) {
      throw IngestError("row " + std::to_string(r + 1) + ", column '" +
                        schema.label_column + "': unknown class '" + cell +
                        "'");
    }
    data.labels[static_cast<std::size_t>(r)] =
        static_cast<int>(it - classes.begin());
  }

  Rng split_rng(derive_seed(seed, kTagCsvSplit));
  assign_splits(static_cast<int>(total), split_rng, data.train_rows,
                data.calib_rows, data.test_rows);

  // Standardize with train-split statistics; afterwards a zero feature value
  // sits at the training mean, which is what ZeroImpute should hit for
  // arbitrarily scaled tabular data.
  Eigen::VectorXd mean, scale;
  standardizer_from_rows(data.features, data.train_rows, mean, scale);
  data.features =
      (data.features.rowwise() - mean.transpose()).array().rowwise() /
      scale.transpose().array();
  data.feature_means = rows_mean(data.features, data.train_rows);
  data.validate();
  return data;
}

DeskModel train_model(const LabeledDataset& data, ModelKind kind,
                      const TrainConfig& config) {
  return train_impl(data, kind, config, nullptr, 0.0);
}

DeskModel retrain_on_ablations(const LabeledDataset& data, ModelKind kind,
                               const TrainConfig& config,
                               const AblationPolicy& policy,
                               double mask_prob) {
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) {
    throw ContractError("mask probability must lie in [0, 1]");
  }
  policy.validate(data.n());
  return train_impl(data, kind, config, &policy, mask_prob);
}

LogitVector model_logits(const DeskModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.n) {
    throw ContractError("model expects " + std::to_string(model.n) +
                        " features, got " + std::to_string(x.size()));
  }
  if (!x.allFinite()) throw ContractError("model input must be finite");
  const Eigen::VectorXd xs =
      ((x - model.input_mean).array() / model.input_scale.array()).matrix();
  if (model.kind == ModelKind::SoftmaxRegression) {
    return model.w1 * xs + model.b1;
  }
  const Eigen::VectorXd hidden = (model.w1 * xs + model.b1).cwiseMax(0.0);
  return model.w2 * hidden + model.b2;
}

int model_predict(const DeskModel& model, const Eigen::VectorXd& x) {
  return predict_class(model_logits(model, x));
}

double split_accuracy(const DeskModel& model, const LabeledDataset& data,
                      const std::vector<int>& rows) {
  if (rows.empty()) throw ContractError("accuracy needs a non-empty split");
  int hits = 0;
  for (const int r : rows) {
    hits += model_predict(model, data.features.row(r)) ==
            data.labels[static_cast<std::size_t>(r)];
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

}  // namespace mcal
