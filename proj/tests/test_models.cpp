#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "mcal/models.hpp"

using namespace mcal;

namespace {

SyntheticSpec default_spec(std::uint64_t seed = 42) {
  return SyntheticSpec::origin_attractor(3, 16, 100, 1.0, 8.0, seed);
}

// Classic perceptron: returns true iff it finds a separating hyperplane,
// certifying linear separability independently of the trained model.
bool perceptron_separable(const LabeledDataset& data,
                          const std::vector<int>& rows, int max_passes) {
  const auto n = data.n();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n + 1);
  for (int pass = 0; pass < max_passes; ++pass) {
    int mistakes = 0;
    for (const int r : rows) {
      Eigen::VectorXd x(n + 1);
      x.head(n) = data.features.row(r);
      x[n] = 1.0;
      const double y = data.labels[static_cast<std::size_t>(r)] == 1 ? 1.0 : -1.0;
      if (y * w.dot(x) <= 0.0) {
        w += y * x;
        ++mistakes;
      }
    }
    if (mistakes == 0) return true;
  }
  return false;
}

std::string write_temp_csv(const std::string& body) {
  const std::string path = "test_models_tmp.csv";
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("synthetic generation counts and splits") {
  const LabeledDataset data = gen_synthetic_clusters(default_spec());
  CHECK(data.rows() == 300);
  CHECK(data.n() == 16);
  CHECK(data.m == 3);
  std::vector<int> per_class(3, 0);
  for (const int y : data.labels) per_class[static_cast<std::size_t>(y)]++;
  for (const int c : per_class) CHECK(c == 100);
  CHECK(data.train_rows.size() == 210);
  CHECK(data.calib_rows.size() == 45);
  CHECK(data.test_rows.size() == 45);
  data.validate();  // disjoint + covering

  // feature_means must be the train-split means.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(16);
  for (const int r : data.train_rows) mean += data.features.row(r).transpose();
  mean /= static_cast<double>(data.train_rows.size());
  CHECK((mean - data.feature_means).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("synthetic generation is deterministic") {
  const LabeledDataset a = gen_synthetic_clusters(default_spec());
  const LabeledDataset b = gen_synthetic_clusters(default_spec());
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.labels == b.labels);
  CHECK(a.train_rows == b.train_rows);
  const LabeledDataset c = gen_synthetic_clusters(default_spec(43));
  CHECK((a.features - c.features).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("origin attractor geometry") {
  const SyntheticSpec spec = default_spec();
  spec.validate();
  CHECK(spec.cluster_means.row(0).cwiseAbs().maxCoeff() == 0.0);
  for (int c = 1; c < 3; ++c) {
    CHECK(spec.cluster_means.row(c).norm() == doctest::Approx(8.0));
  }
  // Non-origin classes occupy disjoint blocks.
  CHECK(spec.cluster_means.row(1).tail(8).cwiseAbs().maxCoeff() == 0.0);
  CHECK(spec.cluster_means.row(2).head(8).cwiseAbs().maxCoeff() == 0.0);

  SyntheticSpec bad = spec;
  bad.cluster_means(0, 3) = 1.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = spec;
  bad.cluster_means.row(2) = bad.cluster_means.row(1);
  CHECK_THROWS_AS(bad.validate(), ContractError);
  CHECK_THROWS_AS(SyntheticSpec::origin_attractor(4, 2, 10, 1.0, 8.0, 0),
                  ContractError);
}

TEST_CASE("softmax regression fits separable data") {
  const SyntheticSpec spec =
      SyntheticSpec::origin_attractor(2, 4, 150, 1.0, 10.0, 7);
  const LabeledDataset data = gen_synthetic_clusters(spec);
  REQUIRE(perceptron_separable(data, data.train_rows, 200));

  TrainConfig cfg;
  cfg.seed = 1;
  const DeskModel model =
      train_model(data, ModelKind::SoftmaxRegression, cfg);
  CHECK(split_accuracy(model, data, data.train_rows) >= 0.99);
  CHECK(split_accuracy(model, data, data.test_rows) >= 0.95);
}

TEST_CASE("mlp training reaches high accuracy on clusters") {
  const LabeledDataset data = gen_synthetic_clusters(default_spec());
  TrainConfig cfg;
  cfg.seed = 3;
  const DeskModel model = train_model(data, ModelKind::Mlp, cfg);
  CHECK(model.hidden_width() == 32);
  CHECK(split_accuracy(model, data, data.test_rows) >= 0.9);
}

TEST_CASE("training is deterministic and validates config") {
  const LabeledDataset data = gen_synthetic_clusters(default_spec());
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.steps = 120;
  const DeskModel a = train_model(data, ModelKind::Mlp, cfg);
  const DeskModel b = train_model(data, ModelKind::Mlp, cfg);
  CHECK((a.w1 - b.w1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.w2 - b.w2).cwiseAbs().maxCoeff() == 0.0);

  TrainConfig bad = cfg;
  bad.hidden_width = 0;
  CHECK_THROWS_AS(train_model(data, ModelKind::Mlp, bad), ContractError);
  bad = cfg;
  bad.learning_rate = -1.0;
  CHECK_THROWS_AS(train_model(data, ModelKind::SoftmaxRegression, bad),
                  ContractError);

  LabeledDataset no_train = data;
  no_train.test_rows.insert(no_train.test_rows.end(),
                            no_train.train_rows.begin(),
                            no_train.train_rows.end());
  std::sort(no_train.test_rows.begin(), no_train.test_rows.end());
  no_train.train_rows.clear();
  CHECK_THROWS_AS(train_model(no_train, ModelKind::SoftmaxRegression, cfg),
                  ContractError);
}

TEST_CASE("model_logits matches hand computation") {
  DeskModel model;
  model.kind = ModelKind::SoftmaxRegression;
  model.n = 2;
  model.m = 2;
  model.input_mean.resize(2);
  model.input_mean << 1.0, 1.0;
  model.input_scale.resize(2);
  model.input_scale << 2.0, 2.0;
  model.w1.resize(2, 2);
  model.w1 << 1.0, 2.0, 3.0, 4.0;
  model.b1.resize(2);
  model.b1 << 0.5, -0.5;

  Eigen::VectorXd x(2);
  x << 3.0, 5.0;  // standardized: (1, 2)
  const LogitVector z = model_logits(model, x);
  CHECK(z[0] == doctest::Approx(1.0 * 1 + 2.0 * 2 + 0.5).epsilon(1e-12));
  CHECK(z[1] == doctest::Approx(3.0 * 1 + 4.0 * 2 - 0.5).epsilon(1e-12));

  // Zero weights -> zero logits regardless of input.
  model.w1.setZero();
  model.b1.setZero();
  CHECK(model_logits(model, x).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(model_logits(model, Eigen::VectorXd::Zero(3)),
                  ContractError);
}

TEST_CASE("model_logits matches a hand-rolled forward pass") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    DeskModel model;
    model.kind = ModelKind::SoftmaxRegression;
    model.n = 3;
    model.m = 3;
    model.input_mean.resize(3);
    model.input_scale.resize(3);
    model.w1.resize(3, 3);
    model.b1.resize(3);
    for (int i = 0; i < 3; ++i) {
      model.input_mean[i] = gaussian(rng);
      model.input_scale[i] = 0.5 + std::abs(gaussian(rng));
      model.b1[i] = gaussian(rng);
      for (int j = 0; j < 3; ++j) model.w1(i, j) = gaussian(rng);
    }
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x[i] = gaussian(rng);

    const LogitVector z = model_logits(model, x);
    for (int i = 0; i < 3; ++i) {
      double acc = model.b1[i];
      for (int j = 0; j < 3; ++j) {
        acc += model.w1(i, j) * (x[j] - model.input_mean[j]) /
               model.input_scale[j];
      }
      CHECK(z[i] == doctest::Approx(acc).epsilon(1e-9));
    }
    // Purity: repeated evaluation is bit-identical.
    CHECK((model_logits(model, x) - z).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("fully ablated input lands on class 0") {
  const LabeledDataset data = gen_synthetic_clusters(default_spec());
  TrainConfig cfg;
  cfg.seed = 2;
  const DeskModel model =
      train_model(data, ModelKind::SoftmaxRegression, cfg);
  CHECK(model_predict(model, Eigen::VectorXd::Zero(16)) == 0);
}

TEST_CASE("ablation at rate 0.75 skews predictions toward class 0") {
  const LabeledDataset data = gen_synthetic_clusters(default_spec());
  TrainConfig cfg;
  cfg.seed = 4;
  const DeskModel model =
      train_model(data, ModelKind::SoftmaxRegression, cfg);

  int clean_zero = 0, ablated_zero = 0, total = 0;
  Rng rng(99);
  AblationPolicy zero;
  for (const int r : data.test_rows) {
    const Eigen::VectorXd x = data.features.row(r);
    clean_zero += model_predict(model, x) == 0;
    for (int a = 0; a < 8; ++a) {
      const FeatureMask mask = sample_mask_fixed(16, 12, rng);
      ablated_zero += model_predict(model, apply_ablation(x, mask, zero)) == 0;
      ++total;
    }
  }
  const double clean_freq =
      static_cast<double>(clean_zero) / static_cast<double>(data.test_rows.size());
  const double ablated_freq =
      static_cast<double>(ablated_zero) / static_cast<double>(total);
  CHECK(ablated_freq - clean_freq >= 0.2);
}

TEST_CASE("retrain with zero mask probability equals plain training") {
  const LabeledDataset data = gen_synthetic_clusters(default_spec());
  TrainConfig cfg;
  cfg.seed = 6;
  cfg.steps = 100;
  const DeskModel plain = train_model(data, ModelKind::SoftmaxRegression, cfg);
  const DeskModel retrained = retrain_on_ablations(
      data, ModelKind::SoftmaxRegression, cfg, AblationPolicy{}, 0.0);
  CHECK((plain.w1 - retrained.w1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((plain.b1 - retrained.b1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("retraining on ablations is deterministic and robustifies") {
  const LabeledDataset data = gen_synthetic_clusters(default_spec());
  TrainConfig cfg;
  cfg.seed = 7;
  const DeskModel a = retrain_on_ablations(data, ModelKind::SoftmaxRegression,
                                           cfg, AblationPolicy{}, 0.5);
  const DeskModel b = retrain_on_ablations(data, ModelKind::SoftmaxRegression,
                                           cfg, AblationPolicy{}, 0.5);
  CHECK((a.w1 - b.w1).cwiseAbs().maxCoeff() == 0.0);

  // The retrained model should classify half-ablated inputs better than the
  // plain model does.
  const DeskModel plain = train_model(data, ModelKind::SoftmaxRegression, cfg);
  Rng rng(1234);
  int plain_hits = 0, retrained_hits = 0, total = 0;
  for (const int r : data.test_rows) {
    const Eigen::VectorXd x = data.features.row(r);
    for (int t = 0; t < 8; ++t) {
      const FeatureMask mask = sample_mask_fixed(16, 8, rng);
      const Eigen::VectorXd xa = apply_ablation(x, mask, AblationPolicy{});
      plain_hits += model_predict(plain, xa) ==
                    data.labels[static_cast<std::size_t>(r)];
      retrained_hits += model_predict(a, xa) ==
                        data.labels[static_cast<std::size_t>(r)];
      ++total;
    }
  }
  CHECK(retrained_hits > plain_hits);
}

TEST_CASE("csv loading parses, maps labels, and standardizes") {
  const std::string path = write_temp_csv(
      "x1,x2,diagnosis\n"
      "1.0,10.0,B\n"
      "2.0,20.0,M\n"
      "3.0,30.0,B\n"
      "4.0,40.0,M\n");
  const LabeledDataset data = load_csv_dataset(path, {"diagnosis", {"B", "M"}},
                                               5);
  CHECK(data.rows() == 4);
  CHECK(data.n() == 2);
  CHECK(data.m == 2);
  // Standardized with train-split stats: train mean is (numerically) zero.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
  for (const int r : data.train_rows) mean += data.features.row(r).transpose();
  mean /= static_cast<double>(data.train_rows.size());
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(data.feature_means.cwiseAbs().maxCoeff() < 1e-12);

  const LabeledDataset again =
      load_csv_dataset(path, {"diagnosis", {"B", "M"}}, 5);
  CHECK(again.train_rows == data.train_rows);
  CHECK((again.features - data.features).cwiseAbs().maxCoeff() == 0.0);

  // Without an explicit mapping, classes come sorted from the file.
  const LabeledDataset inferred = load_csv_dataset(path, {"diagnosis", {}}, 5);
  CHECK(inferred.m == 2);
  CHECK(inferred.labels == data.labels);
  std::remove(path.c_str());
}

TEST_CASE("csv loading reports precise errors") {
  CHECK_THROWS_AS(load_csv_dataset("does_not_exist.csv", {"y", {}}, 0),
                  IngestError);

  const std::string path = write_temp_csv(
      "x1,x2,y\n"
      "1.0,1.0,a\n"
      "2.0,2.0,b\n"
      "3.0,oops,a\n"
      "4.0,4.0,b\n");
  try {
    load_csv_dataset(path, {"y", {}}, 0);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("x2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_csv_dataset(path, {"missing", {}}, 0), IngestError);
  CHECK_THROWS_AS(load_csv_dataset(path, {"y", {"a", "z"}}, 0), IngestError);
  std::remove(path.c_str());

  const std::string ragged = write_temp_csv(
      "x1,x2,y\n"
      "1.0,1.0,a\n"
      "2.0,b\n");
  try {
    load_csv_dataset(ragged, {"y", {}}, 0);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  std::remove(ragged.c_str());
}
