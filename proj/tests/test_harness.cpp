#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "mcal/harness.hpp"

using namespace mcal;
namespace fs = std::filesystem;

namespace {

// Small enough to keep every runner under a second, still large enough for
// non-degenerate splits (120 rows -> 84/18/18).
ExperimentConfig tiny_config(std::uint64_t seed = 5) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.dataset.samples_per_class = 40;
  cfg.model.steps = 150;
  cfg.ablation.grid_denominator = 4;
  cfg.ablation.ablations_per_input = 2;
  cfg.fit.steps = 200;
  cfg.explainer.num_samples = 40;
  cfg.evaluation.explain_sample_count = 3;
  cfg.evaluation.sweep_sizes = {8, 36};
  return cfg;
}

std::string fresh_dir(const std::string& name) {
  const std::string dir = "harness_tmp_" + name;
  fs::remove_all(dir);
  return dir;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.rows() == 0 || (a - b).cwiseAbs().maxCoeff() == 0.0);
}

bool same_vector(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         (a.size() == 0 || (a - b).cwiseAbs().maxCoeff() == 0.0);
}

}  // namespace

TEST_CASE("config serializes, hashes and reparses") {
  const ExperimentConfig cfg = tiny_config();
  const ExperimentConfig back = config_from_json(config_to_json(cfg));
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(config_hash(cfg) == config_hash(cfg));

  ExperimentConfig other = cfg;
  other.seed = 6;
  CHECK(config_hash(other) != config_hash(cfg));

  // Defaults pass validation as-is.
  default_synthetic_config().validate();
}

TEST_CASE("config parser rejects typos and bad types") {
  nlohmann::json j = config_to_json(tiny_config());
  j["ablation"]["griddenominator"] = 4;
  CHECK_THROWS_WITH_AS(config_from_json(j),
                       doctest::Contains("griddenominator"), ConfigError);

  j = config_to_json(tiny_config());
  j["model"]["steps"] = "many";
  CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("model.steps"),
                       ConfigError);

  j = config_to_json(tiny_config());
  j["seed"] = -4;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);

  j = config_to_json(tiny_config());
  j["baselines"] = {"base", "base"};
  CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("duplicate"),
                       ConfigError);

  j = config_to_json(tiny_config());
  j["baselines"] = {"nope"};
  CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("nope"),
                       ConfigError);

  j = config_to_json(tiny_config());
  j["evaluation"]["sweep_sizes"] = {10, 10};
  CHECK_THROWS_WITH_AS(config_from_json(j),
                       doctest::Contains("strictly increasing"), ConfigError);

  j = config_to_json(tiny_config());
  j["dataset"]["features"] = 15;  // not divisible by classes - 1
  CHECK_THROWS_AS(config_from_json(j), ConfigError);

  CHECK_THROWS_AS(load_config("no_such_config.json"), ConfigError);
}

TEST_CASE("model json round-trips exactly") {
  const ExperimentConfig cfg = tiny_config();
  const LabeledDataset data = resolve_dataset(cfg);

  for (const char* kind : {"softmax_regression", "mlp"}) {
    ExperimentConfig c = cfg;
    c.model.kind = kind;
    c.model.hidden_width = 8;
    const DeskModel model =
        train_model(data, resolve_model_kind(kind), resolve_train_config(c));

    const std::string dir = fresh_dir(std::string("model_") + kind);
    fs::create_directories(dir);
    const std::string path = dir + "/model.json";
    save_model_json(path, model, nlohmann::json::object());
    const DeskModel back = load_model_json(path);

    CHECK(back.kind == model.kind);
    CHECK(back.n == model.n);
    CHECK(back.m == model.m);
    CHECK(same_vector(back.input_mean, model.input_mean));
    CHECK(same_vector(back.input_scale, model.input_scale));
    CHECK(same_matrix(back.w1, model.w1));
    CHECK(same_vector(back.b1, model.b1));
    if (model.kind == ModelKind::Mlp) {
      CHECK(same_matrix(back.w2, model.w2));
      CHECK(same_vector(back.b2, model.b2));
    }
  }

  CHECK_THROWS_AS(load_model_json("no_such_model.json"), ConfigError);
}

TEST_CASE("calibrator json round-trips every parametrization exactly") {
  const std::string dir = fresh_dir("calibrator");
  fs::create_directories(dir);

  CalibratorParams dense = CalibratorParams::identity(Parametrization::Dense, 3);
  dense.weight << 0.1, -1.0 / 3.0, 2.0, 0.7, 1e-9, -4.25, 3.0, 0.0, 1.0 / 7.0;
  dense.bias << 1.0 / 3.0, -2.0 / 7.0, 0.1;

  CalibratorParams diag =
      CalibratorParams::identity(Parametrization::Diagonal, 2);
  diag.scale << 0.123456789123456789, 42.0;
  diag.bias << -1e-12, 9.75;

  CalibratorParams temp =
      CalibratorParams::identity(Parametrization::Temperature, 4);
  temp.inv_temperature = 0.77777777777777779;

  int idx = 0;
  for (const CalibratorParams& p : {dense, diag, temp}) {
    const std::string path = dir + "/cal" + std::to_string(idx++) + ".json";
    save_calibrator_json(path, p, nlohmann::json::object(), 0.25);
    const CalibratorParams back = load_calibrator_json(path);
    CHECK(back.parametrization == p.parametrization);
    CHECK(back.m == p.m);
    CHECK(same_matrix(back.dense_weight(), p.dense_weight()));
    CHECK(same_vector(back.bias, p.bias));
    CHECK(back.inv_temperature == p.inv_temperature);
  }

  // A wrong kind is refused with the field named.
  const std::string wrong = dir + "/wrong.json";
  std::ofstream(wrong) << "{\"kind\":\"model\"}";
  CHECK_THROWS_WITH_AS(load_calibrator_json(wrong), doctest::Contains("kind"),
                       ConfigError);
}

TEST_CASE("ensemble json round-trips exactly") {
  const std::string dir = fresh_dir("ensemble");
  fs::create_directories(dir);

  CalibratorEnsemble ens;
  ens.m = 2;
  CalibratorParams a = CalibratorParams::identity(Parametrization::Dense, 2);
  a.weight << 1.5, -0.25, 1.0 / 3.0, 0.9;
  a.bias << 0.01, -0.02;
  CalibratorParams b = CalibratorParams::identity(Parametrization::Dense, 2);
  b.weight << 2.0, 0.0, 0.1, 7.0;
  b.bias << -1.0, 1.0;
  ens.entries.push_back({0.0, a, 0.123});
  ens.entries.push_back({0.5, b, 0.456});
  CalibratorParams unc =
      CalibratorParams::identity(Parametrization::Temperature, 2);
  unc.inv_temperature = 3.25;
  ens.unconditioned = unc;

  const std::string path = dir + "/ens.json";
  save_ensemble_json(path, ens, nlohmann::json::object());
  const CalibratorEnsemble back = load_ensemble_json(path);

  REQUIRE(back.entries.size() == 2);
  CHECK(back.m == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.entries[i].rate == ens.entries[i].rate);
    CHECK(back.entries[i].final_loss == ens.entries[i].final_loss);
    CHECK(same_matrix(back.entries[i].params.weight,
                      ens.entries[i].params.weight));
    CHECK(same_vector(back.entries[i].params.bias, ens.entries[i].params.bias));
  }
  REQUIRE(back.unconditioned.has_value());
  CHECK(back.unconditioned->inv_temperature == 3.25);

  // Attach picks the right slot from the file's kind field.
  PredictablePipeline pipe;
  attach_calibrator_file(pipe, path);
  CHECK(pipe.ensemble.has_value());
  CHECK_FALSE(pipe.calibrator.has_value());
}

TEST_CASE("benchmark runner composes the library and reruns byte-identically") {
  ExperimentConfig cfg = tiny_config();
  cfg.baselines = {"base", "mcal_unconditioned"};

  const std::string dir_a = fresh_dir("bench_a");
  const BenchmarkResult result = run_benchmark(cfg, dir_a);

  REQUIRE(result.methods.size() == 2);
  CHECK(result.methods[0].name == "base");
  CHECK(result.methods[1].name == "mcal_unconditioned");
  REQUIRE(result.methods[0].report.per_rate.size() == 4);

  // Rate 0 row: no ablation, so zero bias and exact boundary faithfulness.
  const LabeledDataset data = resolve_dataset(cfg);
  const DeskModel model = train_model(
      data, resolve_model_kind(cfg.model.kind), resolve_train_config(cfg));
  const MethodEvaluation& base = result.methods[0];
  CHECK(base.report.per_rate[0].bias_nats == 0.0);
  CHECK(base.report.per_rate[0].accuracy ==
        split_accuracy(model, data, data.test_rows));
  CHECK(base.mean_sufficiency[0] == 0.0);
  CHECK(base.mean_sensitivity[0] == 0.0);

  const std::string dir_b = fresh_dir("bench_b");
  run_benchmark(cfg, dir_b);
  CHECK(read_all(dir_a + "/report.csv") == read_all(dir_b + "/report.csv"));
  CHECK(read_all(dir_a + "/report.csv").rfind(
            "method,rate,bias_nats,accuracy,mean_sufficiency,"
            "mean_sensitivity\n",
            0) == 0);
}

TEST_CASE("sweep's full-pool point matches the benchmark calibrator") {
  ExperimentConfig cfg = tiny_config();
  cfg.baselines = {"mcal_unconditioned"};

  const BenchmarkResult bench = run_benchmark(cfg, fresh_dir("sweep_bench"));
  const SweepResult sweep = run_training_sweep(cfg, fresh_dir("sweep_out"));

  REQUIRE(sweep.points.size() == 2);
  CHECK(sweep.points[0].num_pairs == 8);
  CHECK(sweep.points[1].num_pairs == 36);
  // Identical pairs, fit seed and evaluation seed: exact agreement.
  CHECK(sweep.points[1].mean_bias == bench.methods[0].report.mean_bias);
  CHECK(sweep.points[0].mean_bias >= 0.0);

  ExperimentConfig bad = cfg;
  bad.evaluation.sweep_sizes = {8, 37};  // pool only holds 18 * 2 = 36
  CHECK_THROWS_WITH_AS(run_training_sweep(bad, fresh_dir("sweep_bad")),
                       doctest::Contains("37"), ConfigError);
}

TEST_CASE("simplex demo at rate zero collapses to the clean stage") {
  ExperimentConfig cfg = tiny_config();
  cfg.evaluation.demo_rate = 0.0;
  const SimplexResult r = run_simplex_demo(cfg, fresh_dir("demo_zero"));
  CHECK(r.points == 18);
  CHECK(r.uncalibrated_accuracy == r.clean_accuracy);
  CHECK(r.calibrated_accuracy == r.clean_accuracy);
}

TEST_CASE("simplex demo writes one cloud row per stage per point") {
  ExperimentConfig cfg = tiny_config();
  const std::string dir = fresh_dir("demo");
  const SimplexResult r = run_simplex_demo(cfg, dir);
  CHECK(r.rate == 0.75);
  CHECK(r.clean_accuracy >= 0.0);
  CHECK(r.calibrated_accuracy <= 1.0);

  const std::string csv = read_all(dir + "/simplex.csv");
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 1 + 3 * r.points);

  run_simplex_demo(cfg, fresh_dir("demo_again"));
  CHECK(read_all("harness_tmp_demo_again/simplex.csv") == csv);

  ExperimentConfig two_class = cfg;
  two_class.dataset.classes = 2;
  CHECK_THROWS_WITH_AS(run_simplex_demo(two_class, fresh_dir("demo_bad")),
                       doctest::Contains("three-class"), ConfigError);
}

TEST_CASE("gen-data output reloads as a csv dataset") {
  ExperimentConfig cfg = tiny_config();
  const std::string dir = fresh_dir("gendata");
  run_gen_data(cfg, dir);

  const LabeledDataset raw = resolve_dataset(cfg);
  ExperimentConfig from_csv = cfg;
  from_csv.dataset.type = "csv";
  from_csv.dataset.path = dir + "/dataset.csv";
  const LabeledDataset loaded = resolve_dataset(from_csv);

  CHECK(loaded.rows() == raw.rows());
  CHECK(loaded.m == raw.m);
  CHECK(loaded.n() == raw.n());
  CHECK(loaded.labels == raw.labels);  // file preserves row order

  // The csv loader standardizes with train-split statistics.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(loaded.n());
  for (const int r : loaded.train_rows) {
    mean += loaded.features.row(r).transpose();
  }
  mean /= static_cast<double>(loaded.train_rows.size());
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-9);

  ExperimentConfig csv_cfg = from_csv;
  CHECK_THROWS_WITH_AS(run_gen_data(csv_cfg, fresh_dir("gendata_bad")),
                       doctest::Contains("synthetic"), ConfigError);
}

TEST_CASE("trained model file feeds evaluate without retraining") {
  ExperimentConfig cfg = tiny_config();
  const std::string model_dir = fresh_dir("trainmodel");
  run_train_model(cfg, model_dir);

  const std::string dir_a = fresh_dir("eval_inproc");
  const BiasReport in_process = run_evaluate(cfg, dir_a);

  ExperimentConfig with_file = cfg;
  with_file.evaluation.model_path = model_dir + "/model.json";
  const std::string dir_b = fresh_dir("eval_file");
  const BiasReport from_file = run_evaluate(with_file, dir_b);

  CHECK(from_file.mean_bias == in_process.mean_bias);
  CHECK(read_all(dir_a + "/eval.csv") == read_all(dir_b + "/eval.csv"));
}

TEST_CASE("fit-calibrator artifacts drive evaluate and explain") {
  ExperimentConfig cfg = tiny_config();

  // Unconditioned single calibrator.
  ExperimentConfig single = cfg;
  single.fit.conditioned = false;
  const std::string cal_dir = fresh_dir("fitcal_single");
  run_fit_calibrator(single, cal_dir);
  const CalibratorParams cal = load_calibrator_json(cal_dir + "/calibrator.json");
  CHECK(cal.m == 3);

  // Conditioned ensemble over the 4-point grid.
  const std::string ens_dir = fresh_dir("fitcal_ens");
  run_fit_calibrator(cfg, ens_dir);
  const CalibratorEnsemble ens = load_ensemble_json(ens_dir + "/calibrator.json");
  CHECK(ens.entries.size() == 4);
  CHECK(ens.unconditioned.has_value());

  ExperimentConfig eval_cfg = cfg;
  eval_cfg.evaluation.calibrator_path = ens_dir + "/calibrator.json";
  const BiasReport report = run_evaluate(eval_cfg, fresh_dir("eval_cal"));
  CHECK(std::isfinite(report.mean_bias));
  CHECK(report.per_rate.size() == 4);

  const std::string exp_dir = fresh_dir("explain_out");
  run_explain(eval_cfg, exp_dir);
  const std::string csv = read_all(exp_dir + "/attributions.csv");
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 1 + 3 * 16);  // 3 inputs, 16 features, long format
}

TEST_CASE("runners refuse an unusable output directory") {
  const std::string blocker = "harness_tmp_blocker";
  fs::remove_all(blocker);
  std::ofstream(blocker) << "x";
  CHECK_THROWS_AS(run_gen_data(tiny_config(), blocker + "/sub"), ConfigError);
  fs::remove(blocker);
}
