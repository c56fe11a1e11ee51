#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "mcal/ablation.hpp"
#include "mcal/explain.hpp"
#include "mcal/fit.hpp"
#include "mcal/harness.hpp"
#include "mcal/metrics.hpp"
#include "mcal/models.hpp"
#include "mcal/rng.hpp"

namespace py = pybind11;
using namespace mcal;

namespace {

nlohmann::json parse_metadata(const std::string& text) {
  return text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
}

}  // namespace

PYBIND11_MODULE(_mcal, m) {
  m.doc() =
      "Post-hoc affine logit calibration for missingness bias: calibrator "
      "fitting, bias metrics, ablation tooling, explainers, and the "
      "experiment harness.";

  // ---- errors ---------------------------------------------------------
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<OptimizationError>(m, "OptimizationError",
                                            PyExc_RuntimeError);
  py::register_exception<IngestError>(m, "IngestError", PyExc_RuntimeError);
  py::register_exception<CapacityError>(m, "CapacityError",
                                        PyExc_RuntimeError);
  py::register_exception<ExplainerError>(m, "ExplainerError",
                                         PyExc_RuntimeError);

  // ---- rng ------------------------------------------------------------
  py::class_<Rng>(m, "Rng", "Deterministic 64-bit generator (mt19937_64).")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("__call__", [](Rng& rng) { return rng(); });
  m.def("splitmix64", &splitmix64, py::arg("x"));
  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("tag"),
        "Independent sub-stream seed for a (seed, role tag) pair.");

  // ---- core -----------------------------------------------------------
  py::enum_<Parametrization>(m, "Parametrization")
      .value("Dense", Parametrization::Dense)
      .value("Diagonal", Parametrization::Diagonal)
      .value("Temperature", Parametrization::Temperature);

  py::class_<CalibratorParams>(m, "CalibratorParams",
                               "Affine logit calibrator R(z) = Wz + b.")
      .def(py::init<>())
      .def_readwrite("parametrization", &CalibratorParams::parametrization)
      .def_readwrite("m", &CalibratorParams::m)
      .def_readwrite("weight", &CalibratorParams::weight)
      .def_readwrite("scale", &CalibratorParams::scale)
      .def_readwrite("inv_temperature", &CalibratorParams::inv_temperature)
      .def_readwrite("bias", &CalibratorParams::bias)
      .def_static("identity", &CalibratorParams::identity, py::arg("kind"),
                  py::arg("m"))
      .def("dense_weight", &CalibratorParams::dense_weight)
      .def("free_parameter_count", &CalibratorParams::free_parameter_count)
      .def("validate", &CalibratorParams::validate);

  m.def("log_sum_exp", &log_sum_exp, py::arg("z"));
  m.def("softmax", &softmax, py::arg("z"));
  m.def("apply_calibrator", &apply_calibrator, py::arg("params"),
        py::arg("z"));
  m.def("predict_class", &predict_class, py::arg("z"));
  m.def("one_hot", &one_hot, py::arg("index"), py::arg("m"));
  m.def("cross_entropy", &cross_entropy, py::arg("calibrated"),
        py::arg("target"));
  m.def("kl_divergence", &kl_divergence, py::arg("p"), py::arg("q"),
        py::arg("eps") = 1e-9);

  // ---- fit ------------------------------------------------------------
  py::class_<PairedLogitSample>(m, "PairedLogitSample")
      .def(py::init([](const LogitVector& clean, const LogitVector& ablated,
                       double rate, std::optional<int> label) {
             PairedLogitSample s;
             s.clean_logits = clean;
             s.ablated_logits = ablated;
             s.ablation_rate = rate;
             s.clean_label = label;
             return s;
           }),
           py::arg("clean_logits"), py::arg("ablated_logits"),
           py::arg("ablation_rate") = 0.0,
           py::arg("clean_label") = std::nullopt)
      .def_readwrite("clean_logits", &PairedLogitSample::clean_logits)
      .def_readwrite("ablated_logits", &PairedLogitSample::ablated_logits)
      .def_readwrite("ablation_rate", &PairedLogitSample::ablation_rate)
      .def_readwrite("clean_label", &PairedLogitSample::clean_label);

  py::class_<FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &FitConfig::learning_rate)
      .def_readwrite("steps", &FitConfig::steps)
      .def_readwrite("adam_beta1", &FitConfig::adam_beta1)
      .def_readwrite("adam_beta2", &FitConfig::adam_beta2)
      .def_readwrite("adam_eps", &FitConfig::adam_eps)
      .def_readwrite("l2_lambda", &FitConfig::l2_lambda)
      .def_readwrite("parametrization", &FitConfig::parametrization)
      .def_readwrite("seed", &FitConfig::seed)
      .def_readwrite("init_jitter", &FitConfig::init_jitter);

  py::class_<FitResult>(m, "FitResult")
      .def_readwrite("params", &FitResult::params)
      .def_readwrite("loss_trace", &FitResult::loss_trace)
      .def_readwrite("final_loss", &FitResult::final_loss);

  m.def("fit_objective", &fit_objective, py::arg("params"), py::arg("pairs"),
        py::arg("l2_lambda") = 0.0);
  m.def("fit_gradient", &fit_gradient, py::arg("params"), py::arg("pairs"),
        py::arg("l2_lambda") = 0.0);
  m.def("pack_params", &pack_params, py::arg("params"));
  m.def("unpack_params", &unpack_params, py::arg("flat"), py::arg("kind"),
        py::arg("m"));
  m.def("fit_calibrator", &fit_calibrator, py::arg("pairs"),
        py::arg("config"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<RateBucket>(m, "RateBucket")
      .def(py::init<>())
      .def(py::init([](double rate, std::vector<PairedLogitSample> pairs) {
             return RateBucket{rate, std::move(pairs)};
           }),
           py::arg("rate"), py::arg("pairs"))
      .def_readwrite("rate", &RateBucket::rate)
      .def_readwrite("pairs", &RateBucket::pairs);

  py::class_<EnsembleEntry>(m, "EnsembleEntry")
      .def(py::init<>())
      .def_readwrite("rate", &EnsembleEntry::rate)
      .def_readwrite("params", &EnsembleEntry::params)
      .def_readwrite("final_loss", &EnsembleEntry::final_loss);

  py::class_<CalibratorEnsemble>(m, "CalibratorEnsemble")
      .def(py::init<>())
      .def_readwrite("m", &CalibratorEnsemble::m)
      .def_readwrite("entries", &CalibratorEnsemble::entries)
      .def_readwrite("unconditioned", &CalibratorEnsemble::unconditioned);

  m.def(
      "fit_ensemble",
      [](const std::vector<RateBucket>& buckets, const FitConfig& config,
         std::optional<std::vector<PairedLogitSample>> unconditioned) {
        py::gil_scoped_release release;
        return fit_ensemble(buckets, config,
                            unconditioned ? &*unconditioned : nullptr);
      },
      py::arg("buckets"), py::arg("config"),
      py::arg("unconditioned_pairs") = std::nullopt);
  m.def("select_calibrator", &select_calibrator, py::arg("ensemble"),
        py::arg("realized_rate"), py::return_value_policy::copy);

  // ---- ablation -------------------------------------------------------
  py::enum_<ImputeKind>(m, "ImputeKind")
      .value("Zero", ImputeKind::Zero)
      .value("Mean", ImputeKind::Mean)
      .value("CustomBaseline", ImputeKind::CustomBaseline);

  py::class_<AblationPolicy>(m, "AblationPolicy")
      .def(py::init<>())
      .def_readwrite("kind", &AblationPolicy::kind)
      .def_readwrite("feature_means", &AblationPolicy::feature_means)
      .def_readwrite("baseline", &AblationPolicy::baseline)
      .def("validate", &AblationPolicy::validate, py::arg("n"));

  py::class_<AblationRateGrid>(m, "AblationRateGrid")
      .def(py::init<>())
      .def_readwrite("rates", &AblationRateGrid::rates)
      .def_static("fractions", &AblationRateGrid::fractions,
                  py::arg("denominator"))
      .def("validate", &AblationRateGrid::validate);

  m.def("sample_mask_fixed", &sample_mask_fixed, py::arg("n"), py::arg("k"),
        py::arg("rng"));
  m.def("sample_mask_bernoulli", &sample_mask_bernoulli, py::arg("n"),
        py::arg("p"), py::arg("rng"));
  m.def("expand_group_mask", &expand_group_mask, py::arg("group_mask"),
        py::arg("group_size"), py::arg("n"));
  m.def("group_count", &group_count, py::arg("n"), py::arg("group_size"));
  m.def("apply_ablation", &apply_ablation, py::arg("x"), py::arg("mask"),
        py::arg("policy"));
  m.def("build_pair_dataset", &build_pair_dataset, py::arg("model"),
        py::arg("data"), py::arg("rows"), py::arg("rate"), py::arg("policy"),
        py::arg("ablations_per_input"), py::arg("rng"),
        py::arg("group_size") = 1);
  m.def("build_pair_dataset_bernoulli", &build_pair_dataset_bernoulli,
        py::arg("model"), py::arg("data"), py::arg("rows"), py::arg("p"),
        py::arg("policy"), py::arg("ablations_per_input"), py::arg("rng"),
        py::arg("group_size") = 1);

  // ---- models ---------------------------------------------------------
  py::enum_<ModelKind>(m, "ModelKind")
      .value("SoftmaxRegression", ModelKind::SoftmaxRegression)
      .value("Mlp", ModelKind::Mlp);

  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def(py::init<>())
      .def_readwrite("features", &LabeledDataset::features)
      .def_readwrite("labels", &LabeledDataset::labels)
      .def_readwrite("m", &LabeledDataset::m)
      .def_readwrite("feature_means", &LabeledDataset::feature_means)
      .def_readwrite("train_rows", &LabeledDataset::train_rows)
      .def_readwrite("calib_rows", &LabeledDataset::calib_rows)
      .def_readwrite("test_rows", &LabeledDataset::test_rows)
      .def("n", &LabeledDataset::n)
      .def("rows", &LabeledDataset::rows)
      .def("validate", &LabeledDataset::validate);

  py::class_<DeskModel>(m, "DeskModel")
      .def(py::init<>())
      .def_readwrite("kind", &DeskModel::kind)
      .def_readwrite("n", &DeskModel::n)
      .def_readwrite("m", &DeskModel::m)
      .def_readwrite("input_mean", &DeskModel::input_mean)
      .def_readwrite("input_scale", &DeskModel::input_scale)
      .def_readwrite("w1", &DeskModel::w1)
      .def_readwrite("b1", &DeskModel::b1)
      .def_readwrite("w2", &DeskModel::w2)
      .def_readwrite("b2", &DeskModel::b2)
      .def("hidden_width", &DeskModel::hidden_width)
      .def("validate", &DeskModel::validate);

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("m", &SyntheticSpec::m)
      .def_readwrite("n", &SyntheticSpec::n)
      .def_readwrite("samples_per_class", &SyntheticSpec::samples_per_class)
      .def_readwrite("cluster_means", &SyntheticSpec::cluster_means)
      .def_readwrite("cluster_scale", &SyntheticSpec::cluster_scale)
      .def_readwrite("seed", &SyntheticSpec::seed)
      .def_static("origin_attractor", &SyntheticSpec::origin_attractor,
                  py::arg("m"), py::arg("n"), py::arg("samples_per_class"),
                  py::arg("cluster_scale"), py::arg("separation"),
                  py::arg("seed"))
      .def("validate", &SyntheticSpec::validate);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("hidden_width", &TrainConfig::hidden_width)
      .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
      .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
      .def_readwrite("adam_eps", &TrainConfig::adam_eps)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<CsvSchema>(m, "CsvSchema")
      .def(py::init<>())
      .def_readwrite("label_column", &CsvSchema::label_column)
      .def_readwrite("class_values", &CsvSchema::class_values);

  m.def("gen_synthetic_clusters", &gen_synthetic_clusters, py::arg("spec"));
  m.def("load_csv_dataset", &load_csv_dataset, py::arg("path"),
        py::arg("schema"), py::arg("seed"));
  m.def("train_model", &train_model, py::arg("data"), py::arg("kind"),
        py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("model_logits", &model_logits, py::arg("model"), py::arg("x"));
  m.def("model_predict", &model_predict, py::arg("model"), py::arg("x"));
  m.def("retrain_on_ablations", &retrain_on_ablations, py::arg("data"),
        py::arg("kind"), py::arg("config"), py::arg("policy"),
        py::arg("mask_prob") = 0.5,
        py::call_guard<py::gil_scoped_release>());
  m.def("split_accuracy", &split_accuracy, py::arg("model"), py::arg("data"),
        py::arg("rows"));

  // ---- metrics --------------------------------------------------------
  py::class_<PredictablePipeline>(m, "PredictablePipeline")
      .def(py::init<>())
      .def_readwrite("model", &PredictablePipeline::model)
      .def_readwrite("calibrator", &PredictablePipeline::calibrator)
      .def_readwrite("ensemble", &PredictablePipeline::ensemble)
      .def_readwrite("policy", &PredictablePipeline::policy)
      .def("validate", &PredictablePipeline::validate)
      .def("base_logits", &PredictablePipeline::base_logits, py::arg("x"))
      .def("logits", &PredictablePipeline::logits, py::arg("x"),
           py::arg("realized_rate"))
      .def("probs", &PredictablePipeline::probs, py::arg("x"),
           py::arg("realized_rate"))
      .def("predict", &PredictablePipeline::predict, py::arg("x"),
           py::arg("realized_rate"));

  py::class_<BiasReportRow>(m, "BiasReportRow")
      .def(py::init<>())
      .def_readwrite("rate", &BiasReportRow::rate)
      .def_readwrite("bias_nats", &BiasReportRow::bias_nats)
      .def_readwrite("accuracy", &BiasReportRow::accuracy);

  py::class_<BiasReport>(m, "BiasReport")
      .def(py::init<>())
      .def_readwrite("per_rate", &BiasReport::per_rate)
      .def_readwrite("mean_bias", &BiasReport::mean_bias);

  m.def("class_frequency", &class_frequency, py::arg("preds"), py::arg("m"));
  m.def("missingness_bias", &missingness_bias, py::arg("pipe"),
        py::arg("data"), py::arg("rows"), py::arg("rate"),
        py::arg("ablations_per_input"), py::arg("seed"),
        py::arg("eps") = 1e-9, py::arg("group_size") = 1);
  m.def("accuracy_vs_rate", &accuracy_vs_rate, py::arg("pipe"),
        py::arg("data"), py::arg("rows"), py::arg("grid"),
        py::arg("ablations_per_input"), py::arg("seed"),
        py::arg("eps") = 1e-9, py::arg("group_size") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def("sufficiency", &sufficiency, py::arg("pipe"), py::arg("x"),
        py::arg("alpha"), py::arg("k"));
  m.def("sensitivity", &sensitivity, py::arg("pipe"), py::arg("x"),
        py::arg("alpha"), py::arg("k"));

  // ---- explain --------------------------------------------------------
  py::class_<ExplainerConfig>(m, "ExplainerConfig")
      .def(py::init<>())
      .def_readwrite("num_samples", &ExplainerConfig::num_samples)
      .def_readwrite("mask_prob", &ExplainerConfig::mask_prob)
      .def_readwrite("kernel_width", &ExplainerConfig::kernel_width)
      .def_readwrite("ridge_lambda", &ExplainerConfig::ridge_lambda)
      .def_readwrite("seed", &ExplainerConfig::seed)
      .def("validate", &ExplainerConfig::validate, py::arg("n"));

  m.def("lime_attribute",
        py::overload_cast<const PredictablePipeline&, const Eigen::VectorXd&,
                          const ExplainerConfig&>(&lime_attribute),
        py::arg("pipe"), py::arg("x"), py::arg("cfg"));
  m.def("lime_attribute",
        py::overload_cast<const CoalitionValueFn&, int,
                          const ExplainerConfig&>(&lime_attribute),
        py::arg("value"), py::arg("n"), py::arg("cfg"));
  m.def("kernelshap_attribute",
        py::overload_cast<const PredictablePipeline&, const Eigen::VectorXd&,
                          const ExplainerConfig&>(&kernelshap_attribute),
        py::arg("pipe"), py::arg("x"), py::arg("cfg"));
  m.def("kernelshap_attribute",
        py::overload_cast<const CoalitionValueFn&, int,
                          const ExplainerConfig&>(&kernelshap_attribute),
        py::arg("value"), py::arg("n"), py::arg("cfg"));
  m.def("exact_shapley",
        py::overload_cast<const PredictablePipeline&, const Eigen::VectorXd&>(
            &exact_shapley),
        py::arg("pipe"), py::arg("x"));
  m.def("exact_shapley",
        py::overload_cast<const CoalitionValueFn&, int>(&exact_shapley),
        py::arg("value"), py::arg("n"));
  m.def("top_k_rank", &top_k_rank, py::arg("alpha"), py::arg("k"));
  m.def("pipeline_value_fn", &pipeline_value_fn, py::arg("pipe"),
        py::arg("x"));

  // ---- harness --------------------------------------------------------
  py::class_<DatasetConfig>(m, "DatasetConfig")
      .def(py::init<>())
      .def_readwrite("type", &DatasetConfig::type)
      .def_readwrite("classes", &DatasetConfig::classes)
      .def_readwrite("features", &DatasetConfig::features)
      .def_readwrite("samples_per_class", &DatasetConfig::samples_per_class)
      .def_readwrite("cluster_scale", &DatasetConfig::cluster_scale)
      .def_readwrite("separation", &DatasetConfig::separation)
      .def_readwrite("path", &DatasetConfig::path)
      .def_readwrite("label_column", &DatasetConfig::label_column)
      .def_readwrite("class_values", &DatasetConfig::class_values);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("kind", &ModelConfig::kind)
      .def_readwrite("learning_rate", &ModelConfig::learning_rate)
      .def_readwrite("steps", &ModelConfig::steps)
      .def_readwrite("hidden_width", &ModelConfig::hidden_width);

  py::class_<AblationSection>(m, "AblationSection")
      .def(py::init<>())
      .def_readwrite("grid_denominator", &AblationSection::grid_denominator)
      .def_readwrite("policy", &AblationSection::policy)
      .def_readwrite("baseline", &AblationSection::baseline)
      .def_readwrite("group_size", &AblationSection::group_size)
      .def_readwrite("ablations_per_input",
                     &AblationSection::ablations_per_input);

  py::class_<FitSection>(m, "FitSection")
      .def(py::init<>())
      .def_readwrite("parametrization", &FitSection::parametrization)
      .def_readwrite("learning_rate", &FitSection::learning_rate)
      .def_readwrite("steps", &FitSection::steps)
      .def_readwrite("l2_lambda", &FitSection::l2_lambda)
      .def_readwrite("conditioned", &FitSection::conditioned);

  py::class_<ExplainerSection>(m, "ExplainerSection")
      .def(py::init<>())
      .def_readwrite("method", &ExplainerSection::method)
      .def_readwrite("num_samples", &ExplainerSection::num_samples)
      .def_readwrite("mask_prob", &ExplainerSection::mask_prob)
      .def_readwrite("kernel_width", &ExplainerSection::kernel_width)
      .def_readwrite("ridge_lambda", &ExplainerSection::ridge_lambda);

  py::class_<EvaluationSection>(m, "EvaluationSection")
      .def(py::init<>())
      .def_readwrite("kl_eps", &EvaluationSection::kl_eps)
      .def_readwrite("explain_sample_count",
                     &EvaluationSection::explain_sample_count)
      .def_readwrite("demo_rate", &EvaluationSection::demo_rate)
      .def_readwrite("sweep_sizes", &EvaluationSection::sweep_sizes)
      .def_readwrite("model_path", &EvaluationSection::model_path)
      .def_readwrite("calibrator_path", &EvaluationSection::calibrator_path);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_readwrite("dataset", &ExperimentConfig::dataset)
      .def_readwrite("model", &ExperimentConfig::model)
      .def_readwrite("ablation", &ExperimentConfig::ablation)
      .def_readwrite("fit", &ExperimentConfig::fit)
      .def_readwrite("explainer", &ExperimentConfig::explainer)
      .def_readwrite("baselines", &ExperimentConfig::baselines)
      .def_readwrite("evaluation", &ExperimentConfig::evaluation)
      .def("validate", &ExperimentConfig::validate);

  m.def("default_synthetic_config", &default_synthetic_config);
  m.def("load_config", &load_config, py::arg("path"));
  m.def(
      "config_from_json",
      [](const std::string& text) {
        return config_from_json(nlohmann::json::parse(text));
      },
      py::arg("text"), "Parse an experiment config from a JSON string.");
  m.def(
      "config_to_json",
      [](const ExperimentConfig& cfg) { return config_to_json(cfg).dump(2); },
      py::arg("cfg"), "Serialize an experiment config to a JSON string.");
  m.def("config_hash", &config_hash, py::arg("cfg"));

  m.def("resolve_dataset", &resolve_dataset, py::arg("cfg"));
  m.def("resolve_policy", &resolve_policy, py::arg("section"),
        py::arg("data"));
  m.def("resolve_train_config", &resolve_train_config, py::arg("cfg"));
  m.def("resolve_explainer_config", &resolve_explainer_config,
        py::arg("cfg"));

  m.def(
      "save_model_json",
      [](const std::string& path, const DeskModel& model,
         const std::string& metadata) {
        save_model_json(path, model, parse_metadata(metadata));
      },
      py::arg("path"), py::arg("model"), py::arg("metadata") = "{}");
  m.def("load_model_json", &load_model_json, py::arg("path"));
  m.def(
      "save_calibrator_json",
      [](const std::string& path, const CalibratorParams& params,
         const std::string& metadata, double rate) {
        save_calibrator_json(path, params, parse_metadata(metadata), rate);
      },
      py::arg("path"), py::arg("params"), py::arg("metadata") = "{}",
      py::arg("rate") = -1.0);
  m.def("load_calibrator_json", &load_calibrator_json, py::arg("path"));
  m.def(
      "save_ensemble_json",
      [](const std::string& path, const CalibratorEnsemble& ensemble,
         const std::string& metadata) {
        save_ensemble_json(path, ensemble, parse_metadata(metadata));
      },
      py::arg("path"), py::arg("ensemble"), py::arg("metadata") = "{}");
  m.def("load_ensemble_json", &load_ensemble_json, py::arg("path"));
  m.def("attach_calibrator_file", &attach_calibrator_file, py::arg("pipe"),
        py::arg("path"));

  py::class_<MethodEvaluation>(m, "MethodEvaluation")
      .def(py::init<>())
      .def_readwrite("name", &MethodEvaluation::name)
      .def_readwrite("report", &MethodEvaluation::report)
      .def_readwrite("mean_sufficiency", &MethodEvaluation::mean_sufficiency)
      .def_readwrite("mean_sensitivity", &MethodEvaluation::mean_sensitivity);

  py::class_<BenchmarkResult>(m, "BenchmarkResult")
      .def(py::init<>())
      .def_readwrite("grid", &BenchmarkResult::grid)
      .def_readwrite("methods", &BenchmarkResult::methods)
      .def_readwrite("hash", &BenchmarkResult::hash);

  py::class_<SimplexResult>(m, "SimplexResult")
      .def(py::init<>())
      .def_readwrite("rate", &SimplexResult::rate)
      .def_readwrite("clean_accuracy", &SimplexResult::clean_accuracy)
      .def_readwrite("uncalibrated_accuracy",
                     &SimplexResult::uncalibrated_accuracy)
      .def_readwrite("calibrated_accuracy",
                     &SimplexResult::calibrated_accuracy)
      .def_readwrite("points", &SimplexResult::points);

  py::class_<SweepPoint>(m, "SweepPoint")
      .def(py::init<>())
      .def_readwrite("num_pairs", &SweepPoint::num_pairs)
      .def_readwrite("final_loss", &SweepPoint::final_loss)
      .def_readwrite("mean_bias", &SweepPoint::mean_bias);

  py::class_<SweepResult>(m, "SweepResult")
      .def(py::init<>())
      .def_readwrite("points", &SweepResult::points);

  m.def("run_benchmark", &run_benchmark, py::arg("cfg"), py::arg("out_dir"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_simplex_demo", &run_simplex_demo, py::arg("cfg"),
        py::arg("out_dir"), py::call_guard<py::gil_scoped_release>());
  m.def("run_training_sweep", &run_training_sweep, py::arg("cfg"),
        py::arg("out_dir"), py::call_guard<py::gil_scoped_release>());
  m.def("run_gen_data", &run_gen_data, py::arg("cfg"), py::arg("out_dir"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_train_model", &run_train_model, py::arg("cfg"),
        py::arg("out_dir"), py::call_guard<py::gil_scoped_release>());
  m.def("run_fit_calibrator", &run_fit_calibrator, py::arg("cfg"),
        py::arg("out_dir"), py::call_guard<py::gil_scoped_release>());
  m.def("run_evaluate", &run_evaluate, py::arg("cfg"), py::arg("out_dir"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_explain", &run_explain, py::arg("cfg"), py::arg("out_dir"),
        py::call_guard<py::gil_scoped_release>());

  m.attr("__version__") = "0.1.0";
}
