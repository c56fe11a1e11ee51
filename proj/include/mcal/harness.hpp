#pragma once

#include <nlohmann/json.hpp>

#include "mcal/explain.hpp"
#include "mcal/metrics.hpp"

namespace mcal {

// ---------------------------------------------------------------------------
// Experiment configuration. Every runner is driven by one JSON document so a
// run is reproducible from the config file and the seed alone.
// ---------------------------------------------------------------------------

struct DatasetConfig {
  std::string type = "synthetic";  // "synthetic" | "csv"
  // synthetic (origin-attractor clusters)
  int classes = 3;
  int features = 16;
  int samples_per_class = 400;
  double cluster_scale = 1.0;
  double separation = 8.0;
  // csv
  std::string path;
  std::string label_column = "label";
  std::vector<std::string> class_values;  // empty: infer sorted from data
};

struct ModelConfig {
  std::string kind = "softmax_regression";  // | "mlp"
  double learning_rate = 0.05;
  int steps = 500;
  int hidden_width = 32;
};

struct AblationSection {
  int grid_denominator = 16;   // evaluation grid {0/d, ..., (d-1)/d}
  std::string policy = "zero";  // "zero" | "mean" | "custom"
  std::vector<double> baseline;  // custom policy values, length n
  int group_size = 1;
  int ablations_per_input = 8;
};

struct FitSection {
  std::string parametrization = "dense";  // | "diagonal" | "temperature"
  double learning_rate = 1e-2;
  int steps = 5000;
  double l2_lambda = 0.0;
  bool conditioned = true;  // fit-calibrator: rate ensemble vs single
};

struct ExplainerSection {
  std::string method = "lime";  // | "kernelshap" | "exact_shapley"
  int num_samples = 1000;
  double mask_prob = 0.5;
  double kernel_width = 0.0;  // <= 0: default 0.75 sqrt(n)
  double ridge_lambda = 1e-3;
};

struct EvaluationSection {
  double kl_eps = 1e-9;
  int explain_sample_count = 16;  // test inputs explained per method
  double demo_rate = 0.75;
  std::vector<int> sweep_sizes = {45, 90, 180, 360, 720, 1440};
  std::string model_path;       // empty: train in-process
  std::string calibrator_path;  // empty: evaluate/explain uncalibrated
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string output_dir = ".";
  DatasetConfig dataset;
  ModelConfig model;
  AblationSection ablation;
  FitSection fit;
  ExplainerSection explainer;
  std::vector<std::string> baselines = {
      "base",     "replace",            "retrain",         "tempcal",
      "plattcal", "mcal_unconditioned", "mcal_conditioned"};
  EvaluationSection evaluation;

  void validate() const;
};

ExperimentConfig default_synthetic_config();
// Strict parser: unknown keys and wrong types raise ConfigError naming the
// offending "section.key" so typos never silently fall back to defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
// FNV-1a over the canonical (sorted-key) dump; stamped into every artifact.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Config-driven builders shared by the runners and the CLI.
// ---------------------------------------------------------------------------

LabeledDataset resolve_dataset(const ExperimentConfig& cfg);
AblationPolicy resolve_policy(const AblationSection& section,
                              const LabeledDataset& data);
ModelKind resolve_model_kind(const std::string& kind);
TrainConfig resolve_train_config(const ExperimentConfig& cfg);
ExplainerConfig resolve_explainer_config(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// JSON artifacts. Doubles serialize with shortest round-trip formatting, so
// save followed by load reproduces every field bit for bit.
// ---------------------------------------------------------------------------

void save_model_json(const std::string& path, const DeskModel& model,
                     const nlohmann::json& metadata);
DeskModel load_model_json(const std::string& path);

void save_calibrator_json(const std::string& path,
                          const CalibratorParams& params,
                          const nlohmann::json& metadata,
                          double rate = -1.0);  // rate < 0: rate-agnostic
CalibratorParams load_calibrator_json(const std::string& path);

void save_ensemble_json(const std::string& path,
                        const CalibratorEnsemble& ensemble,
                        const nlohmann::json& metadata);
CalibratorEnsemble load_ensemble_json(const std::string& path);

// Reads either artifact kind and attaches it to the pipeline.
void attach_calibrator_file(PredictablePipeline& pipe,
                            const std::string& path);

// ---------------------------------------------------------------------------
// Runners. Each writes its artifacts under out_dir (created if missing),
// returns the in-memory result, and removes partial outputs on failure.
// Timing goes to the *_meta.json files only, so the CSV reports are
// byte-identical across repeated seeded runs.
// ---------------------------------------------------------------------------

struct MethodEvaluation {
  std::string name;
  BiasReport report;
  // Per grid rate, averaged over the explained inputs; k tracks the rate
  // (sufficiency keeps the n - round(rate n) best features, sensitivity
  // ablates the round(rate n) best).
  std::vector<double> mean_sufficiency;
  std::vector<double> mean_sensitivity;
};

struct BenchmarkResult {
  AblationRateGrid grid;
  std::vector<MethodEvaluation> methods;
  std::uint64_t hash = 0;
};

struct SimplexResult {
  double rate = 0.0;
  double clean_accuracy = 0.0;
  double uncalibrated_accuracy = 0.0;
  double calibrated_accuracy = 0.0;
  int points = 0;
};

struct SweepPoint {
  int num_pairs = 0;
  double final_loss = 0.0;
  double mean_bias = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
};

// Full baseline comparison -> report.csv + report_meta.json.
BenchmarkResult run_benchmark(const ExperimentConfig& cfg,
                              const std::string& out_dir);

// Probability-simplex point cloud (m = 3 only) -> simplex.csv + meta.
// A calibrator fitted at evaluation.demo_rate (identity when the rate is 0)
// is applied to one ablated draw per test row.
SimplexResult run_simplex_demo(const ExperimentConfig& cfg,
                               const std::string& out_dir);

// Calibration-set-size sweep -> sweep.csv + meta. Prefixes of one shared
// Bernoulli pair set, so the largest size reproduces the benchmark's
// unconditioned calibrator exactly.
SweepResult run_training_sweep(const ExperimentConfig& cfg,
                               const std::string& out_dir);

// Single-step runners backing the remaining CLI subcommands.
void run_gen_data(const ExperimentConfig& cfg, const std::string& out_dir);
void run_train_model(const ExperimentConfig& cfg, const std::string& out_dir);
void run_fit_calibrator(const ExperimentConfig& cfg,
                        const std::string& out_dir);
BiasReport run_evaluate(const ExperimentConfig& cfg,
                        const std::string& out_dir);
void run_explain(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace mcal
