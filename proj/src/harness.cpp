#include "mcal/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace mcal {

namespace {

namespace fs = std::filesystem;
using SteadyClock = std::chrono::steady_clock;

// Seed tags: every stage draws from its own stream derived off the config
// seed, so adding or removing a stage never shifts another stage's draws.
constexpr std::uint64_t kTagPairsRate = 200;  // + rate index
constexpr std::uint64_t kTagPairsBernoulli = 299;
constexpr std::uint64_t kTagFitTemp = 301;
constexpr std::uint64_t kTagFitPlatt = 302;
constexpr std::uint64_t kTagFitDense = 303;
constexpr std::uint64_t kTagFitEnsemble = 304;
constexpr std::uint64_t kTagEval = 400;
constexpr std::uint64_t kTagExplain = 500;
constexpr std::uint64_t kTagDemoMask = 600;
constexpr std::uint64_t kTagDemoFit = 601;
constexpr std::uint64_t kTagDemoPairs = 602;

long long ms_since(SteadyClock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             SteadyClock::now() - start)
      .count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- strict JSON readers ---------------------------------------------------

[[noreturn]] void bad_field(const std::string& where, const std::string& key,
                            const char* expected) {
  throw ConfigError("config: '" + (where.empty() ? key : where + "." + key) +
                    "' must be " + expected);
}

class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string where)
      : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) {
      throw ConfigError("config: '" + where_ + "' must be an object");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void read(const char* key, bool& out) {
    if (!has(key)) return;
    if (!j_[key].is_boolean()) bad_field(where_, key, "a boolean");
    out = j_[key].get<bool>();
  }

  void read(const char* key, int& out) {
    if (!has(key)) return;
    if (!j_[key].is_number_integer() && !j_[key].is_number_unsigned()) {
      bad_field(where_, key, "an integer");
    }
    out = j_[key].get<int>();
  }

  void read(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    if (!j_[key].is_number_unsigned()) {
      bad_field(where_, key, "a non-negative integer");
    }
    out = j_[key].get<std::uint64_t>();
  }

  void read(const char* key, double& out) {
    if (!has(key)) return;
    if (!j_[key].is_number()) bad_field(where_, key, "a number");
    out = j_[key].get<double>();
  }

  void read(const char* key, std::string& out) {
    if (!has(key)) return;
    if (!j_[key].is_string()) bad_field(where_, key, "a string");
    out = j_[key].get<std::string>();
  }

  void read(const char* key, std::vector<double>& out) {
    if (!has(key)) return;
    if (!j_[key].is_array()) bad_field(where_, key, "an array of numbers");
    out.clear();
    for (const auto& v : j_[key]) {
      if (!v.is_number()) bad_field(where_, key, "an array of numbers");
      out.push_back(v.get<double>());
    }
  }

  void read(const char* key, std::vector<int>& out) {
    if (!has(key)) return;
    if (!j_[key].is_array()) bad_field(where_, key, "an array of integers");
    out.clear();
    for (const auto& v : j_[key]) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) {
        bad_field(where_, key, "an array of integers");
      }
      out.push_back(v.get<int>());
    }
  }

  void read(const char* key, std::vector<std::string>& out) {
    if (!has(key)) return;
    if (!j_[key].is_array()) bad_field(where_, key, "an array of strings");
    out.clear();
    for (const auto& v : j_[key]) {
      if (!v.is_string()) bad_field(where_, key, "an array of strings");
      out.push_back(v.get<std::string>());
    }
  }

  const nlohmann::json* section(const char* key) {
    return has(key) ? &j_[key] : nullptr;
  }

  // Flags typos instead of silently falling back to defaults.
  void finish() const {
    for (const auto& item : j_.items()) {
      if (seen_.count(item.key()) == 0) {
        throw ConfigError("config: unknown key '" + item.key() + "'" +
                          (where_.empty() ? "" : " in '" + where_ + "'"));
      }
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void check_range(bool ok, const char* field, const char* requirement) {
  if (!ok) {
    throw ConfigError(std::string("config: '") + field + "' must be " +
                      requirement);
  }
}

// --- Eigen <-> JSON ----------------------------------------------------------

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

[[noreturn]] void bad_file_field(const std::string& where,
                                 const std::string& field,
                                 const char* expected) {
  throw ConfigError(where + ": field '" + field + "' must be " + expected);
}

const nlohmann::json& require_field(const nlohmann::json& j,
                                    const std::string& where,
                                    const std::string& field) {
  if (!j.is_object() || !j.contains(field)) {
    throw ConfigError(where + ": missing field '" + field + "'");
  }
  return j[field];
}

double field_double(const nlohmann::json& j, const std::string& where,
                    const std::string& field) {
  const nlohmann::json& v = require_field(j, where, field);
  if (!v.is_number()) bad_file_field(where, field, "a number");
  return v.get<double>();
}

int field_int(const nlohmann::json& j, const std::string& where,
              const std::string& field) {
  const nlohmann::json& v = require_field(j, where, field);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    bad_file_field(where, field, "an integer");
  }
  return v.get<int>();
}

std::string field_string(const nlohmann::json& j, const std::string& where,
                         const std::string& field) {
  const nlohmann::json& v = require_field(j, where, field);
  if (!v.is_string()) bad_file_field(where, field, "a string");
  return v.get<std::string>();
}

Eigen::VectorXd field_vec(const nlohmann::json& j, const std::string& where,
                          const std::string& field) {
  const nlohmann::json& v = require_field(j, where, field);
  if (!v.is_array()) bad_file_field(where, field, "an array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const auto& x : v) {
    if (!x.is_number()) bad_file_field(where, field, "an array of numbers");
    out[i++] = x.get<double>();
  }
  return out;
}

Eigen::MatrixXd field_mat(const nlohmann::json& j, const std::string& where,
                          const std::string& field) {
  const nlohmann::json& v = require_field(j, where, field);
  if (!v.is_array() || v.empty() || !v[0].is_array()) {
    bad_file_field(where, field, "an array of equal-length rows");
  }
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!v[static_cast<std::size_t>(r)].is_array() ||
        static_cast<Eigen::Index>(v[static_cast<std::size_t>(r)].size()) !=
            cols) {
      bad_file_field(where, field, "an array of equal-length rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& x = v[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (!x.is_number()) {
        bad_file_field(where, field, "an array of equal-length rows");
      }
      out(r, c) = x.get<double>();
    }
  }
  return out;
}

nlohmann::json read_json_file(const std::string& path,
                              const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(what + ": cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": '" + path + "' is not valid JSON: " +
                      e.what());
  }
  return j;
}

// --- calibrator body shared by the single and ensemble formats --------------

nlohmann::json calibrator_body(const CalibratorParams& p) {
  nlohmann::json j;
  j["m"] = p.m;
  j["parametrization"] = to_string(p.parametrization);
  switch (p.parametrization) {
    case Parametrization::Dense:
      j["weight"] = mat_to_json(p.weight);
      j["bias"] = vec_to_json(p.bias);
      break;
    case Parametrization::Diagonal:
      j["scale"] = vec_to_json(p.scale);
      j["bias"] = vec_to_json(p.bias);
      break;
    case Parametrization::Temperature:
      j["inv_temperature"] = p.inv_temperature;
      break;
  }
  return j;
}

nlohmann::json model_doc(const DeskModel& model,
                         const nlohmann::json& metadata) {
  model.validate();
  nlohmann::json j;
  j["kind"] = "model";
  j["version"] = 1;
  j["model_kind"] = to_string(model.kind);
  j["n"] = model.n;
  j["m"] = model.m;
  j["input_mean"] = vec_to_json(model.input_mean);
  j["input_scale"] = vec_to_json(model.input_scale);
  j["w1"] = mat_to_json(model.w1);
  j["b1"] = vec_to_json(model.b1);
  if (model.kind == ModelKind::Mlp) {
    j["w2"] = mat_to_json(model.w2);
    j["b2"] = vec_to_json(model.b2);
  } else {
    j["w2"] = nullptr;
    j["b2"] = nullptr;
  }
  j["metadata"] = metadata;
  return j;
}

nlohmann::json calibrator_doc(const CalibratorParams& params,
                              const nlohmann::json& metadata, double rate) {
  params.validate();
  nlohmann::json j = calibrator_body(params);
  j["kind"] = "calibrator";
  j["version"] = 1;
  if (rate >= 0.0) j["rate"] = rate;
  j["metadata"] = metadata;
  return j;
}

nlohmann::json ensemble_doc(const CalibratorEnsemble& ensemble,
                            const nlohmann::json& metadata) {
  nlohmann::json j;
  j["kind"] = "ensemble";
  j["version"] = 1;
  j["m"] = ensemble.m;
  nlohmann::json entries = nlohmann::json::array();
  for (const EnsembleEntry& e : ensemble.entries) {
    nlohmann::json entry;
    entry["rate"] = e.rate;
    entry["final_loss"] = e.final_loss;
    entry["calibrator"] = calibrator_body(e.params);
    entries.push_back(std::move(entry));
  }
  j["entries"] = std::move(entries);
  j["unconditioned"] = ensemble.unconditioned.has_value()
                           ? calibrator_body(*ensemble.unconditioned)
                           : nlohmann::json(nullptr);
  j["metadata"] = metadata;
  return j;
}

CalibratorParams calibrator_from_body(const nlohmann::json& j,
                                      const std::string& where) {
  const int m = field_int(j, where, "m");
  const std::string kind = field_string(j, where, "parametrization");
  Parametrization parametrization;
  try {
    parametrization = parametrization_from_string(kind);
  } catch (const std::exception&) {
    bad_file_field(where, "parametrization",
                   "'dense', 'diagonal' or 'temperature'");
  }
  CalibratorParams p = CalibratorParams::identity(parametrization, m);
  switch (parametrization) {
    case Parametrization::Dense:
      p.weight = field_mat(j, where, "weight");
      p.bias = field_vec(j, where, "bias");
      break;
    case Parametrization::Diagonal:
      p.scale = field_vec(j, where, "scale");
      p.bias = field_vec(j, where, "bias");
      break;
    case Parametrization::Temperature:
      p.inv_temperature = field_double(j, where, "inv_temperature");
      break;
  }
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

// --- output directory with rollback of partial artifacts --------------------

class ArtifactWriter {
 public:
  explicit ArtifactWriter(const std::string& out_dir)
      : dir_(out_dir.empty() ? "." : out_dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) {
      throw ConfigError("cannot create output directory '" + dir_.string() +
                        "': " + ec.message());
    }
  }

  ArtifactWriter(const ArtifactWriter&) = delete;
  ArtifactWriter& operator=(const ArtifactWriter&) = delete;

  ~ArtifactWriter() {
    if (committed_) return;
    std::error_code ec;
    for (const fs::path& p : written_) fs::remove(p, ec);
  }

  std::string write_text(const std::string& basename,
                         const std::string& content) {
    const fs::path path = dir_ / basename;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    written_.push_back(path);
    out << content;
    out.close();
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
    return path.string();
  }

  std::string write_json(const std::string& basename,
                         const nlohmann::json& j) {
    return write_text(basename, j.dump(2) + "\n");
  }

  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json base_metadata(const ExperimentConfig& cfg) {
  nlohmann::json meta;
  meta["created"] = "";
  meta["seed"] = cfg.seed;
  meta["config_hash"] = hash_hex(config_hash(cfg));
  return meta;
}

Parametrization fit_parametrization(const ExperimentConfig& cfg) {
  return parametrization_from_string(cfg.fit.parametrization);
}

FitConfig base_fit_config(const ExperimentConfig& cfg) {
  FitConfig fc;
  fc.learning_rate = cfg.fit.learning_rate;
  fc.steps = cfg.fit.steps;
  fc.l2_lambda = cfg.fit.l2_lambda;
  fc.parametrization = fit_parametrization(cfg);
  return fc;
}

DeskModel obtain_model(const ExperimentConfig& cfg,
                       const LabeledDataset& data) {
  if (!cfg.evaluation.model_path.empty()) {
    DeskModel model = load_model_json(cfg.evaluation.model_path);
    if (model.n != static_cast<int>(data.n()) || model.m != data.m) {
      throw ConfigError("model file '" + cfg.evaluation.model_path +
                        "' does not match the dataset shape");
    }
    return model;
  }
  return train_model(data, resolve_model_kind(cfg.model.kind),
                     resolve_train_config(cfg));
}

AttributionVector attribute_with(const std::string& method,
                                 const PredictablePipeline& pipe,
                                 const Eigen::VectorXd& x,
                                 const ExplainerConfig& ec) {
  if (method == "lime") return lime_attribute(pipe, x, ec);
  if (method == "kernelshap") return kernelshap_attribute(pipe, x, ec);
  return exact_shapley(pipe, x);
}

std::vector<int> explained_rows(const ExperimentConfig& cfg,
                                const LabeledDataset& data) {
  const int total = static_cast<int>(data.test_rows.size());
  const int count = std::min(cfg.evaluation.explain_sample_count, total);
  // Evenly spaced through the sorted test split: row order follows class
  // order for the synthetic corpora, so a prefix would explain one class.
  std::vector<int> rows(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto pick = static_cast<std::size_t>(
        static_cast<long long>(i) * total / count);
    rows[static_cast<std::size_t>(i)] = data.test_rows[pick];
  }
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  check_range(dataset.type == "synthetic" || dataset.type == "csv",
              "dataset.type", "'synthetic' or 'csv'");
  if (dataset.type == "synthetic") {
    check_range(dataset.classes >= 2, "dataset.classes", "at least 2");
    check_range(dataset.features >= 1, "dataset.features", "at least 1");
    check_range(dataset.features % (dataset.classes - 1) == 0,
                "dataset.features", "divisible by classes - 1");
    check_range(dataset.samples_per_class >= 4, "dataset.samples_per_class",
                "at least 4");
    check_range(std::isfinite(dataset.cluster_scale) &&
                    dataset.cluster_scale > 0.0,
                "dataset.cluster_scale", "positive");
    check_range(std::isfinite(dataset.separation) && dataset.separation >= 0.0,
                "dataset.separation", "non-negative");
  } else {
    check_range(!dataset.path.empty(), "dataset.path", "non-empty");
    check_range(!dataset.label_column.empty(), "dataset.label_column",
                "non-empty");
  }

  check_range(
      model.kind == "softmax_regression" || model.kind == "mlp", "model.kind",
      "'softmax_regression' or 'mlp'");
  check_range(std::isfinite(model.learning_rate) && model.learning_rate > 0.0,
              "model.learning_rate", "positive");
  check_range(model.steps >= 1, "model.steps", "at least 1");
  check_range(model.hidden_width >= 1, "model.hidden_width", "at least 1");

  check_range(ablation.grid_denominator >= 1, "ablation.grid_denominator",
              "at least 1");
  check_range(ablation.policy == "zero" || ablation.policy == "mean" ||
                  ablation.policy == "custom",
              "ablation.policy", "'zero', 'mean' or 'custom'");
  if (ablation.policy == "custom") {
    check_range(!ablation.baseline.empty(), "ablation.baseline",
                "non-empty for the custom policy");
  }
  check_range(ablation.group_size >= 1, "ablation.group_size", "at least 1");
  check_range(ablation.ablations_per_input >= 1,
              "ablation.ablations_per_input", "at least 1");

  check_range(fit.parametrization == "dense" ||
                  fit.parametrization == "diagonal" ||
                  fit.parametrization == "temperature",
              "fit.parametrization", "'dense', 'diagonal' or 'temperature'");
  check_range(std::isfinite(fit.learning_rate) && fit.learning_rate > 0.0,
              "fit.learning_rate", "positive");
  check_range(fit.steps >= 1, "fit.steps", "at least 1");
  check_range(std::isfinite(fit.l2_lambda) && fit.l2_lambda >= 0.0,
              "fit.l2_lambda", "non-negative");

  check_range(explainer.method == "lime" || explainer.method == "kernelshap" ||
                  explainer.method == "exact_shapley",
              "explainer.method", "'lime', 'kernelshap' or 'exact_shapley'");
  check_range(explainer.num_samples >= 1, "explainer.num_samples",
              "at least 1");
  check_range(explainer.mask_prob >= 0.0 && explainer.mask_prob <= 1.0,
              "explainer.mask_prob", "in [0, 1]");
  check_range(std::isfinite(explainer.kernel_width), "explainer.kernel_width",
              "finite");
  check_range(std::isfinite(explainer.ridge_lambda) &&
                  explainer.ridge_lambda >= 0.0,
              "explainer.ridge_lambda", "non-negative");

  check_range(!baselines.empty(), "baselines", "non-empty");
  const std::set<std::string> known = {
      "base",     "replace",            "retrain",         "tempcal",
      "plattcal", "mcal_unconditioned", "mcal_conditioned"};
  std::set<std::string> seen;
  for (const std::string& b : baselines) {
    if (known.count(b) == 0) {
      throw ConfigError("config: unknown baseline '" + b + "'");
    }
    if (!seen.insert(b).second) {
      throw ConfigError("config: duplicate baseline '" + b + "'");
    }
  }

  check_range(std::isfinite(evaluation.kl_eps) && evaluation.kl_eps > 0.0,
              "evaluation.kl_eps", "positive");
  check_range(evaluation.explain_sample_count >= 1,
              "evaluation.explain_sample_count", "at least 1");
  check_range(evaluation.demo_rate >= 0.0 && evaluation.demo_rate <= 1.0,
              "evaluation.demo_rate", "in [0, 1]");
  check_range(!evaluation.sweep_sizes.empty(), "evaluation.sweep_sizes",
              "non-empty");
  for (std::size_t i = 0; i < evaluation.sweep_sizes.size(); ++i) {
    check_range(evaluation.sweep_sizes[i] >= 1, "evaluation.sweep_sizes",
                "all at least 1");
    if (i > 0) {
      check_range(evaluation.sweep_sizes[i] > evaluation.sweep_sizes[i - 1],
                  "evaluation.sweep_sizes", "strictly increasing");
    }
  }
}

ExperimentConfig default_synthetic_config() { return ExperimentConfig{}; }

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  SectionReader top(j, "");
  top.read("seed", cfg.seed);
  top.read("output_dir", cfg.output_dir);
  top.read("baselines", cfg.baselines);

  if (const nlohmann::json* s = top.section("dataset")) {
    SectionReader r(*s, "dataset");
    r.read("type", cfg.dataset.type);
    r.read("classes", cfg.dataset.classes);
    r.read("features", cfg.dataset.features);
    r.read("samples_per_class", cfg.dataset.samples_per_class);
    r.read("cluster_scale", cfg.dataset.cluster_scale);
    r.read("separation", cfg.dataset.separation);
    r.read("path", cfg.dataset.path);
    r.read("label_column", cfg.dataset.label_column);
    r.read("class_values", cfg.dataset.class_values);
    r.finish();
  }
  if (const nlohmann::json* s = top.section("model")) {
    SectionReader r(*s, "model");
    r.read("kind", cfg.model.kind);
    r.read("learning_rate", cfg.model.learning_rate);
    r.read("steps", cfg.model.steps);
    r.read("hidden_width", cfg.model.hidden_width);
    r.finish();
  }
  if (const nlohmann::json* s = top.section("ablation")) {
    SectionReader r(*s, "ablation");
    r.read("grid_denominator", cfg.ablation.grid_denominator);
    r.read("policy", cfg.ablation.policy);
    r.read("baseline", cfg.ablation.baseline);
    r.read("group_size", cfg.ablation.group_size);
    r.read("ablations_per_input", cfg.ablation.ablations_per_input);
    r.finish();
  }
  if (const nlohmann::json* s = top.section("fit")) {
    SectionReader r(*s, "fit");
    r.read("parametrization", cfg.fit.parametrization);
    r.read("learning_rate", cfg.fit.learning_rate);
    r.read("steps", cfg.fit.steps);
    r.read("l2_lambda", cfg.fit.l2_lambda);
    r.read("conditioned", cfg.fit.conditioned);
    r.finish();
  }
  if (const nlohmann::json* s = top.section("explainer")) {
    SectionReader r(*s, "explainer");
    r.read("method", cfg.explainer.method);
    r.read("num_samples", cfg.explainer.num_samples);
    r.read("mask_prob", cfg.explainer.mask_prob);
    r.read("kernel_width", cfg.explainer.kernel_width);
    r.read("ridge_lambda", cfg.explainer.ridge_lambda);
    r.finish();
  }
  if (const nlohmann::json* s = top.section("evaluation")) {
    SectionReader r(*s, "evaluation");
    r.read("kl_eps", cfg.evaluation.kl_eps);
    r.read("explain_sample_count", cfg.evaluation.explain_sample_count);
    r.read("demo_rate", cfg.evaluation.demo_rate);
    r.read("sweep_sizes", cfg.evaluation.sweep_sizes);
    r.read("model_path", cfg.evaluation.model_path);
    r.read("calibrator_path", cfg.evaluation.calibrator_path);
    r.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path, "config"));
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["dataset"] = {{"type", cfg.dataset.type},
                  {"classes", cfg.dataset.classes},
                  {"features", cfg.dataset.features},
                  {"samples_per_class", cfg.dataset.samples_per_class},
                  {"cluster_scale", cfg.dataset.cluster_scale},
                  {"separation", cfg.dataset.separation},
                  {"path", cfg.dataset.path},
                  {"label_column", cfg.dataset.label_column},
                  {"class_values", cfg.dataset.class_values}};
  j["model"] = {{"kind", cfg.model.kind},
                {"learning_rate", cfg.model.learning_rate},
                {"steps", cfg.model.steps},
                {"hidden_width", cfg.model.hidden_width}};
  j["ablation"] = {{"grid_denominator", cfg.ablation.grid_denominator},
                   {"policy", cfg.ablation.policy},
                   {"baseline", cfg.ablation.baseline},
                   {"group_size", cfg.ablation.group_size},
                   {"ablations_per_input", cfg.ablation.ablations_per_input}};
  j["fit"] = {{"parametrization", cfg.fit.parametrization},
              {"learning_rate", cfg.fit.learning_rate},
              {"steps", cfg.fit.steps},
              {"l2_lambda", cfg.fit.l2_lambda},
              {"conditioned", cfg.fit.conditioned}};
  j["explainer"] = {{"method", cfg.explainer.method},
                    {"num_samples", cfg.explainer.num_samples},
                    {"mask_prob", cfg.explainer.mask_prob},
                    {"kernel_width", cfg.explainer.kernel_width},
                    {"ridge_lambda", cfg.explainer.ridge_lambda}};
  j["baselines"] = cfg.baselines;
  j["evaluation"] = {
      {"kl_eps", cfg.evaluation.kl_eps},
      {"explain_sample_count", cfg.evaluation.explain_sample_count},
      {"demo_rate", cfg.evaluation.demo_rate},
      {"sweep_sizes", cfg.evaluation.sweep_sizes},
      {"model_path", cfg.evaluation.model_path},
      {"calibrator_path", cfg.evaluation.calibrator_path}};
  return j;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  // FNV-1a over the canonical dump (nlohmann objects iterate sorted keys).
  const std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

LabeledDataset resolve_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.type == "synthetic") {
    return gen_synthetic_clusters(SyntheticSpec::origin_attractor(
        cfg.dataset.classes, cfg.dataset.features,
        cfg.dataset.samples_per_class, cfg.dataset.cluster_scale,
        cfg.dataset.separation, cfg.seed));
  }
  CsvSchema schema;
  schema.label_column = cfg.dataset.label_column;
  schema.class_values = cfg.dataset.class_values;
  return load_csv_dataset(cfg.dataset.path, schema, cfg.seed);
}

AblationPolicy resolve_policy(const AblationSection& section,
                              const LabeledDataset& data) {
  AblationPolicy policy;
  if (section.policy == "zero") {
    policy.kind = ImputeKind::Zero;
  } else if (section.policy == "mean") {
    policy.kind = ImputeKind::Mean;
    policy.feature_means = data.feature_means;
  } else {
    policy.kind = ImputeKind::CustomBaseline;
    if (static_cast<Eigen::Index>(section.baseline.size()) != data.n()) {
      throw ConfigError(
          "config: 'ablation.baseline' must have one value per feature");
    }
    policy.baseline = Eigen::Map<const Eigen::VectorXd>(
        section.baseline.data(),
        static_cast<Eigen::Index>(section.baseline.size()));
  }
  return policy;
}

ModelKind resolve_model_kind(const std::string& kind) {
  if (kind == "softmax_regression") return ModelKind::SoftmaxRegression;
  if (kind == "mlp") return ModelKind::Mlp;
  throw ConfigError("config: 'model.kind' must be 'softmax_regression' or 'mlp'");
}

TrainConfig resolve_train_config(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.learning_rate = cfg.model.learning_rate;
  tc.steps = cfg.model.steps;
  tc.hidden_width = cfg.model.hidden_width;
  tc.seed = cfg.seed;
  return tc;
}

ExplainerConfig resolve_explainer_config(const ExperimentConfig& cfg) {
  ExplainerConfig ec;
  ec.num_samples = cfg.explainer.num_samples;
  ec.mask_prob = cfg.explainer.mask_prob;
  ec.kernel_width = cfg.explainer.kernel_width;
  ec.ridge_lambda = cfg.explainer.ridge_lambda;
  ec.seed = derive_seed(cfg.seed, kTagExplain);
  return ec;
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

void save_model_json(const std::string& path, const DeskModel& model,
                     const nlohmann::json& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file '" + path + "'");
  out << model_doc(model, metadata).dump(2) << "\n";
}

DeskModel load_model_json(const std::string& path) {
  const std::string where = "model file '" + path + "'";
  const nlohmann::json j = read_json_file(path, "model file");
  if (field_string(j, where, "kind") != "model") {
    throw ConfigError(where + ": field 'kind' must be 'model'");
  }
  DeskModel model;
  const std::string kind = field_string(j, where, "model_kind");
  try {
    model.kind = model_kind_from_string(kind);
  } catch (const std::exception&) {
    bad_file_field(where, "model_kind", "'softmax_regression' or 'mlp'");
  }
  model.n = field_int(j, where, "n");
  model.m = field_int(j, where, "m");
  model.input_mean = field_vec(j, where, "input_mean");
  model.input_scale = field_vec(j, where, "input_scale");
  model.w1 = field_mat(j, where, "w1");
  model.b1 = field_vec(j, where, "b1");
  if (model.kind == ModelKind::Mlp) {
    model.w2 = field_mat(j, where, "w2");
    model.b2 = field_vec(j, where, "b2");
  }
  try {
    model.validate();
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return model;
}

void save_calibrator_json(const std::string& path,
                          const CalibratorParams& params,
                          const nlohmann::json& metadata, double rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write calibrator file '" + path + "'");
  out << calibrator_doc(params, metadata, rate).dump(2) << "\n";
}

CalibratorParams load_calibrator_json(const std::string& path) {
  const std::string where = "calibrator file '" + path + "'";
  const nlohmann::json j = read_json_file(path, "calibrator file");
  if (field_string(j, where, "kind") != "calibrator") {
    throw ConfigError(where + ": field 'kind' must be 'calibrator'");
  }
  return calibrator_from_body(j, where);
}

void save_ensemble_json(const std::string& path,
                        const CalibratorEnsemble& ensemble,
                        const nlohmann::json& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write ensemble file '" + path + "'");
  out << ensemble_doc(ensemble, metadata).dump(2) << "\n";
}

CalibratorEnsemble load_ensemble_json(const std::string& path) {
  const std::string where = "ensemble file '" + path + "'";
  const nlohmann::json j = read_json_file(path, "ensemble file");
  if (field_string(j, where, "kind") != "ensemble") {
    throw ConfigError(where + ": field 'kind' must be 'ensemble'");
  }
  CalibratorEnsemble ensemble;
  ensemble.m = field_int(j, where, "m");
  const nlohmann::json& entries = require_field(j, where, "entries");
  if (!entries.is_array()) bad_file_field(where, "entries", "an array");
  for (const auto& entry : entries) {
    EnsembleEntry e;
    e.rate = field_double(entry, where, "rate");
    e.final_loss = field_double(entry, where, "final_loss");
    e.params =
        calibrator_from_body(require_field(entry, where, "calibrator"), where);
    ensemble.entries.push_back(std::move(e));
  }
  const nlohmann::json& unc = require_field(j, where, "unconditioned");
  if (!unc.is_null()) {
    ensemble.unconditioned = calibrator_from_body(unc, where);
  }
  for (std::size_t i = 1; i < ensemble.entries.size(); ++i) {
    if (!(ensemble.entries[i - 1].rate < ensemble.entries[i].rate)) {
      throw ConfigError(where + ": entries must be sorted by strictly "
                        "increasing rate");
    }
  }
  if (ensemble.entries.empty() && !ensemble.unconditioned.has_value()) {
    throw ConfigError(where + ": needs entries or an unconditioned fallback");
  }
  return ensemble;
}

void attach_calibrator_file(PredictablePipeline& pipe,
                            const std::string& path) {
  const nlohmann::json j = read_json_file(path, "calibrator file");
  const std::string where = "calibrator file '" + path + "'";
  const std::string kind = field_string(j, where, "kind");
  if (kind == "calibrator") {
    pipe.calibrator = load_calibrator_json(path);
  } else if (kind == "ensemble") {
    pipe.ensemble = load_ensemble_json(path);
  } else {
    throw ConfigError(where + ": field 'kind' must be 'calibrator' or "
                      "'ensemble'");
  }
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

BenchmarkResult run_benchmark(const ExperimentConfig& cfg,
                              const std::string& out_dir) {
  cfg.validate();
  const auto t_start = SteadyClock::now();
  nlohmann::json wall;

  const LabeledDataset data = resolve_dataset(cfg);
  const AblationPolicy policy = resolve_policy(cfg.ablation, data);
  const ModelKind kind = resolve_model_kind(cfg.model.kind);
  const TrainConfig tc = resolve_train_config(cfg);
  const int api = cfg.ablation.ablations_per_input;
  const int gs = cfg.ablation.group_size;
  const AblationRateGrid grid =
      AblationRateGrid::fractions(cfg.ablation.grid_denominator);
  const int n = static_cast<int>(data.n());

  auto t = SteadyClock::now();
  const DeskModel model = train_model(data, kind, tc);
  wall["train"] = ms_since(t);

  const auto wants = [&](const char* name) {
    return std::find(cfg.baselines.begin(), cfg.baselines.end(), name) !=
           cfg.baselines.end();
  };
  const bool need_bernoulli = wants("tempcal") || wants("plattcal") ||
                              wants("mcal_unconditioned") ||
                              wants("mcal_conditioned");

  t = SteadyClock::now();
  std::vector<PairedLogitSample> bernoulli_pairs;
  if (need_bernoulli) {
    Rng rng(derive_seed(cfg.seed, kTagPairsBernoulli));
    bernoulli_pairs = build_pair_dataset_bernoulli(
        model, data, data.calib_rows, 0.5, policy, api, rng, gs);
  }
  std::vector<RateBucket> buckets;
  if (wants("mcal_conditioned")) {
    for (std::size_t i = 0; i < grid.rates.size(); ++i) {
      Rng rng(derive_seed(cfg.seed, kTagPairsRate + i));
      buckets.push_back({grid.rates[i],
                         build_pair_dataset(model, data, data.calib_rows,
                                            grid.rates[i], policy, api, rng,
                                            gs)});
    }
  }
  wall["pairs"] = ms_since(t);

  t = SteadyClock::now();
  const auto fit_single = [&](Parametrization p, std::uint64_t tag) {
    FitConfig fc = base_fit_config(cfg);
    fc.parametrization = p;
    fc.seed = derive_seed(cfg.seed, tag);
    return fit_calibrator(bernoulli_pairs, fc).params;
  };

  std::vector<std::pair<std::string, PredictablePipeline>> pipelines;
  for (const std::string& name : cfg.baselines) {
    PredictablePipeline pipe;
    pipe.model = model;
    pipe.policy = policy;
    if (name == "replace") {
      pipe.policy.kind = ImputeKind::Mean;
      pipe.policy.feature_means = data.feature_means;
    } else if (name == "retrain") {
      pipe.model = retrain_on_ablations(data, kind, tc, policy, 0.5);
    } else if (name == "tempcal") {
      pipe.calibrator = fit_single(Parametrization::Temperature, kTagFitTemp);
    } else if (name == "plattcal") {
      pipe.calibrator = fit_single(Parametrization::Diagonal, kTagFitPlatt);
    } else if (name == "mcal_unconditioned") {
      pipe.calibrator = fit_single(Parametrization::Dense, kTagFitDense);
    } else if (name == "mcal_conditioned") {
      FitConfig fc = base_fit_config(cfg);
      fc.parametrization = Parametrization::Dense;
      fc.seed = derive_seed(cfg.seed, kTagFitEnsemble);
      pipe.ensemble = fit_ensemble(buckets, fc, &bernoulli_pairs);
    }
    pipelines.emplace_back(name, std::move(pipe));
  }
  wall["fit"] = ms_since(t);

  t = SteadyClock::now();
  BenchmarkResult result;
  result.grid = grid;
  result.hash = config_hash(cfg);
  const std::uint64_t eval_seed = derive_seed(cfg.seed, kTagEval);
  for (const auto& [name, pipe] : pipelines) {
    MethodEvaluation ev;
    ev.name = name;
    ev.report = accuracy_vs_rate(pipe, data, data.test_rows, grid, api,
                                 eval_seed, cfg.evaluation.kl_eps, gs);
    result.methods.push_back(std::move(ev));
  }
  wall["evaluate"] = ms_since(t);

  t = SteadyClock::now();
  const std::vector<int> inputs = explained_rows(cfg, data);
  const ExplainerConfig ec_base = resolve_explainer_config(cfg);
  for (std::size_t p = 0; p < pipelines.size(); ++p) {
    const PredictablePipeline& pipe = pipelines[p].second;
    std::vector<double> suff(grid.rates.size(), 0.0);
    std::vector<double> sens(grid.rates.size(), 0.0);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Eigen::VectorXd x = data.features.row(inputs[i]);
      ExplainerConfig ec = ec_base;
      ec.seed = derive_seed(ec_base.seed, i);  // shared draws across methods
      const AttributionVector alpha =
          attribute_with(cfg.explainer.method, pipe, x, ec);
      for (std::size_t r = 0; r < grid.rates.size(); ++r) {
        const int k_sens =
            static_cast<int>(std::lround(grid.rates[r] * n));
        suff[r] += sufficiency(pipe, x, alpha, n - k_sens);
        sens[r] += sensitivity(pipe, x, alpha, k_sens);
      }
    }
    for (double& v : suff) v /= static_cast<double>(inputs.size());
    for (double& v : sens) v /= static_cast<double>(inputs.size());
    result.methods[p].mean_sufficiency = std::move(suff);
    result.methods[p].mean_sensitivity = std::move(sens);
  }
  wall["explain"] = ms_since(t);
  wall["total"] = ms_since(t_start);

  std::string csv =
      "method,rate,bias_nats,accuracy,mean_sufficiency,mean_sensitivity\n";
  nlohmann::json mean_bias;
  for (const MethodEvaluation& ev : result.methods) {
    for (std::size_t r = 0; r < ev.report.per_rate.size(); ++r) {
      const BiasReportRow& row = ev.report.per_rate[r];
      csv += ev.name + "," + fmt(row.rate) + "," + fmt(row.bias_nats) + "," +
             fmt(row.accuracy) + "," + fmt(ev.mean_sufficiency[r]) + "," +
             fmt(ev.mean_sensitivity[r]) + "\n";
    }
    mean_bias[ev.name] = ev.report.mean_bias;
  }

  nlohmann::json meta = base_metadata(cfg);
  meta["dataset"] = {{"rows", data.rows()},
                     {"features", n},
                     {"classes", data.m},
                     {"train", data.train_rows.size()},
                     {"calib", data.calib_rows.size()},
                     {"test", data.test_rows.size()}};
  meta["pairs"] = {{"bernoulli", bernoulli_pairs.size()},
                   {"per_rate", buckets.empty() ? 0 : buckets[0].pairs.size()}};
  meta["explained_inputs"] = inputs.size();
  meta["mean_bias"] = std::move(mean_bias);
  meta["wall_ms"] = std::move(wall);

  ArtifactWriter out(out_dir);
  out.write_text("report.csv", csv);
  out.write_json("report_meta.json", meta);
  out.commit();
  return result;
}

SimplexResult run_simplex_demo(const ExperimentConfig& cfg,
                               const std::string& out_dir) {
  cfg.validate();
  const auto t_start = SteadyClock::now();
  const LabeledDataset data = resolve_dataset(cfg);
  if (data.m != 3) {
    throw ConfigError("simplex demo needs a three-class dataset");
  }
  const AblationPolicy policy = resolve_policy(cfg.ablation, data);
  const DeskModel model = train_model(
      data, resolve_model_kind(cfg.model.kind), resolve_train_config(cfg));

  const double rate = cfg.evaluation.demo_rate;
  const int n = static_cast<int>(data.n());
  const int gs = cfg.ablation.group_size;
  const int groups = group_count(n, gs);
  const int k = static_cast<int>(std::lround(rate * groups));

  CalibratorParams cal =
      CalibratorParams::identity(fit_parametrization(cfg), 3);
  double final_loss = 0.0;
  if (rate > 0.0) {
    Rng pair_rng(derive_seed(cfg.seed, kTagDemoPairs));
    const std::vector<PairedLogitSample> pairs = build_pair_dataset(
        model, data, data.calib_rows, rate, policy,
        cfg.ablation.ablations_per_input, pair_rng, gs);
    FitConfig fc = base_fit_config(cfg);
    fc.seed = derive_seed(cfg.seed, kTagDemoFit);
    const FitResult fit = fit_calibrator(pairs, fc);
    cal = fit.params;
    final_loss = fit.final_loss;
  }

  Rng mask_rng(derive_seed(cfg.seed, kTagDemoMask));
  std::string csv = "point_id,stage,p0,p1,p2,predicted,label\n";
  int hits_clean = 0, hits_unc = 0, hits_cal = 0;
  const auto emit = [&](int id, const char* stage, const ClassDistribution& p,
                        int label) {
    const int pred = predict_class(p);
    csv += std::to_string(id) + "," + stage + "," + fmt(p[0]) + "," +
           fmt(p[1]) + "," + fmt(p[2]) + "," + std::to_string(pred) + "," +
           std::to_string(label) + "\n";
    return pred;
  };
  for (std::size_t i = 0; i < data.test_rows.size(); ++i) {
    const int row = data.test_rows[i];
    const int label = data.labels[static_cast<std::size_t>(row)];
    const Eigen::VectorXd x = data.features.row(row);
    const LogitVector clean = model_logits(model, x);
    hits_clean += emit(static_cast<int>(i), "clean", softmax(clean), label) ==
                  label;

    FeatureMask mask = sample_mask_fixed(groups, k, mask_rng);
    if (gs != 1) mask = expand_group_mask(mask, gs, n);
    const LogitVector ablated =
        model_logits(model, apply_ablation(x, mask, policy));
    hits_unc += emit(static_cast<int>(i), "ablated_uncalibrated",
                     softmax(ablated), label) == label;
    hits_cal += emit(static_cast<int>(i), "ablated_calibrated",
                     softmax(apply_calibrator(cal, ablated)), label) == label;
  }

  SimplexResult result;
  result.rate = rate;
  result.points = static_cast<int>(data.test_rows.size());
  const double denom = static_cast<double>(result.points);
  result.clean_accuracy = hits_clean / denom;
  result.uncalibrated_accuracy = hits_unc / denom;
  result.calibrated_accuracy = hits_cal / denom;

  nlohmann::json meta = base_metadata(cfg);
  meta["rate"] = rate;
  meta["ablated_groups"] = k;
  meta["points"] = result.points;
  meta["clean_accuracy"] = result.clean_accuracy;
  meta["uncalibrated_accuracy"] = result.uncalibrated_accuracy;
  meta["calibrated_accuracy"] = result.calibrated_accuracy;
  meta["calibrator_final_loss"] = final_loss;
  meta["wall_ms"] = nlohmann::json{{"total", ms_since(t_start)}};

  ArtifactWriter out(out_dir);
  out.write_text("simplex.csv", csv);
  out.write_json("simplex_meta.json", meta);
  out.commit();
  return result;
}

SweepResult run_training_sweep(const ExperimentConfig& cfg,
                               const std::string& out_dir) {
  cfg.validate();
  const auto t_start = SteadyClock::now();
  const LabeledDataset data = resolve_dataset(cfg);
  const AblationPolicy policy = resolve_policy(cfg.ablation, data);
  const DeskModel model = train_model(
      data, resolve_model_kind(cfg.model.kind), resolve_train_config(cfg));
  const AblationRateGrid grid =
      AblationRateGrid::fractions(cfg.ablation.grid_denominator);
  const int api = cfg.ablation.ablations_per_input;
  const int gs = cfg.ablation.group_size;

  // One shared pool; each sweep point fits on a prefix, so the full-pool
  // point reproduces the benchmark's unconditioned calibrator exactly.
  Rng rng(derive_seed(cfg.seed, kTagPairsBernoulli));
  const std::vector<PairedLogitSample> pool = build_pair_dataset_bernoulli(
      model, data, data.calib_rows, 0.5, policy, api, rng, gs);
  for (const int size : cfg.evaluation.sweep_sizes) {
    if (size > static_cast<int>(pool.size())) {
      throw ConfigError("config: 'evaluation.sweep_sizes' entry " +
                        std::to_string(size) + " exceeds the " +
                        std::to_string(pool.size()) + " available pairs");
    }
  }

  SweepResult result;
  const std::uint64_t eval_seed = derive_seed(cfg.seed, kTagEval);
  std::string csv = "num_pairs,final_loss,mean_bias_nats\n";
  for (const int size : cfg.evaluation.sweep_sizes) {
    FitConfig fc = base_fit_config(cfg);
    fc.seed = derive_seed(cfg.seed, kTagFitDense);
    const std::vector<PairedLogitSample> prefix(pool.begin(),
                                                pool.begin() + size);
    const FitResult fit = fit_calibrator(prefix, fc);

    PredictablePipeline pipe;
    pipe.model = model;
    pipe.policy = policy;
    pipe.calibrator = fit.params;
    const BiasReport report =
        accuracy_vs_rate(pipe, data, data.test_rows, grid, api, eval_seed,
                         cfg.evaluation.kl_eps, gs);
    result.points.push_back({size, fit.final_loss, report.mean_bias});
    csv += std::to_string(size) + "," + fmt(fit.final_loss) + "," +
           fmt(report.mean_bias) + "\n";
  }

  nlohmann::json meta = base_metadata(cfg);
  meta["pool_pairs"] = pool.size();
  meta["wall_ms"] = nlohmann::json{{"total", ms_since(t_start)}};

  ArtifactWriter out(out_dir);
  out.write_text("sweep.csv", csv);
  out.write_json("sweep_meta.json", meta);
  out.commit();
  return result;
}

void run_gen_data(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  if (cfg.dataset.type != "synthetic") {
    throw ConfigError("gen-data needs a synthetic dataset config");
  }
  const LabeledDataset data = resolve_dataset(cfg);
  const int n = static_cast<int>(data.n());

  std::string csv;
  for (int c = 0; c < n; ++c) csv += "x" + std::to_string(c) + ",";
  csv += "label\n";
  for (int r = 0; r < data.rows(); ++r) {
    for (int c = 0; c < n; ++c) csv += fmt(data.features(r, c)) + ",";
    csv += std::to_string(data.labels[static_cast<std::size_t>(r)]) + "\n";
  }

  nlohmann::json meta = base_metadata(cfg);
  meta["rows"] = data.rows();
  meta["features"] = n;
  meta["classes"] = data.m;

  ArtifactWriter out(out_dir);
  out.write_text("dataset.csv", csv);
  out.write_json("dataset_meta.json", meta);
  out.commit();
}

void run_train_model(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const LabeledDataset data = resolve_dataset(cfg);
  const DeskModel model = train_model(
      data, resolve_model_kind(cfg.model.kind), resolve_train_config(cfg));

  nlohmann::json meta = base_metadata(cfg);
  meta["train_accuracy"] = split_accuracy(model, data, data.train_rows);
  meta["test_accuracy"] = split_accuracy(model, data, data.test_rows);

  ArtifactWriter out(out_dir);
  out.write_json("model.json", model_doc(model, meta));
  out.commit();
}

void run_fit_calibrator(const ExperimentConfig& cfg,
                        const std::string& out_dir) {
  cfg.validate();
  const LabeledDataset data = resolve_dataset(cfg);
  const AblationPolicy policy = resolve_policy(cfg.ablation, data);
  const DeskModel model = obtain_model(cfg, data);
  const int api = cfg.ablation.ablations_per_input;
  const int gs = cfg.ablation.group_size;

  Rng bern_rng(derive_seed(cfg.seed, kTagPairsBernoulli));
  const std::vector<PairedLogitSample> bernoulli_pairs =
      build_pair_dataset_bernoulli(model, data, data.calib_rows, 0.5, policy,
                                   api, bern_rng, gs);

  ArtifactWriter out(out_dir);
  nlohmann::json meta = base_metadata(cfg);
  if (cfg.fit.conditioned) {
    const AblationRateGrid grid =
        AblationRateGrid::fractions(cfg.ablation.grid_denominator);
    std::vector<RateBucket> buckets;
    for (std::size_t i = 0; i < grid.rates.size(); ++i) {
      Rng rng(derive_seed(cfg.seed, kTagPairsRate + i));
      buckets.push_back({grid.rates[i],
                         build_pair_dataset(model, data, data.calib_rows,
                                            grid.rates[i], policy, api, rng,
                                            gs)});
    }
    FitConfig fc = base_fit_config(cfg);
    fc.seed = derive_seed(cfg.seed, kTagFitEnsemble);
    const CalibratorEnsemble ensemble =
        fit_ensemble(buckets, fc, &bernoulli_pairs);
    out.write_json("calibrator.json", ensemble_doc(ensemble, meta));
  } else {
    FitConfig fc = base_fit_config(cfg);
    fc.seed = derive_seed(cfg.seed, kTagFitDense);
    const FitResult fit = fit_calibrator(bernoulli_pairs, fc);
    meta["final_loss"] = fit.final_loss;
    out.write_json("calibrator.json",
                   calibrator_doc(fit.params, meta, /*rate=*/-1.0));
  }
  out.commit();
}

BiasReport run_evaluate(const ExperimentConfig& cfg,
                        const std::string& out_dir) {
  cfg.validate();
  const auto t_start = SteadyClock::now();
  const LabeledDataset data = resolve_dataset(cfg);
  PredictablePipeline pipe;
  pipe.policy = resolve_policy(cfg.ablation, data);
  pipe.model = obtain_model(cfg, data);
  if (!cfg.evaluation.calibrator_path.empty()) {
    attach_calibrator_file(pipe, cfg.evaluation.calibrator_path);
  }

  const AblationRateGrid grid =
      AblationRateGrid::fractions(cfg.ablation.grid_denominator);
  const BiasReport report = accuracy_vs_rate(
      pipe, data, data.test_rows, grid, cfg.ablation.ablations_per_input,
      derive_seed(cfg.seed, kTagEval), cfg.evaluation.kl_eps,
      cfg.ablation.group_size);

  std::string csv = "rate,bias_nats,accuracy\n";
  for (const BiasReportRow& row : report.per_rate) {
    csv += fmt(row.rate) + "," + fmt(row.bias_nats) + "," +
           fmt(row.accuracy) + "\n";
  }
  nlohmann::json meta = base_metadata(cfg);
  meta["mean_bias"] = report.mean_bias;
  meta["calibrator"] = cfg.evaluation.calibrator_path;
  meta["wall_ms"] = nlohmann::json{{"total", ms_since(t_start)}};

  ArtifactWriter out(out_dir);
  out.write_text("eval.csv", csv);
  out.write_json("eval_meta.json", meta);
  out.commit();
  return report;
}

void run_explain(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto t_start = SteadyClock::now();
  const LabeledDataset data = resolve_dataset(cfg);
  PredictablePipeline pipe;
  pipe.policy = resolve_policy(cfg.ablation, data);
  pipe.model = obtain_model(cfg, data);
  if (!cfg.evaluation.calibrator_path.empty()) {
    attach_calibrator_file(pipe, cfg.evaluation.calibrator_path);
  }

  const std::vector<int> inputs = explained_rows(cfg, data);
  const ExplainerConfig ec_base = resolve_explainer_config(cfg);
  std::string csv = "input_index,row,predicted,label,feature,attribution\n";
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const int row = inputs[i];
    const Eigen::VectorXd x = data.features.row(row);
    ExplainerConfig ec = ec_base;
    ec.seed = derive_seed(ec_base.seed, i);
    const AttributionVector alpha =
        attribute_with(cfg.explainer.method, pipe, x, ec);
    const int pred = pipe.predict(x, 0.0);
    for (Eigen::Index f = 0; f < alpha.size(); ++f) {
      csv += std::to_string(i) + "," + std::to_string(row) + "," +
             std::to_string(pred) + "," +
             std::to_string(data.labels[static_cast<std::size_t>(row)]) +
             "," + std::to_string(f) + "," + fmt(alpha[f]) + "\n";
    }
  }

  nlohmann::json meta = base_metadata(cfg);
  meta["method"] = cfg.explainer.method;
  meta["explained_inputs"] = inputs.size();
  meta["calibrator"] = cfg.evaluation.calibrator_path;
  meta["wall_ms"] = nlohmann::json{{"total", ms_since(t_start)}};

  ArtifactWriter out(out_dir);
  out.write_text("attributions.csv", csv);
  out.write_json("attributions_meta.json", meta);
  out.commit();
}

}  // namespace mcal
