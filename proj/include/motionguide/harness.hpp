#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionguide/bundle.hpp"
#include "motionguide/cfengine.hpp"
#include "motionguide/metrics/classification.hpp"
#include "motionguide/metrics/outliers.hpp"

namespace mg {

/// Everything a run depends on. A stored config plus its seed reproduces the
/// run bit for bit.
struct ExperimentConfig {
  SynthConfig synthetic;     // used when data_path is empty; its seed is ignored
  std::string data_path;     // motion file to load instead of synthesizing
  std::size_t frames = 60;   // resampling target for loaded files
  ModelHyperparams model;    // its seed is ignored
  ClassifierKind classifier = ClassifierKind::conv1d;
  bool augmentation = true;  // one augmented copy of every training sample
  AugmentPolicy augment;
  CFParams cf;
  metrics::OutlierConfig outliers;  // its seed is ignored
  std::size_t folds = 5;
  std::size_t fold = 0;      // fold used for the bundle and the CF evaluation
  std::size_t n_eval = 100;
  std::uint64_t seed = 7;    // master seed for data, splits, training and sampling
  std::string output_dir = "out";
  std::size_t threads = 0;   // 0 picks the hardware concurrency

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are a config error.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

/// Raw (meters) dataset named by the config.
Dataset load_dataset(const ExperimentConfig& config);

struct PreparedFold {
  Fold fold;
  Normalizer normalizer;  // fitted on the training split only
  Dataset train;          // normalized
  Dataset validation;     // normalized
};

PreparedFold prepare_fold(const ExperimentConfig& config, const Dataset& raw, std::size_t fold_id);

/// The training split followed by one augmented copy of each sample (ids
/// suffixed "+aug"), or the split unchanged when augmentation is off.
Dataset augmented_training_set(const ExperimentConfig& config, const Dataset& train, std::size_t fold_id);

// ---------------------------------------------------------------- tables

struct Cell {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

/// "3.41 (1.07)"
std::string format_cell(const Cell& cell);

struct BenchmarkTable {
  std::string corner;  // label of the row-header column
  std::vector<std::string> columns;
  struct Row {
    std::string label;  // includes the direction arrow, e.g. "L1 ↓"
    std::vector<std::optional<Cell>> cells;
  };
  std::vector<Row> rows;
};

enum class TableFormat { markdown, csv };

/// Two-decimal rendering. CSV splits each cell into mean and SD columns with
/// the same rounded numbers as the markdown form. Missing cells render as "-".
std::string emit_table(const BenchmarkTable& table, TableFormat format);

// ---------------------------------------------------------------- classifier benchmark

struct FoldScore {
  std::string model;
  std::size_t fold = 0;
  metrics::ClassificationScores scores;
};

struct CvBenchmark {
  BenchmarkTable table;  // percentages, one row per model
  std::vector<FoldScore> per_fold;
};

/// k-fold cross-validation of conv1d, mlp and the majority baseline.
CvBenchmark run_cv_benchmark(const ExperimentConfig& config);
CvBenchmark run_cv_benchmark(const ExperimentConfig& config, const Dataset& raw);

void write_fold_scores(std::ostream& out, const std::vector<FoldScore>& scores);

// ---------------------------------------------------------------- bundle

/// Trains the configured classifier (on the augmented split) and the
/// autoencoder (on the plain split) for config.fold.
ModelBundle train_bundle(const ExperimentConfig& config);
ModelBundle train_bundle(const ExperimentConfig& config, const Dataset& raw);

// ---------------------------------------------------------------- CF evaluation

struct MetricSpec {
  const char* key;    // column name in the per-instance file
  const char* label;  // table row label without arrow
  bool higher_better;
};

/// validity, l1, l2, linf, dtw, fpd, fmd, lof, iforest, ocsvm
const std::vector<MetricSpec>& cf_metrics();
const char* method_label(CFMethod method) noexcept;

struct InstanceRecord {
  std::string instance_id;
  CFMethod method = CFMethod::latent;
  std::string error;  // empty on success
  bool valid = false;
  std::size_t iterations = 0;
  double final_prob = 0.0;
  std::string neighbor_id;
  std::vector<double> values;  // aligned with cf_metrics(); empty on error
};

/// Computes every metric of one counterfactual. validity is the argmax
/// recheck (1 or 0).
std::vector<double> evaluate_counterfactual(const nd::Tensor& x, const nd::Tensor& x_prime, const Classifier& c,
                                            StrokeQuality target, const metrics::OutlierModels& outliers);

struct CfEvaluation {
  BenchmarkTable table;
  std::vector<InstanceRecord> records;  // instance-major, methods in kAllMethods order
  std::vector<std::string> instance_ids;
  std::size_t failures = 0;
};

/// Samples up to n_eval validation instances the classifier assigns to the
/// non-target class and explains each with all four methods. The 1NN pool
/// and the outlier reference come from the training split.
CfEvaluation run_cf_evaluation(const ExperimentConfig& config, const ModelBundle& bundle);
CfEvaluation run_cf_evaluation(const ExperimentConfig& config, const ModelBundle& bundle, const Dataset& raw);

/// Aggregate (mean, SD, n) of one metric and method from the records.
Cell aggregate_records(const std::vector<InstanceRecord>& records, CFMethod method, std::size_t metric);

void write_instance_csv(std::ostream& out, const CfEvaluation& evaluation);
/// Full-precision aggregates: method,metric,mean,sd,n.
void write_aggregates_csv(std::ostream& out, const CfEvaluation& evaluation);
/// instances.csv, aggregates.csv, table.md and table.csv under dir.
void write_evaluation(const CfEvaluation& evaluation, const std::filesystem::path& dir);

// ---------------------------------------------------------------- export

/// Original and counterfactual in meters with the metadata an external
/// viewer needs to overlay them.
struct PairedMotion {
  MotionSchema schema;
  bool valid = false;
  std::string method;
  std::size_t iterations = 0;
  double final_prob = 0.0;
  MotionSample original;
  MotionSample counterfactual;
};

/// `original` is normalized with the bundle's statistics; both trajectories
/// are written denormalized.
void export_motion(const MotionSample& original, const CFResult& cf, const ModelBundle& bundle,
                   const std::filesystem::path& path);
void write_paired_motion(const PairedMotion& paired, const std::filesystem::path& path);
PairedMotion read_paired_motion(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mg
