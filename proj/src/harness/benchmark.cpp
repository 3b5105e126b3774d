#include <fmt/format.h>

#include <ostream>
#include <sstream>

#include "motionguide/harness.hpp"
#include "motionguide/metrics/report.hpp"

namespace mg {

std::string format_cell(const Cell& cell) { return fmt::format("{:.2f} ({:.2f})", cell.mean, cell.sd); }

std::string emit_table(const BenchmarkTable& table, TableFormat format) {
  std::ostringstream out;
  if (format == TableFormat::markdown) {
    out << "| " << table.corner << " |";
    for (const auto& c : table.columns) out << ' ' << c << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << "---|";
    out << '\n';
    for (const auto& row : table.rows) {
      out << "| " << row.label << " |";
      for (const auto& cell : row.cells) out << ' ' << (cell ? format_cell(*cell) : "-") << " |";
      out << '\n';
    }
    return out.str();
  }
  out << table.corner;
  for (const auto& c : table.columns) out << ',' << c << " mean," << c << " sd";
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.label;
    for (const auto& cell : row.cells) {
      if (cell) {
        out << fmt::format(",{:.2f},{:.2f}", cell->mean, cell->sd);
      } else {
        out << ",-,-";
      }
    }
    out << '\n';
  }
  return out.str();
}

namespace {

Cell to_cell(const metrics::Aggregate& a) { return {a.mean, a.sd, a.n}; }

metrics::ClassificationScores score(const std::vector<std::size_t>& predictions, const Dataset& validation) {
  const auto labels = validation.labels();
  return metrics::classification_scores(predictions, labels);
}

}  // namespace

CvBenchmark run_cv_benchmark(const ExperimentConfig& config) { return run_cv_benchmark(config, load_dataset(config)); }

CvBenchmark run_cv_benchmark(const ExperimentConfig& config, const Dataset& raw) {
  config.validate();
  ModelHyperparams hp = config.model;
  hp.seed = config.seed;
  static const char* kModels[] = {"conv1d", "mlp", "majority"};

  CvBenchmark out;
  for (std::size_t f = 0; f < config.folds; ++f) {
    const PreparedFold fold = prepare_fold(config, raw, f);
    const Dataset train = augmented_training_set(config, fold.train, f);
    for (const char* model : kModels) {
      std::vector<std::size_t> predictions;
      try {
        if (std::string(model) == "majority") {
          const auto baseline = MajorityBaseline::fit(train.labels());
          predictions.assign(fold.validation.size(), class_index(baseline.predict()));
        } else {
          const auto kind = parse_classifier_kind(model);
          const Classifier c = train_classifier(train, hp, kind).model;
          for (const auto& s : fold.validation.samples) predictions.push_back(class_index(c.predict(s.frames)));
        }
      } catch (const Error& e) {
        throw Error(e.category(), fmt::format("fold {} ({}): {}", f, model, e.what()));
      }
      out.per_fold.push_back({model, f, score(predictions, fold.validation)});
    }
  }

  out.table.corner = "Model";
  out.table.columns = {"Accuracy ↑", "Balanced accuracy ↑", "F1 ↑", "Macro-F1 ↑"};
  for (const char* model : kModels) {
    std::vector<double> acc, bal, f1, macro;
    for (const auto& fs : out.per_fold) {
      if (fs.model != model) continue;
      acc.push_back(100.0 * fs.scores.accuracy);
      bal.push_back(100.0 * fs.scores.balanced_accuracy);
      f1.push_back(100.0 * fs.scores.f1);
      macro.push_back(100.0 * fs.scores.macro_f1);
    }
    out.table.rows.push_back({model,
                              {to_cell(metrics::aggregate(acc)), to_cell(metrics::aggregate(bal)),
                               to_cell(metrics::aggregate(f1)), to_cell(metrics::aggregate(macro))}});
  }
  return out;
}

void write_fold_scores(std::ostream& out, const std::vector<FoldScore>& scores) {
  out << "model,fold,accuracy,balanced_accuracy,f1,macro_f1,warnings\n";
  for (const auto& s : scores) {
    std::string warnings;
    for (const auto& w : s.scores.warnings) warnings += (warnings.empty() ? "" : "; ") + w;
    out << fmt::format("{},{},{},{},{},{},\"{}\"\n", s.model, s.fold, s.scores.accuracy, s.scores.balanced_accuracy,
                       s.scores.f1, s.scores.macro_f1, warnings);
  }
}

ModelBundle train_bundle(const ExperimentConfig& config) { return train_bundle(config, load_dataset(config)); }

ModelBundle train_bundle(const ExperimentConfig& config, const Dataset& raw) {
  config.validate();
  ModelHyperparams hp = config.model;
  hp.seed = config.seed;
  const PreparedFold fold = prepare_fold(config, raw, config.fold);
  const Dataset train = augmented_training_set(config, fold.train, config.fold);

  TrainedClassifier clf = train_classifier(train, hp, config.classifier, &fold.validation);
  TrainedAutoencoder ae = train_autoencoder(fold.train, hp, &fold.validation);

  ModelBundle bundle;
  bundle.schema = raw.schema;
  bundle.normalizer = fold.normalizer;
  bundle.classifier = std::move(clf.model);
  bundle.autoencoder = std::move(ae.model);
  const double rmse_train = reconstruction_rmse(bundle.autoencoder, fold.train);
  const double rmse_val = reconstruction_rmse(bundle.autoencoder, fold.validation);
  nlohmann::json& m = bundle.manifest;
  m["seed"] = config.seed;
  m["fold"] = config.fold;
  m["folds"] = config.folds;
  m["config"] = to_json(config);
  m["train_size"] = fold.train.size();
  m["augmented_train_size"] = train.size();
  m["classifier_loss"] = {{"first", clf.trace.train_loss.front()}, {"last", clf.trace.train_loss.back()}};
  m["autoencoder_loss"] = {{"first", ae.trace.train_loss.front()}, {"last", ae.trace.train_loss.back()}};
  m["reconstruction_rmse"] = {{"train", rmse_train}, {"validation", rmse_val}, {"threshold", 0.5}};
  return bundle;
}

}  // namespace mg
