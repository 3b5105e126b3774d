#include <fmt/format.h>

#include <algorithm>
#include <ostream>
#include <set>
#include <sstream>

#include "motionguide/harness.hpp"
#include "motionguide/metrics/frechet.hpp"
#include "motionguide/metrics/report.hpp"

namespace mg {

const std::vector<MetricSpec>& cf_metrics() {
  static const std::vector<MetricSpec> specs = {
      {"validity", "Validity", true}, {"l1", "L1", false},   {"l2", "L2", false},
      {"linf", "L∞", false},          {"dtw", "DTW", false}, {"fpd", "FPD", false},
      {"fmd", "FMD", false},          {"lof", "LOF", false}, {"iforest", "IF", false},
      {"ocsvm", "OCSVM", false},
  };
  return specs;
}

const char* method_label(CFMethod method) noexcept {
  switch (method) {
    case CFMethod::latent: return "LatentCF";
    case CFMethod::nn_l1: return "1NN-L1";
    case CFMethod::nn_l2: return "1NN-L2";
    case CFMethod::nn_dtw: return "1NN-DTW";
  }
  return "?";
}

std::vector<double> evaluate_counterfactual(const nd::Tensor& x, const nd::Tensor& x_prime, const Classifier& c,
                                            StrokeQuality target, const metrics::OutlierModels& outliers) {
  using metrics::FrechetMode;
  using metrics::Norm;
  const auto p = metrics::plausibility_scores(x_prime, outliers);
  return {
      argmax(c.predict_proba(x_prime)) == target ? 1.0 : 0.0,
      metrics::proximity(x, x_prime, Norm::l1),
      metrics::proximity(x, x_prime, Norm::l2),
      metrics::proximity(x, x_prime, Norm::linf),
      metrics::dtw(x, x_prime),
      metrics::frechet_distance(x, x_prime, FrechetMode::pose),
      metrics::frechet_distance(x, x_prime, FrechetMode::motion),
      p.lof,
      p.iforest,
      p.ocsvm,
  };
}

Cell aggregate_records(const std::vector<InstanceRecord>& records, CFMethod method, std::size_t metric) {
  std::vector<double> values;
  for (const auto& r : records) {
    if (r.method == method && r.error.empty()) values.push_back(r.values.at(metric));
  }
  const auto a = metrics::aggregate(values);
  return {a.mean, a.sd, a.n};
}

CfEvaluation run_cf_evaluation(const ExperimentConfig& config, const ModelBundle& bundle) {
  return run_cf_evaluation(config, bundle, load_dataset(config));
}

CfEvaluation run_cf_evaluation(const ExperimentConfig& config, const ModelBundle& bundle, const Dataset& raw) {
  config.validate();
  const auto& manifest = bundle.manifest;
  if (manifest.contains("fold") && manifest.contains("folds") && manifest.contains("seed") &&
      (manifest["fold"] != config.fold || manifest["folds"] != config.folds || manifest["seed"] != config.seed)) {
    throw config_error(fmt::format("bundle was trained on fold {} of {} with seed {}, config asks for fold {} of {} "
                                   "with seed {}",
                                   manifest["fold"].dump(), manifest["folds"].dump(), manifest["seed"].dump(),
                                   config.fold, config.folds, config.seed));
  }
  if (raw.schema.channels() != bundle.schema.channels() || raw.schema.frames != bundle.schema.frames) {
    throw structural_error("dataset schema does not match the bundle");
  }

  // Re-derive the split the bundle was trained on and normalize with its statistics.
  const auto folds = stratified_kfold(raw, config.folds, config.seed);
  const Fold& fold = folds.at(config.fold);
  Dataset train = raw.subset(fold.train);
  Dataset validation = raw.subset(fold.validation);
  for (auto* ds : {&train, &validation}) {
    for (auto& s : ds->samples) s = bundle.normalizer.apply(s);
    ds->normalization = bundle.normalizer;
  }

  const StrokeQuality target = config.cf.target;
  const Classifier& c = bundle.classifier;

  // Evaluation pool: validation samples currently predicted as the other class.
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    if (c.predict(validation.samples[i].frames) != target) pool.push_back(i);
  }
  Rng rng = Rng::derive(config.seed, 3001);
  rng.shuffle(std::span<std::size_t>(pool));
  pool.resize(std::min(pool.size(), config.n_eval));
  std::sort(pool.begin(), pool.end());
  std::vector<MotionSample> instances;
  for (std::size_t i : pool) instances.push_back(validation.samples[i]);

  // Outlier models see target-class training samples only.
  metrics::PointSet reference;
  for (const auto& s : train.samples) {
    if (s.label && *s.label == target) reference.add(s.frames.data());
  }
  metrics::OutlierConfig oc = config.outliers;
  oc.seed = config.seed;
  const metrics::OutlierModels outliers = metrics::fit_outlier_models(reference, oc);
  const NeighborPool neighbors(train, c, target);

  std::set<std::string> train_ids;
  for (const auto& s : train.samples) train_ids.insert(s.id);
  for (const auto& s : instances) {
    if (train_ids.count(s.id)) {
      throw config_error("evaluation instance " + s.id + " also belongs to the training split");
    }
  }

  ExplainContext ctx;
  ctx.params = config.cf;
  ctx.autoencoder = &bundle.autoencoder;
  ctx.classifier = &c;
  ctx.pool = &neighbors;
  ctx.threads = config.threads;

  CfEvaluation out;
  for (const auto& s : instances) out.instance_ids.push_back(s.id);
  out.records.resize(instances.size() * std::size(kAllMethods));
  std::size_t m = 0;
  for (CFMethod method : kAllMethods) {
    const auto items = batch_explain(instances, method, ctx);
    parallel_for(items.size(), config.threads, [&](std::size_t i) {
      InstanceRecord& rec = out.records[i * std::size(kAllMethods) + m];
      rec.instance_id = items[i].id;
      rec.method = method;
      if (!items[i].result) {
        rec.error = items[i].error;
        return;
      }
      const CFResult& r = *items[i].result;
      rec.valid = r.valid;
      rec.iterations = r.iterations;
      rec.final_prob = r.final_prob;
      rec.neighbor_id = r.neighbor_id;
      try {
        rec.values = evaluate_counterfactual(instances[i].frames, r.counterfactual, c, target, outliers);
      } catch (const std::exception& e) {
        rec.error = items[i].id + ": " + e.what();
      }
    });
    ++m;
  }
  for (const auto& r : out.records) out.failures += !r.error.empty();

  out.table.corner = "Metric";
  for (CFMethod method : kAllMethods) out.table.columns.push_back(method_label(method));
  const auto& specs = cf_metrics();
  for (std::size_t k = 0; k < specs.size(); ++k) {
    BenchmarkTable::Row row;
    row.label = fmt::format("{} {}", specs[k].label, specs[k].higher_better ? "↑" : "↓");
    for (CFMethod method : kAllMethods) {
      const Cell cell = aggregate_records(out.records, method, k);
      row.cells.push_back(cell.n ? std::optional<Cell>(cell) : std::nullopt);
    }
    out.table.rows.push_back(std::move(row));
  }
  return out;
}

void write_instance_csv(std::ostream& out, const CfEvaluation& evaluation) {
  out << "instance,method,status,valid,iterations,final_prob,neighbor";
  for (const auto& spec : cf_metrics()) out << ',' << spec.key;
  out << ",error\n";
  for (const auto& r : evaluation.records) {
    out << fmt::format("{},{},{},{},{},{},{}", r.instance_id, to_string(r.method), r.error.empty() ? "ok" : "error",
                       r.valid, r.iterations, r.final_prob, r.neighbor_id);
    for (std::size_t k = 0; k < cf_metrics().size(); ++k) {
      if (r.values.empty()) {
        out << ',';
      } else {
        out << fmt::format(",{}", r.values[k]);
      }
    }
    std::string error = r.error;
    std::replace(error.begin(), error.end(), '"', '\'');
    out << ",\"" << error << "\"\n";
  }
}

void write_aggregates_csv(std::ostream& out, const CfEvaluation& evaluation) {
  out << "method,metric,mean,sd,n\n";
  for (CFMethod method : kAllMethods) {
    for (std::size_t k = 0; k < cf_metrics().size(); ++k) {
      const Cell c = aggregate_records(evaluation.records, method, k);
      out << fmt::format("{},{},{},{},{}\n", to_string(method), cf_metrics()[k].key, c.mean, c.sd, c.n);
    }
  }
}

void write_evaluation(const CfEvaluation& evaluation, const std::filesystem::path& dir) {
  std::ostringstream instances, aggregates;
  write_instance_csv(instances, evaluation);
  write_aggregates_csv(aggregates, evaluation);
  write_text_file(dir / "instances.csv", instances.str());
  write_text_file(dir / "aggregates.csv", aggregates.str());
  write_text_file(dir / "table.md", emit_table(evaluation.table, TableFormat::markdown));
  write_text_file(dir / "table.csv", emit_table(evaluation.table, TableFormat::csv));
}

}  // namespace mg
