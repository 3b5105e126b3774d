// motionguide command-line interface.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "motionguide/harness.hpp"
#include "motionguide/motion_io.hpp"

namespace fs = std::filesystem;
using namespace mg;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string method = "latent";
  std::optional<std::string> target;
  std::optional<std::string> out;
  std::string bundle;
  std::optional<std::string> data;
  std::string instance;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.target) c.cf.target = parse_quality(*o.target);
  if (o.out) c.output_dir = *o.out;
  if (o.data) c.data_path = *o.data;
  c.validate();
  return c;
}

ModelBundle bundle_for(const Options& o, const ExperimentConfig& c, const Dataset& raw) {
  if (!o.bundle.empty()) return load_bundle(o.bundle);
  std::cerr << "no --bundle given; training one for fold " << c.fold << "\n";
  return train_bundle(c, raw);
}

const MotionSample& find_instance(const Dataset& raw, const std::string& id) {
  if (id.empty()) throw config_error("--instance is required");
  for (const auto& s : raw.samples) {
    if (s.id == id) return s;
  }
  throw config_error("no sample with id '" + id + "'");
}

CFResult explain_one(const ExperimentConfig& c, const ModelBundle& bundle, const Dataset& raw,
                     const MotionSample& x, CFMethod method) {
  if (method == CFMethod::latent) return latent_cf(x.frames, c.cf, bundle.autoencoder, bundle.classifier);
  // 1NN reference: the bundle's training split.
  const auto folds = stratified_kfold(raw, c.folds, c.seed);
  Dataset train = raw.subset(folds.at(c.fold).train);
  for (auto& s : train.samples) s = bundle.normalizer.apply(s);
  return nn_cf(x.frames, method, NeighborPool(train, bundle.classifier, c.cf.target));
}

int cmd_gen_data(const Options& o) {
  ExperimentConfig c = resolve(o);
  const Dataset ds = load_dataset(c);
  const fs::path path = fs::path(c.output_dir) / "data.csv";
  fs::create_directories(c.output_dir);
  write_motion_file(ds, path);
  std::cout << fmt::format("wrote {} samples to {}\n", ds.size(), path.string());
  return 0;
}

int cmd_train(const Options& o) {
  ExperimentConfig c = resolve(o);
  const ModelBundle bundle = train_bundle(c);
  const fs::path dir = c.output_dir;
  save_bundle(bundle, dir / "bundle.mgb");
  write_text_file(dir / "manifest.json", bundle.manifest.dump(2) + "\n");
  save_config(c, dir / "config.json");
  const auto& rmse = bundle.manifest["reconstruction_rmse"];
  std::cout << fmt::format("wrote {} (reconstruction RMSE train {:.4f}, validation {:.4f})\n",
                           (dir / "bundle.mgb").string(), rmse["train"].get<double>(),
                           rmse["validation"].get<double>());
  return 0;
}

int cmd_explain(const Options& o) {
  ExperimentConfig c = resolve(o);
  const Dataset raw = load_dataset(c);
  const ModelBundle bundle = bundle_for(o, c, raw);
  const MotionSample x = bundle.normalizer.apply(find_instance(raw, o.instance));
  const CFMethod method = parse_cf_method(o.method);
  const CFResult r = explain_one(c, bundle, raw, x, method);

  nlohmann::json summary = {{"instance", x.id},       {"method", to_string(method)},
                            {"target", to_string(c.cf.target)}, {"valid", r.valid},
                            {"iterations", r.iterations},      {"final_prob", r.final_prob}};
  if (!r.neighbor_id.empty()) {
    summary["neighbor"] = r.neighbor_id;
    summary["neighbor_distance"] = r.neighbor_distance;
  }
  std::ostringstream trace;
  trace << "iter,loss\n";
  for (const auto& p : r.loss_trace) trace << fmt::format("{},{}\n", p.iter, p.loss);
  const fs::path dir = c.output_dir;
  const std::string stem = fmt::format("{}-{}", x.id, to_string(method));
  write_text_file(dir / (stem + ".json"), summary.dump(2) + "\n");
  write_text_file(dir / (stem + "-trace.csv"), trace.str());
  export_motion(x, r, bundle, dir / (stem + ".motion"));
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_export(const Options& o) {
  ExperimentConfig c = resolve(o);
  const Dataset raw = load_dataset(c);
  const ModelBundle bundle = bundle_for(o, c, raw);
  const MotionSample x = bundle.normalizer.apply(find_instance(raw, o.instance));
  const CFMethod method = parse_cf_method(o.method);
  const CFResult r = explain_one(c, bundle, raw, x, method);
  const fs::path path = fs::path(c.output_dir) / fmt::format("{}-{}.motion", x.id, to_string(method));
  export_motion(x, r, bundle, path);
  std::cout << fmt::format("wrote {} (valid: {})\n", path.string(), r.valid);
  return 0;
}

int cmd_evaluate(const Options& o) {
  ExperimentConfig c = resolve(o);
  const Dataset raw = load_dataset(c);
  const ModelBundle bundle = bundle_for(o, c, raw);
  const CfEvaluation ev = run_cf_evaluation(c, bundle, raw);
  write_evaluation(ev, c.output_dir);
  save_config(c, fs::path(c.output_dir) / "config.json");
  std::cout << fmt::format("{} instances, {} failed (instance, method) pairs\n\n", ev.instance_ids.size(),
                           ev.failures)
            << emit_table(ev.table, TableFormat::markdown);
  return 0;
}

int cmd_benchmark(const Options& o) {
  ExperimentConfig c = resolve(o);
  const CvBenchmark b = run_cv_benchmark(c);
  const fs::path dir = c.output_dir;
  std::ostringstream folds;
  write_fold_scores(folds, b.per_fold);
  write_text_file(dir / "folds.csv", folds.str());
  write_text_file(dir / "benchmark.md", emit_table(b.table, TableFormat::markdown));
  write_text_file(dir / "benchmark.csv", emit_table(b.table, TableFormat::csv));
  save_config(c, dir / "config.json");
  std::cout << emit_table(b.table, TableFormat::markdown);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual motion guidance for stroke-quality classifiers"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed (overrides the config)");
    sub->add_option("--out", o.out, "Output directory (overrides the config)");
    sub->add_option("--data", o.data, "Motion file to use instead of synthetic data");
  };
  auto cf_flags = [&](CLI::App* sub) {
    sub->add_option("--method", o.method, "latent | nn-l1 | nn-l2 | nn-dtw")
        ->check(CLI::IsMember({"latent", "nn-l1", "nn-l2", "nn-dtw"}));
    sub->add_option("--target", o.target, "Target class: poor | good")->check(CLI::IsMember({"poor", "good"}));
  };

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset to a motion file");
  common(gen);
  auto* train = app.add_subcommand("train", "Train a model bundle for the configured fold");
  common(train);
  auto* explain = app.add_subcommand("explain", "Generate one counterfactual");
  common(explain);
  cf_flags(explain);
  explain->add_option("--bundle", o.bundle, "Model bundle")->check(CLI::ExistingFile);
  explain->add_option("--instance", o.instance, "Sample id")->required();
  auto* evaluate = app.add_subcommand("evaluate", "Counterfactual evaluation table");
  common(evaluate);
  evaluate->add_option("--bundle", o.bundle, "Model bundle (trained on the fly when omitted)")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--target", o.target, "Target class: poor | good")->check(CLI::IsMember({"poor", "good"}));
  auto* benchmark = app.add_subcommand("benchmark", "Cross-validated classifier table");
  common(benchmark);
  auto* exp = app.add_subcommand("export", "Write a paired original/counterfactual motion file");
  common(exp);
  cf_flags(exp);
  exp->add_option("--bundle", o.bundle, "Model bundle")->check(CLI::ExistingFile);
  exp->add_option("--instance", o.instance, "Sample id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::config);
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o);
    if (train->parsed()) return cmd_train(o);
    if (explain->parsed()) return cmd_explain(o);
    if (evaluate->parsed()) return cmd_evaluate(o);
    if (benchmark->parsed()) return cmd_benchmark(o);
    if (exp->parsed()) return cmd_export(o);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.category()) << "): " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
