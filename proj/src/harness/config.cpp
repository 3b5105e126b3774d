#include <fstream>
#include <set>

#include "motionguide/harness.hpp"
#include "motionguide/motion_io.hpp"

namespace mg {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (data_path.empty()) synthetic.validate();
  if (frames < 2) throw config_error("frames must be at least 2");
  model.validate(data_path.empty() ? synthetic.frames : frames);
  cf.validate();
  if (folds < 2) throw config_error("folds must be at least 2");
  if (fold >= folds) throw config_error("fold " + std::to_string(fold) + " is out of range for " +
                                        std::to_string(folds) + " folds");
  if (n_eval == 0) throw config_error("n_eval must be positive");
  if (augment.scale_min > augment.scale_max) throw config_error("augment scale_min exceeds scale_max");
  if (augment.noise_sd < 0.0) throw config_error("augment noise_sd must be >= 0");
  if (outliers.n_trees == 0 || outliers.max_neighbors == 0 || outliers.max_subsample < 2) {
    throw config_error("outlier model sizes must be positive");
  }
  if (!(outliers.nu > 0.0 && outliers.nu <= 1.0)) throw config_error("outliers nu must lie in (0, 1]");
}

namespace {

// Reads the keys of one JSON object, rejecting any it does not recognise.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw config_error(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw config_error(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw config_error(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const ExperimentConfig& c) {
  const auto& s = c.synthetic;
  const auto& m = c.model;
  return json{
      {"synthetic",
       {{"n_per_class", s.n_per_class},
        {"frames", s.frames},
        {"joints", s.joints},
        {"class_separation", s.class_separation},
        {"noise_sd", s.noise_sd},
        {"frame_rate", s.frame_rate},
        {"stroke_type", to_string(s.stroke_type)}}},
      {"data_path", c.data_path},
      {"frames", c.frames},
      {"model",
       {{"channels", m.channels},
        {"kernel", m.kernel},
        {"latent_dim", m.latent_dim},
        {"pool", m.pool},
        {"segments", m.segments},
        {"mlp_hidden", m.mlp_hidden},
        {"epochs", m.epochs},
        {"ae_epochs", m.ae_epochs},
        {"batch_size", m.batch_size},
        {"learning_rate", m.learning_rate}}},
      {"classifier", to_string(c.classifier)},
      {"augmentation", c.augmentation},
      {"augment",
       {{"jitter", c.augment.jitter},
        {"noise_sd", c.augment.noise_sd},
        {"amplitude_scale", c.augment.amplitude_scale},
        {"scale_min", c.augment.scale_min},
        {"scale_max", c.augment.scale_max}}},
      {"cf",
       {{"target", to_string(c.cf.target)},
        {"learning_rate", c.cf.learning_rate},
        {"max_iter", c.cf.max_iter},
        {"tau", c.cf.tau}}},
      {"outliers",
       {{"max_neighbors", c.outliers.max_neighbors},
        {"n_trees", c.outliers.n_trees},
        {"max_subsample", c.outliers.max_subsample},
        {"nu", c.outliers.nu},
        {"svm_iterations", c.outliers.svm_iterations}}},
      {"folds", c.folds},
      {"fold", c.fold},
      {"n_eval", c.n_eval},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"threads", c.threads},
  };
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  Reader r(j, "config");
  if (const json* s = r.child("synthetic")) {
    Reader rs(*s, "config.synthetic");
    std::string stroke = to_string(c.synthetic.stroke_type);
    rs.get("n_per_class", c.synthetic.n_per_class);
    rs.get("frames", c.synthetic.frames);
    rs.get("joints", c.synthetic.joints);
    rs.get("class_separation", c.synthetic.class_separation);
    rs.get("noise_sd", c.synthetic.noise_sd);
    rs.get("frame_rate", c.synthetic.frame_rate);
    rs.get("stroke_type", stroke);
    rs.finish();
    c.synthetic.stroke_type = parse_stroke_type(stroke);
  }
  r.get("data_path", c.data_path);
  r.get("frames", c.frames);
  if (const json* m = r.child("model")) {
    Reader rm(*m, "config.model");
    rm.get("channels", c.model.channels);
    rm.get("kernel", c.model.kernel);
    rm.get("latent_dim", c.model.latent_dim);
    rm.get("pool", c.model.pool);
    rm.get("segments", c.model.segments);
    rm.get("mlp_hidden", c.model.mlp_hidden);
    rm.get("epochs", c.model.epochs);
    rm.get("ae_epochs", c.model.ae_epochs);
    rm.get("batch_size", c.model.batch_size);
    rm.get("learning_rate", c.model.learning_rate);
    rm.finish();
  }
  std::string kind = to_string(c.classifier);
  r.get("classifier", kind);
  c.classifier = parse_classifier_kind(kind);
  r.get("augmentation", c.augmentation);
  if (const json* a = r.child("augment")) {
    Reader ra(*a, "config.augment");
    ra.get("jitter", c.augment.jitter);
    ra.get("noise_sd", c.augment.noise_sd);
    ra.get("amplitude_scale", c.augment.amplitude_scale);
    ra.get("scale_min", c.augment.scale_min);
    ra.get("scale_max", c.augment.scale_max);
    ra.finish();
  }
  if (const json* f = r.child("cf")) {
    Reader rf(*f, "config.cf");
    std::string target = to_string(c.cf.target);
    rf.get("target", target);
    rf.get("learning_rate", c.cf.learning_rate);
    rf.get("max_iter", c.cf.max_iter);
    rf.get("tau", c.cf.tau);
    rf.finish();
    c.cf.target = parse_quality(target);
  }
  if (const json* o = r.child("outliers")) {
    Reader ro(*o, "config.outliers");
    ro.get("max_neighbors", c.outliers.max_neighbors);
    ro.get("n_trees", c.outliers.n_trees);
    ro.get("max_subsample", c.outliers.max_subsample);
    ro.get("nu", c.outliers.nu);
    ro.get("svm_iterations", c.outliers.svm_iterations);
    ro.finish();
  }
  r.get("folds", c.folds);
  r.get("fold", c.fold);
  r.get("n_eval", c.n_eval);
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  r.get("threads", c.threads);
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  write_text_file(path, to_json(config).dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw io_error("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << text;
  if (!out) throw io_error("write failed for " + path.string());
}

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.data_path.empty()) {
    SynthConfig sc = config.synthetic;
    sc.seed = config.seed;
    return generate_synthetic(sc);
  }
  return load_motion_file(config.data_path, config.frames);
}

PreparedFold prepare_fold(const ExperimentConfig& config, const Dataset& raw, std::size_t fold_id) {
  if (raw.normalization) throw config_error("prepare_fold expects raw (unnormalized) data");
  auto folds = stratified_kfold(raw, config.folds, config.seed);
  if (fold_id >= folds.size()) throw config_error("fold " + std::to_string(fold_id) + " is out of range");
  PreparedFold out;
  out.fold = std::move(folds[fold_id]);
  NormalizedDataset normalized = normalize(raw, out.fold.train);
  out.normalizer = std::move(normalized.normalizer);
  out.train = normalized.data.subset(out.fold.train);
  out.validation = normalized.data.subset(out.fold.validation);
  return out;
}

Dataset augmented_training_set(const ExperimentConfig& config, const Dataset& train, std::size_t fold_id) {
  Dataset out = train;
  if (!config.augmentation) return out;
  const std::uint64_t fold_seed = Rng::derive_seed(config.seed, 4000 + fold_id);
  out.samples.reserve(2 * train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    MotionSample s = augment(train.samples[i], config.augment, Rng::derive_seed(fold_seed, i));
    s.id += "+aug";
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace mg
