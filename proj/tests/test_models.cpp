#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "motionguide/bundle.hpp"
#include "motionguide/harness.hpp"
#include "motionguide/errors.hpp"
#include "motionguide/metrics/classification.hpp"

using namespace mg;
using nd::Tensor;
namespace fs = std::filesystem;

namespace {

struct Split {
  Dataset train;
  Dataset validation;
};

const Split& split() {
  static const Split s = [] {
    SynthConfig cfg;
    cfg.n_per_class = 20;
    const Dataset raw = generate_synthetic(cfg);
    const auto folds = stratified_kfold(raw, 4, 7);
    const auto normalized = normalize(raw, folds[0].train);
    return Split{normalized.data.subset(folds[0].train), normalized.data.subset(folds[0].validation)};
  }();
  return s;
}

ModelHyperparams small_hp() {
  ModelHyperparams hp;
  hp.epochs = 20;
  hp.ae_epochs = 20;
  return hp;
}

const TrainedClassifier& trained_classifier() {
  static const TrainedClassifier c = train_classifier(split().train, small_hp());
  return c;
}

const TrainedAutoencoder& trained_autoencoder() {
  static const TrainedAutoencoder ae = train_autoencoder(split().train, small_hp());
  return ae;
}

ModelBundle small_bundle() {
  ModelBundle b;
  b.schema = generate_synthetic(SynthConfig{.n_per_class = 1}).schema;
  b.normalizer = *split().train.normalization;
  b.classifier = trained_classifier().model;
  b.autoencoder = trained_autoencoder().model;
  b.manifest = {{"seed", 7}, {"fold", 0}};
  return b;
}

}  // namespace

TEST_CASE("classifier probabilities form a distribution") {
  const ModelHyperparams hp;
  for (ClassifierKind kind : {ClassifierKind::conv1d, ClassifierKind::mlp}) {
    const Classifier c = Classifier::create(kind, 60, 15, hp);
    for (const auto& s : split().validation.samples) {
      const auto p = c.predict_proba(s.frames);
      CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-9);
      CHECK(p[0] >= 0.0);
      CHECK(p[1] >= 0.0);
      CHECK(c.predict_proba(s.frames) == p);
      CHECK(c.predict(s.frames) == argmax(p));
    }
  }
  CHECK(argmax({0.5, 0.5}) == StrokeQuality::poor);
  CHECK(argmax({0.4, 0.6}) == StrokeQuality::good);
}

TEST_CASE("classifier input shape is enforced") {
  const Classifier c = Classifier::create(ClassifierKind::conv1d, 60, 15, ModelHyperparams{});
  CHECK_THROWS_AS(c.predict_proba(Tensor({59, 15})), Error);
  CHECK_THROWS_AS(c.predict_proba(Tensor({60, 14})), Error);
}

TEST_CASE("hyperparameter validation") {
  ModelHyperparams hp;
  CHECK_NOTHROW(hp.validate(60));
  hp.kernel = 4;
  CHECK_THROWS_AS(hp.validate(60), Error);
  hp = {};
  hp.pool = 7;
  CHECK_THROWS_AS(hp.validate(60), Error);
  hp = {};
  hp.segments = 7;
  CHECK_THROWS_AS(hp.validate(60), Error);
  hp = {};
  hp.epochs = 0;
  CHECK_THROWS_AS(hp.validate(60), Error);
  CHECK_THROWS_AS(parse_classifier_kind("lstm"), Error);
}

TEST_CASE("classifier training lowers the loss and is reproducible") {
  const auto& c = trained_classifier();
  REQUIRE(c.trace.train_loss.size() == 20);
  CHECK(c.trace.train_loss[19] < c.trace.train_loss[0]);

  const TrainedClassifier again = train_classifier(split().train, small_hp());
  CHECK(again.trace.train_loss == c.trace.train_loss);
  for (const auto& s : split().validation.samples) {
    CHECK(again.model.predict_proba(s.frames) == c.model.predict_proba(s.frames));
  }

  const TrainedClassifier with_val = train_classifier(split().train, small_hp(), ClassifierKind::conv1d,
                                                      &split().validation);
  CHECK(with_val.trace.validation_loss.size() == 20);
  CHECK(with_val.trace.train_loss == c.trace.train_loss);
}

TEST_CASE("trained classifier beats the majority baseline on a held-out fold") {
  ExperimentConfig cfg;
  cfg.synthetic.n_per_class = 50;
  const PreparedFold fold = prepare_fold(cfg, load_dataset(cfg), 0);
  const Dataset train = augmented_training_set(cfg, fold.train, 0);
  const Classifier c = train_classifier(train, cfg.model).model;
  std::vector<std::size_t> pred, base;
  const auto majority = MajorityBaseline::fit(train.labels());
  for (const auto& s : fold.validation.samples) {
    pred.push_back(class_index(c.predict(s.frames)));
    base.push_back(class_index(majority.predict()));
  }
  const auto labels = fold.validation.labels();
  CHECK(metrics::classification_scores(pred, labels).balanced_accuracy >= 0.9);
  CHECK(metrics::classification_scores(base, labels).balanced_accuracy == 0.5);
}

TEST_CASE("majority baseline ties go to the lower class") {
  CHECK(MajorityBaseline::fit(std::vector<std::size_t>{0, 1, 1}).predict() == StrokeQuality::good);
  CHECK(MajorityBaseline::fit(std::vector<std::size_t>{0, 0, 1}).predict() == StrokeQuality::poor);
  CHECK(MajorityBaseline::fit(std::vector<std::size_t>{1, 0}).predict() == StrokeQuality::poor);
}

TEST_CASE("divergent training reports a numerical error") {
  ModelHyperparams hp = small_hp();
  hp.learning_rate = 1e300;
  try {
    train_classifier(split().train, hp);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::numerical);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
  CHECK_THROWS_AS(train_autoencoder(split().train, hp), Error);

  Dataset bad = split().train;
  bad.samples[3].frames(5, 5) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train_classifier(bad, small_hp()), Error);
  CHECK_THROWS_AS(train_autoencoder(bad, small_hp()), Error);
}

TEST_CASE("autoencoder shape contract and determinism") {
  const Autoencoder ae = Autoencoder::create(60, 15, ModelHyperparams{});
  const Tensor& x = split().train.samples[0].frames;
  const Tensor z = ae.encode(x);
  CHECK(z.shape() == nd::Shape{16});
  CHECK(ae.decode(z).shape() == x.shape());
  CHECK(ae.encode(x) == z);
  CHECK_THROWS_AS(ae.encode(Tensor({60, 3})), Error);
  CHECK_THROWS_AS(ae.decode(Tensor({15})), Error);
}

TEST_CASE("decoder is continuous at the 1e-9 scale") {
  const Autoencoder& ae = trained_autoencoder().model;
  Tensor z = ae.encode(split().train.samples[1].frames);
  const Tensor a = ae.decode(z);
  const double step = 1e-9 / std::sqrt(static_cast<double>(z.size()));
  for (double& v : z.data()) v += step;
  const Tensor b = ae.decode(z);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6);
}

TEST_CASE("training improves reconstruction") {
  const auto& trained = trained_autoencoder();
  const Autoencoder untrained = Autoencoder::create(60, 15, small_hp());
  const double before = reconstruction_rmse(untrained, split().train);
  const double after = reconstruction_rmse(trained.model, split().train);
  MESSAGE("reconstruction RMSE untrained ", before, ", trained ", after);
  CHECK(after < before);
  CHECK(trained.trace.train_loss.back() < trained.trace.train_loss.front());
}

TEST_CASE("autoencoder loss falls over the first five epochs") {
  std::vector<double> mean(5, 0.0);
  for (std::uint64_t seed : {1, 2, 3}) {
    ModelHyperparams hp = small_hp();
    hp.ae_epochs = 5;
    hp.seed = seed;
    const auto trace = train_autoencoder(split().train, hp).trace.train_loss;
    for (std::size_t e = 0; e < 5; ++e) mean[e] += trace[e] / 3.0;
  }
  for (std::size_t e = 1; e < 5; ++e) CHECK(mean[e] < mean[e - 1]);
}

TEST_CASE("bundle round trip preserves predictions exactly") {
  const ModelBundle b = small_bundle();
  const fs::path path = fs::temp_directory_path() / "motionguide_test_models.mgb";
  save_bundle(b, path);
  const ModelBundle back = load_bundle(path);
  CHECK(back.manifest["seed"] == 7);
  CHECK(back.normalizer.mean == b.normalizer.mean);
  CHECK(back.normalizer.scale == b.normalizer.scale);
  CHECK(back.schema.joint_names == b.schema.joint_names);
  CHECK(back.classifier.kind() == b.classifier.kind());
  for (const auto& s : split().validation.samples) {
    CHECK(back.classifier.predict_proba(s.frames) == b.classifier.predict_proba(s.frames));
    CHECK(back.autoencoder.reconstruct(s.frames) == b.autoencoder.reconstruct(s.frames));
  }
  CHECK(serialize_bundle(back) == serialize_bundle(b));
}

TEST_CASE("corrupt bundles raise format errors") {
  const auto bytes = serialize_bundle(small_bundle());
  auto expect_format = [](std::span<const std::uint8_t> data) {
    try {
      deserialize_bundle(data);
      FAIL("expected a format error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::format);
    }
  };
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    expect_format(std::span(bytes).first(cut));
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_format(bad_magic);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  expect_format(flipped);
  auto version = bytes;
  version[8] = 99;
  expect_format(version);
  CHECK_THROWS_AS(load_bundle(fs::temp_directory_path() / "motionguide_missing.mgb"), Error);
}
