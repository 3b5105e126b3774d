#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "motionguide/harness.hpp"
#include "motionguide/metrics/report.hpp"
#include "support/oracles.hpp"

using namespace mg;
using nd::Tensor;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.synthetic.n_per_class = 30;
  cfg.folds = 3;
  cfg.model.epochs = 30;
  cfg.model.ae_epochs = 60;
  cfg.threads = 1;
  return cfg;
}

struct Fixture {
  ModelBundle bundle;
  PreparedFold fold;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    const ExperimentConfig cfg = small_config();
    const Dataset raw = load_dataset(cfg);
    return Fixture{train_bundle(cfg, raw), prepare_fold(cfg, raw, 0)};
  }();
  return f;
}

double target_prob(const Classifier& c, const Tensor& x, StrokeQuality target) {
  return c.predict_proba(x)[class_index(target)];
}

}  // namespace

TEST_CASE("parameters and method names") {
  CFParams p;
  CHECK_NOTHROW(p.validate());
  p.tau = 1.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.learning_rate = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  for (CFMethod m : kAllMethods) CHECK(parse_cf_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_cf_method("nn-cosine"), Error);
}

TEST_CASE("guard at entry returns the reconstruction untouched") {
  const auto& f = fixture();
  const Autoencoder& ae = f.bundle.autoencoder;
  const Classifier& c = f.bundle.classifier;
  std::size_t checked = 0;
  for (const auto& s : f.fold.validation.samples) {
    const Tensor recon = ae.decode(ae.encode(s.frames));
    CFParams params;
    params.target = argmax(c.predict_proba(recon));
    if (target_prob(c, recon, params.target) < params.tau) continue;
    const CFResult r = latent_cf(s.frames, params, ae, c);
    CHECK(r.iterations == 0);
    CHECK(r.counterfactual == recon);
    CHECK(r.valid);
    CHECK(r.loss_trace.size() == 1);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("zero budget reports the initial probability") {
  const auto& f = fixture();
  const Autoencoder& ae = f.bundle.autoencoder;
  const Classifier& c = f.bundle.classifier;
  for (const auto& s : f.fold.validation.samples) {
    CFParams params;
    params.max_iter = 0;
    const CFResult r = latent_cf(s.frames, params, ae, c);
    const Tensor recon = ae.decode(ae.encode(s.frames));
    CHECK(r.iterations == 0);
    CHECK(r.counterfactual == recon);
    CHECK(r.final_prob == target_prob(c, recon, params.target));
    CHECK(r.valid == (r.final_prob >= params.tau));
  }
}

TEST_CASE("latent search contract on poor-class inputs") {
  const auto& f = fixture();
  const Autoencoder& ae = f.bundle.autoencoder;
  const Classifier& c = f.bundle.classifier;
  CFParams params;
  std::size_t n = 0, valid = 0;
  for (const auto& s : f.fold.validation.samples) {
    if (c.predict(s.frames) == params.target) continue;
    const CFResult r = latent_cf(s.frames, params, ae, c);
    ++n;
    valid += r.valid;
    CHECK(r.method == CFMethod::latent);
    CHECK(r.counterfactual.shape() == s.frames.shape());
    CHECK(r.loss_trace.size() == r.iterations + 1);
    CHECK(r.iterations <= params.max_iter);
    CHECK(r.final_prob == target_prob(c, r.counterfactual, params.target));
    CHECK(r.valid == (r.final_prob >= params.tau));
    if (r.valid) CHECK(argmax(c.predict_proba(r.counterfactual)) == params.target);

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < r.loss_trace.size(); ++k) {
      CHECK(r.loss_trace[k].iter == k);
      const double next = std::min(best, r.loss_trace[k].loss);
      CHECK(next <= best);
      best = next;
    }
    // The returned iterate is the best one seen: cross-entropy is -log p.
    CHECK(-std::log(r.final_prob) == doctest::Approx(best).epsilon(1e-9));
    // The loop stops at the first iterate over tau.
    for (std::size_t k = 0; k + 1 < r.loss_trace.size(); ++k) CHECK(std::exp(-r.loss_trace[k].loss) < params.tau);
  }
  MESSAGE(valid, " of ", n, " latent counterfactuals valid");
  CHECK(n > 5);
}

TEST_CASE("non-convergence returns the best iterate flagged invalid") {
  const auto& f = fixture();
  const Classifier& c = f.bundle.classifier;
  CFParams params;
  params.max_iter = 2;
  params.learning_rate = 1e-4;
  std::size_t checked = 0;
  for (const auto& s : f.fold.validation.samples) {
    if (c.predict(s.frames) == params.target) continue;
    const CFResult r = latent_cf(s.frames, params, f.bundle.autoencoder, c);
    if (r.valid) continue;
    CHECK(r.iterations == 2);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : r.loss_trace) best = std::min(best, p.loss);
    CHECK(-std::log(r.final_prob) == doctest::Approx(best).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("latent search is deterministic and checks shapes") {
  const auto& f = fixture();
  const auto& s = f.fold.validation.samples.front();
  const CFResult a = latent_cf(s.frames, CFParams{}, f.bundle.autoencoder, f.bundle.classifier);
  const CFResult b = latent_cf(s.frames, CFParams{}, f.bundle.autoencoder, f.bundle.classifier);
  CHECK(a.counterfactual == b.counterfactual);
  CHECK(a.iterations == b.iterations);
  CHECK(a.final_prob == b.final_prob);
  CHECK_THROWS_AS(latent_cf(Tensor({30, 15}), CFParams{}, f.bundle.autoencoder, f.bundle.classifier), Error);
}

TEST_CASE("non-finite loss aborts with the partial trace") {
  const auto& f = fixture();
  Classifier broken = f.bundle.classifier;
  broken.network().params().begin()->second.value.fill(std::numeric_limits<double>::quiet_NaN());
  const auto& s = f.fold.validation.samples.front();
  try {
    latent_cf(s.frames, CFParams{}, f.bundle.autoencoder, broken);
    FAIL("expected an abort");
  } catch (const CfAborted& e) {
    CHECK(e.category() == ErrorCategory::numerical);
    CHECK(e.partial().loss_trace.size() == 1);
    CHECK(e.partial().iterations == 0);
  }

  ExplainContext ctx;
  ctx.autoencoder = &f.bundle.autoencoder;
  ctx.classifier = &broken;
  ctx.threads = 2;
  const auto items = batch_explain(std::span(f.fold.validation.samples).first(3), CFMethod::latent, ctx);
  REQUIRE(items.size() == 3);
  for (const auto& item : items) {
    CHECK_FALSE(item.result);
    CHECK(item.error_category == ErrorCategory::numerical);
    CHECK(item.error.find(item.id) == 0);
  }
}

TEST_CASE("nearest neighbour of a pool member is itself") {
  const auto& f = fixture();
  const NeighborPool pool(f.fold.train, f.bundle.classifier, StrokeQuality::good);
  REQUIRE(pool.size() > 0);
  for (CFMethod m : {CFMethod::nn_l1, CFMethod::nn_l2, CFMethod::nn_dtw}) {
    const MotionSample& member = *pool.candidates()[pool.size() / 2];
    const CFResult r = nn_cf(member.frames, m, pool);
    CHECK(r.neighbor_id == member.id);
    CHECK(r.neighbor_distance == 0.0);
    CHECK(r.valid);
    CHECK(r.counterfactual == member.frames);
    CHECK(r.final_prob == target_prob(f.bundle.classifier, member.frames, StrokeQuality::good));
  }
}

TEST_CASE("nearest of two candidates and tie breaking") {
  const auto& f = fixture();
  const NeighborPool full(f.fold.train, f.bundle.classifier, StrokeQuality::good);
  REQUIRE(full.size() >= 2);
  Dataset two;
  two.schema = f.fold.train.schema;
  two.samples = {*full.candidates()[0], *full.candidates()[1]};
  two.samples[0].id = "b";
  two.samples[1].id = "a";

  Tensor near_b = two.samples[0].frames;
  for (double& v : near_b.data()) v += 1e-3;
  for (CFMethod m : {CFMethod::nn_l1, CFMethod::nn_l2, CFMethod::nn_dtw}) {
    CHECK(nn_cf(near_b, StrokeQuality::good, m, two, f.bundle.classifier).neighbor_id == "b");
  }

  two.samples[1].frames = two.samples[0].frames;  // exact tie
  for (CFMethod m : {CFMethod::nn_l1, CFMethod::nn_l2, CFMethod::nn_dtw}) {
    CHECK(nn_cf(near_b, StrokeQuality::good, m, two, f.bundle.classifier).neighbor_id == "a");
  }
}

TEST_CASE("1NN equals an exhaustive scan") {
  const auto& f = fixture();
  const Classifier& c = f.bundle.classifier;
  Dataset reference;
  reference.schema = f.fold.train.schema;
  reference.samples.assign(f.fold.train.samples.begin(), f.fold.train.samples.begin() + 20);
  Rng rng(31);
  for (int q = 0; q < 10; ++q) {
    Tensor x = f.fold.validation.samples[q].frames;
    for (double& v : x.data()) v += 0.3 * rng.normal();
    for (StrokeQuality target : {StrokeQuality::good, StrokeQuality::poor}) {
      for (CFMethod m : {CFMethod::nn_l1, CFMethod::nn_l2, CFMethod::nn_dtw}) {
        const auto expect = testing::brute_force_nn(x, m, reference, c, target);
        if (expect.id.empty()) continue;
        const CFResult r = nn_cf(x, target, m, reference, c);
        CHECK(r.neighbor_id == expect.id);
        CHECK(r.neighbor_distance == expect.distance);
      }
    }
  }
}

TEST_CASE("an empty pool is a no-candidate error") {
  const auto& f = fixture();
  Dataset none;
  none.schema = f.fold.train.schema;
  for (const auto& s : f.fold.train.samples) {
    if (f.bundle.classifier.predict(s.frames) == StrokeQuality::poor) none.samples.push_back(s);
  }
  try {
    nn_cf(f.fold.validation.samples[0].frames, StrokeQuality::good, CFMethod::nn_l2, none, f.bundle.classifier);
    FAIL("expected no-candidate");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::no_candidate);
  }
  const NeighborPool pool(f.fold.train, f.bundle.classifier, StrokeQuality::good);
  CHECK_THROWS_AS(nn_cf(f.fold.validation.samples[0].frames, CFMethod::latent, pool), Error);
}

TEST_CASE("batch explain preserves order and matches single calls") {
  const auto& f = fixture();
  const NeighborPool pool(f.fold.train, f.bundle.classifier, StrokeQuality::good);
  ExplainContext ctx;
  ctx.autoencoder = &f.bundle.autoencoder;
  ctx.classifier = &f.bundle.classifier;
  ctx.pool = &pool;

  CHECK(batch_explain({}, CFMethod::latent, ctx).empty());

  const auto inputs = std::span(f.fold.validation.samples).first(6);
  for (CFMethod m : kAllMethods) {
    for (std::size_t threads : {1, 3}) {
      ctx.threads = threads;
      const auto items = batch_explain(inputs, m, ctx);
      REQUIRE(items.size() == inputs.size());
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        CHECK(items[i].id == inputs[i].id);
        REQUIRE(items[i].result);
        const CFResult single = m == CFMethod::latent
                                    ? latent_cf(inputs[i].frames, ctx.params, *ctx.autoencoder, *ctx.classifier)
                                    : nn_cf(inputs[i].frames, m, pool);
        CHECK(items[i].result->counterfactual == single.counterfactual);
        CHECK(items[i].result->iterations == single.iterations);
      }
    }
  }

  ExplainContext missing;
  CHECK_THROWS_AS(batch_explain(inputs, CFMethod::latent, missing), Error);
  CHECK_THROWS_AS(batch_explain(inputs, CFMethod::nn_l1, missing), Error);
}

TEST_CASE("one failing instance does not stop the batch") {
  const auto& f = fixture();
  std::vector<MotionSample> inputs(f.fold.validation.samples.begin(), f.fold.validation.samples.begin() + 3);
  inputs[1].frames = Tensor({30, 15});
  ExplainContext ctx;
  ctx.autoencoder = &f.bundle.autoencoder;
  ctx.classifier = &f.bundle.classifier;
  const auto items = batch_explain(inputs, CFMethod::latent, ctx);
  CHECK(items[0].result);
  CHECK_FALSE(items[1].result);
  CHECK(items[1].error_category == ErrorCategory::structural);
  CHECK(items[2].result);
}

TEST_CASE("validity counts argmax hits") {
  const auto& f = fixture();
  const Classifier& c = f.bundle.classifier;
  std::vector<CFResult> results;
  std::size_t hits = 0, misses = 0;
  for (const auto& s : f.fold.validation.samples) {
    const bool good = c.predict(s.frames) == StrokeQuality::good;
    if ((good && hits < 3) || (!good && misses < 1)) {
      CFResult r;
      r.counterfactual = s.frames;
      results.push_back(r);
      (good ? hits : misses)++;
    }
  }
  REQUIRE(results.size() == 4);
  CHECK(metrics::validity(results, c, StrokeQuality::good) == 0.75);
  CHECK(metrics::validity({}, c, StrokeQuality::good) == 0.0);
}

TEST_CASE("parallel_for visits every index once") {
  for (std::size_t threads : {0, 1, 4}) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
}
