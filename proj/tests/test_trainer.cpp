#include <cmath>

#include "doctest.h"
#include "mdgnn/errors.hpp"
#include "mdgnn/synthetic.hpp"
#include "mdgnn/trainer.hpp"

using namespace mdgnn;

namespace {

ModelConfig toy_model(const MarketConfig& mc) {
  ModelConfig m;
  m.encoder.d_in = mc.d_in;
  m.encoder.d_e = mc.d_e;
  m.encoder.d_h = 8;
  m.encoder.layers = 1;
  m.encoder.heads = 2;
  m.temporal.d_h = 8;
  m.temporal.window = 2;
  m.temporal.heads = 2;
  return m;
}

}  // namespace

TEST_CASE("rolling_schedule arithmetic") {
  SUBCASE("T=200 with (120,20,60) gives exactly one fold") {
    const Schedule s = rolling_schedule(200, 120, 20, 60);
    REQUIRE(s.size() == 1);
    CHECK(s[0].train_begin == 0);
    CHECK(s[0].train_end == 120);
    CHECK(s[0].val_end == 140);
    CHECK(s[0].test_end == 200);
  }
  SUBCASE("T=260 gives two folds, second test starts where the first ends") {
    const Schedule s = rolling_schedule(260, 120, 20, 60);
    REQUIRE(s.size() == 2);
    CHECK(s[0].test_begin == 140);
    CHECK(s[0].test_end == 200);
    CHECK(s[1].test_begin == 200);
    CHECK(s[1].test_end == 260);
    CHECK(s[1].train_begin == 60);
  }
  SUBCASE("full-scale proportions give seven folds") {
    // ~2.5 trading years of test after a half-year train and a month of val
    const Schedule s = rolling_schedule(560, 120, 20, 60);
    CHECK(s.size() == 7);
  }
  SUBCASE("too-short series is rejected") {
    CHECK_THROWS_AS(rolling_schedule(100, 120, 20, 60), ConfigError);
    CHECK_THROWS_AS(rolling_schedule(100, 0, 20, 60), ConfigError);
  }
  SUBCASE("folds are contiguous and ordered") {
    for (const Fold& f : rolling_schedule(300, 50, 10, 30)) {
      CHECK(f.train_end == f.val_begin);
      CHECK(f.val_end == f.test_begin);
      CHECK(f.train_begin < f.train_end);
      CHECK(f.val_begin < f.val_end);
      CHECK(f.test_begin < f.test_end);
    }
  }
}

TEST_CASE("lr=0 leaves parameters bitwise unchanged") {
  MarketConfig mc = preset("toy");
  mc.days = 14;
  mc.seed = 2;
  const DynamicGraph g = generate(mc);
  const LabelFrame labels = build_labels(g);
  const ModelConfig model = toy_model(mc);
  TrainConfig tc;
  tc.epochs = 3;
  tc.lr = 0.0;
  tc.seed = 5;
  const Fold fold{0, 8, 8, 10, 10, 13};
  const TrainResult r = train(g, labels, fold, model, tc);
  ParamStore fresh;
  init_model_params(fresh, model, tc.seed);
  CHECK(r.params.values_equal(fresh));
  CHECK(r.train_loss_curve.size() == 3);
}

TEST_CASE("training is deterministic in the seed") {
  MarketConfig mc = preset("toy");
  mc.days = 14;
  mc.seed = 3;
  const DynamicGraph g = generate(mc);
  const LabelFrame labels = build_labels(g);
  const ModelConfig model = toy_model(mc);
  TrainConfig tc;
  tc.epochs = 4;
  tc.seed = 9;
  const Fold fold{0, 8, 8, 10, 10, 13};
  const TrainResult a = train(g, labels, fold, model, tc);
  const TrainResult b = train(g, labels, fold, model, tc);
  CHECK(a.params.values_equal(b.params));
  CHECK(a.train_loss_curve == b.train_loss_curve);
  CHECK(a.val_ic_curve == b.val_ic_curve);
  tc.seed = 10;
  const TrainResult c = train(g, labels, fold, model, tc);
  CHECK_FALSE(a.params.values_equal(c.params));
}

TEST_CASE("loss drops below the ln 2 coin-flip baseline on planted data") {
  MarketConfig mc = preset("toy");
  mc.days = 24;
  mc.seed = 4;
  const DynamicGraph g = generate(mc);
  const LabelFrame labels = build_labels(g);
  const ModelConfig model = toy_model(mc);
  TrainConfig tc;
  tc.epochs = 60;
  tc.patience = 1000;  // no early stop; watch the raw curve
  tc.seed = 1;
  const Fold fold{0, 18, 18, 21, 21, 23};
  const TrainResult r = train(g, labels, fold, model, tc);
  REQUIRE(!r.train_loss_curve.empty());
  double best = r.train_loss_curve[0];
  for (double v : r.train_loss_curve) best = std::min(best, v);
  CHECK(best < std::log(2.0));
  CHECK_FALSE(r.aborted_non_finite);
}

TEST_CASE("early stopping keeps the best-validation checkpoint") {
  MarketConfig mc = preset("toy");
  mc.days = 20;
  mc.seed = 6;
  const DynamicGraph g = generate(mc);
  const LabelFrame labels = build_labels(g);
  const ModelConfig model = toy_model(mc);
  TrainConfig tc;
  tc.epochs = 30;
  tc.patience = 3;
  tc.seed = 2;
  const Fold fold{0, 12, 12, 16, 16, 19};
  const TrainResult r = train(g, labels, fold, model, tc);
  REQUIRE(!r.val_ic_curve.empty());
  double best = r.val_ic_curve[0];
  std::size_t best_at = 0;
  for (std::size_t e = 0; e < r.val_ic_curve.size(); ++e) {
    if (r.val_ic_curve[e] > best) {
      best = r.val_ic_curve[e];
      best_at = e;
    }
  }
  CHECK(r.best_epoch == best_at);
  CHECK(r.best_val_ic == best);
  // stops within patience+1 epochs of the best
  CHECK(r.val_ic_curve.size() <= best_at + tc.patience + 2);
}

TEST_CASE("a too-short training window is rejected") {
  MarketConfig mc = preset("toy");
  mc.days = 14;
  const DynamicGraph g = generate(mc);
  const LabelFrame labels = build_labels(g);
  ModelConfig model = toy_model(mc);
  model.temporal.window = 8;
  TrainConfig tc;
  const Fold fold{0, 5, 5, 7, 7, 9};  // 5 train days < window+2
  CHECK_THROWS_AS(train(g, labels, fold, model, tc), ConfigError);
}

TEST_CASE("scored test days use realized labels and valid masks") {
  MarketConfig mc = preset("toy");
  mc.days = 14;
  mc.seed = 8;
  const DynamicGraph g = generate(mc);
  const LabelFrame labels = build_labels(g);
  const ModelConfig model = toy_model(mc);
  ParamStore params;
  init_model_params(params, model, 3);
  const auto days = labeled_days(labels, 10, 13);
  REQUIRE(days == std::vector<std::size_t>({10, 11, 12}));
  auto scored = score_days(g, labels, params, model, days);
  REQUIRE(scored.size() == 3);
  for (std::size_t d = 0; d < scored.size(); ++d) {
    CHECK(scored[d].day == days[d]);
    REQUIRE(scored[d].predictions.size() == g.n_stocks());
    for (std::size_t i = 0; i < g.n_stocks(); ++i) {
      CHECK(scored[d].returns[i] == labels.labels.at(i, days[d]));
      CHECK(scored[d].predictions[i] > 0.0);
      CHECK(scored[d].predictions[i] < 1.0);
    }
  }
  // labeled_days never includes the unlabeled final price day
  CHECK(labeled_days(labels, 10, 99).back() == labels.labels.cols() - 1);
}
