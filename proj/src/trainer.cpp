#include "mdgnn/trainer.hpp"

#include <cmath>

#include "mdgnn/errors.hpp"

namespace mdgnn {

Schedule rolling_schedule(std::size_t total_days, std::size_t train_len,
                          std::size_t val_len, std::size_t test_len) {
  if (train_len == 0 || val_len == 0 || test_len == 0) {
    throw ConfigError("schedule lengths must be positive");
  }
  if (total_days < train_len + val_len + test_len) {
    throw ConfigError("series too short: need at least " +
                      std::to_string(train_len + val_len + test_len) +
                      " days, have " + std::to_string(total_days));
  }
  Schedule folds;
  for (std::size_t start = 0;
       start + train_len + val_len + test_len <= total_days; start += test_len) {
    Fold f;
    f.train_begin = start;
    f.train_end = start + train_len;
    f.val_begin = f.train_end;
    f.val_end = f.val_begin + val_len;
    f.test_begin = f.val_end;
    f.test_end = f.test_begin + test_len;
    folds.push_back(f);
  }
  return folds;
}

std::vector<std::size_t> labeled_days(const LabelFrame& labels, std::size_t begin,
                                      std::size_t end) {
  std::vector<std::size_t> days;
  const std::size_t last = std::min<std::size_t>(end, labels.labels.cols());
  for (std::size_t t = begin; t < last; ++t) days.push_back(t);
  return days;
}

namespace {

struct DayTargets {
  std::vector<std::vector<double>> labels;
  std::vector<std::vector<char>> valid;
};

DayTargets gather_targets(const LabelFrame& frame,
                          const std::vector<std::size_t>& days) {
  DayTargets out;
  const std::size_t n = frame.labels.rows();
  for (std::size_t t : days) {
    std::vector<double> y(n);
    std::vector<char> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = frame.labels.at(i, t);
      v[i] = frame.is_valid(i, t) ? 1 : 0;
    }
    out.labels.push_back(std::move(y));
    out.valid.push_back(std::move(v));
  }
  return out;
}

double epoch_loss_and_grads(const DynamicGraph& g, const LabelFrame& frame,
                            ParamStore& store, const ModelConfig& cfg,
                            const std::vector<std::size_t>& days,
                            const DayTargets& targets) {
  Tape tape;
  ParamBinder bind(tape, store);
  auto logits_by_day = forward_logits(tape, g, bind, cfg, days);
  std::vector<Node*> logits;
  for (std::size_t t : days) logits.push_back(logits_by_day.at(t));
  Node* loss = prediction_loss(tape, logits, targets.labels, targets.valid,
                               cfg.loss, cfg.mse_tau);
  tape.backward(loss);
  store.zero_grads();
  bind.harvest_grads();
  return loss->value.at(0, 0);
}

void adam_step(ParamStore& store, const TrainConfig& cfg, std::size_t step) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (const auto& name : store.names()) {
    auto& e = store.at(name);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad.data()[i];
      double& m = e.adam_m.data()[i];
      double& v = e.adam_v.data()[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      e.value.data()[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double mean_ic(const std::vector<DayScores>& days) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& s : days) {
    const auto ic = daily_ic(s);
    if (ic) {
      acc += *ic;
      ++n;
    }
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace

std::vector<DayScores> score_days(const DynamicGraph& g, const LabelFrame& labels,
                                  ParamStore& params, const ModelConfig& cfg,
                                  const std::vector<std::size_t>& days,
                                  std::vector<FusionWeightRecord>* fusion_log) {
  std::vector<DayScores> out;
  if (days.empty()) return out;
  Tape tape;
  ParamBinder bind(tape, params);
  auto logits = forward_logits(tape, g, bind, cfg, days, fusion_log);
  const std::size_t n = g.n_stocks();
  for (std::size_t t : days) {
    DayScores s;
    s.day = t;
    s.predictions = sigmoid_values(logits.at(t));
    s.returns.resize(n);
    s.valid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.returns[i] = labels.labels.at(i, t);
      s.valid[i] = labels.is_valid(i, t) ? 1 : 0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

TrainResult train(const DynamicGraph& g, const LabelFrame& labels,
                  const Fold& fold, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg) {
  const auto train_days = labeled_days(labels, fold.train_begin, fold.train_end);
  const auto val_days = labeled_days(labels, fold.val_begin, fold.val_end);
  const std::size_t min_days =
      (model_cfg.no_temporal ? 0 : model_cfg.temporal.window) + 2;
  if (model_cfg.kind == ModelKind::MDGNN && train_days.size() < min_days) {
    throw ConfigError("training window has " + std::to_string(train_days.size()) +
                      " labeled days; need at least " + std::to_string(min_days));
  }
  const auto targets = gather_targets(labels, train_days);

  TrainResult result;
  init_model_params(result.params, model_cfg, train_cfg.seed);
  ParamStore best = result.params;
  double best_ic = -2.0;
  std::size_t best_epoch = 0, since_best = 0;

  for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    double loss = 0.0;
    try {
      loss = epoch_loss_and_grads(g, labels, result.params, model_cfg,
                                  train_days, targets);
    } catch (const NumericError&) {
      result.aborted_non_finite = true;
      break;  // keep the last finite checkpoint
    }
    result.train_loss_curve.push_back(loss);
    adam_step(result.params, train_cfg, epoch + 1);

    double val_ic = 0.0;
    if (!val_days.empty()) {
      val_ic = mean_ic(score_days(g, labels, result.params, model_cfg, val_days));
    }
    result.val_ic_curve.push_back(val_ic);
    if (val_ic > best_ic) {
      best_ic = val_ic;
      best = result.params;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > train_cfg.patience) {
      break;
    }
  }

  result.params = std::move(best);
  result.best_epoch = best_epoch;
  result.best_val_ic = best_ic == -2.0 ? 0.0 : best_ic;
  return result;
}

}  // namespace mdgnn
