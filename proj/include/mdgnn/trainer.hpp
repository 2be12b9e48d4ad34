#pragma once

#include <cstdint>
#include <vector>

#include "mdgnn/graph.hpp"
#include "mdgnn/metrics.hpp"
#include "mdgnn/model.hpp"

namespace mdgnn {

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t patience = 20;  // early-stop on validation IC
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
};

// Half-open day intervals, train < validation < test.
struct Fold {
  std::size_t train_begin = 0, train_end = 0;
  std::size_t val_begin = 0, val_end = 0;
  std::size_t test_begin = 0, test_end = 0;
};

using Schedule = std::vector<Fold>;

// Consecutive folds stepping by test_len.
Schedule rolling_schedule(std::size_t total_days, std::size_t train_len,
                          std::size_t val_len, std::size_t test_len);

struct TrainResult {
  ParamStore params;  // best-validation-IC parameters
  std::vector<double> train_loss_curve;
  std::vector<double> val_ic_curve;
  std::size_t best_epoch = 0;
  double best_val_ic = 0.0;
  bool aborted_non_finite = false;
};

TrainResult train(const DynamicGraph& g, const LabelFrame& labels,
                  const Fold& fold, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg);

// Forward-only scoring of the given days against realized labels.
std::vector<DayScores> score_days(const DynamicGraph& g, const LabelFrame& labels,
                                  ParamStore& params, const ModelConfig& cfg,
                                  const std::vector<std::size_t>& days,
                                  std::vector<FusionWeightRecord>* fusion_log = nullptr);

// Days in [begin, end) that carry labels.
std::vector<std::size_t> labeled_days(const LabelFrame& labels, std::size_t begin,
                                      std::size_t end);

}  // namespace mdgnn
