#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "mdgnn/encoder.hpp"
#include "mdgnn/graph.hpp"
#include "mdgnn/temporal.hpp"

namespace mdgnn {

enum class LossKind { BCE, MSE };
enum class ModelKind { MDGNN, MLP };

struct ModelConfig {
  EncoderConfig encoder;
  TemporalConfig temporal;
  bool no_temporal = false;  // z_vt := h_vt
  ModelKind kind = ModelKind::MDGNN;
  LossKind loss = LossKind::BCE;
  double mse_tau = 0.01;      // MSE targets are sigmoid(y/tau)
  std::size_t mlp_hidden = 32;
};

void init_model_params(ParamStore& store, const ModelConfig& cfg,
                       std::uint64_t seed);

// Logits (n_S x 1, pre-sigmoid) for each requested day. Each day's snapshot
// window [t - delta_t, t] is encoded once and shared across target days.
std::map<std::size_t, Node*> forward_logits(
    Tape& tape, const DynamicGraph& g, ParamBinder& params,
    const ModelConfig& cfg, const std::vector<std::size_t>& days,
    std::vector<FusionWeightRecord>* fusion_log = nullptr);

// BCE on sign(y) by default; MSE mode compares sigmoid(logit) against
// sigmoid(y/tau). Mean over valid samples; empty valid set is a contract
// error.
Node* prediction_loss(Tape& tape, const std::vector<Node*>& logits,
                      const std::vector<std::vector<double>>& labels,
                      const std::vector<std::vector<char>>& valid,
                      LossKind kind, double tau);

// sigmoid of a column of logits
std::vector<double> sigmoid_values(const Node* logits);

}  // namespace mdgnn
