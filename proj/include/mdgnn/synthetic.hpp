#pragma once

#include <cstdint>
#include <string>

#include "mdgnn/graph.hpp"

namespace mdgnn {

// Factor-model market generator. Industry factors and bank flows are AR(1)
// processes; stock returns load on them, so relational neighbors carry
// predictive information by construction.
struct MarketConfig {
  std::size_t n_stocks = 10;
  std::size_t n_banks = 4;
  std::size_t n_industries = 3;
  std::size_t days = 40;
  std::size_t d_in = 42;
  std::size_t d_e = 4;
  double industry_beta = 0.02;
  double bank_beta = 0.02;
  double noise_sigma = 0.02;
  double holdings_churn = 0.05;  // probability an SB edge toggles per day
  std::uint64_t seed = 1;

  // planted-signal shape
  std::size_t signal_dims = 8;      // feature dims carrying the signal
  double obs_sigma = 0.08;          // per-dim observation noise on the signal
  // scales the planted signal in bank/industry node features; 0 leaves the
  // signal observable only through stock features and the graph structure
  double context_signal_gain = 1.0;
  double factor_persistence = 0.9;  // AR(1) coefficient of factors and flows
  std::size_t window_hint = 2;      // requires days >= window_hint + 2

  void validate() const;  // throws ConfigError
};

MarketConfig preset(const std::string& name);  // "csi100-like" | "toy"

DynamicGraph generate(const MarketConfig& cfg);

}  // namespace mdgnn
