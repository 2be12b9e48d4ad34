#pragma once

#include <cstdint>
#include <vector>

#include "mdgnn/param_store.hpp"
#include "mdgnn/tape.hpp"

namespace mdgnn {

struct TemporalConfig {
  std::size_t window = 10;  // delta_t: look back this many days
  std::size_t heads = 4;    // K_T; heads share Q/K/V and differ by slope
  std::size_t d_h = 32;
};

// Geometric slope schedule m_k = 2^(-8k/K), k in 1..K: positive and strictly
// decreasing.
double alibi_slope(std::size_t k, std::size_t total_heads);

// P[q][j] = -slope*(q-j) for j <= q; entries above the diagonal are unused
// (the forward mask removes them).
Matrix alibi_bias(std::size_t len, double slope);

// M[q][j] = 0 for j <= q, masked sentinel for j > q.
Matrix forward_mask(std::size_t len);

// Sliding window of one stock's per-day embeddings, oldest row first; rows
// before the series start are zero-padded and masked.
struct WindowBatch {
  Matrix rows;                // (window+1) x d_h
  std::size_t valid_from = 0; // first non-padded row
};

WindowBatch assemble_window(const std::vector<Matrix>& day_embeddings,
                            std::size_t stock, std::size_t day,
                            std::size_t window);

void init_temporal_params(ParamStore& store, const TemporalConfig& cfg,
                          std::uint64_t seed);

// ALiBi-biased causal attention over the window. Returns outputs for the
// valid query positions only, shape (len - valid_from) x d_h; the last row is
// z_vt. Throws ContractError when every row is padded.
Node* temporal_attend(Tape& tape, Node* window_rows, std::size_t valid_from,
                      ParamBinder& params, const TemporalConfig& cfg);

}  // namespace mdgnn
