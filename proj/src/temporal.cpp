#include "mdgnn/temporal.hpp"

#include <cmath>

#include "mdgnn/errors.hpp"
#include "mdgnn/rng.hpp"

namespace mdgnn {

double alibi_slope(std::size_t k, std::size_t total_heads) {
  if (k < 1 || k > total_heads) throw ContractError("alibi head index out of range");
  return std::pow(2.0, -8.0 * static_cast<double>(k) /
                            static_cast<double>(total_heads));
}

Matrix alibi_bias(std::size_t len, double slope) {
  if (len < 1) throw ContractError("alibi_bias needs len >= 1");
  Matrix p(len, len);
  for (std::size_t q = 0; q < len; ++q)
    for (std::size_t j = 0; j <= q; ++j)
      p.at(q, j) = -slope * static_cast<double>(q - j);
  return p;
}

Matrix forward_mask(std::size_t len) {
  if (len < 1) throw ContractError("forward_mask needs len >= 1");
  Matrix m(len, len);
  for (std::size_t q = 0; q < len; ++q)
    for (std::size_t j = q + 1; j < len; ++j) m.at(q, j) = kMaskedSentinel;
  return m;
}

WindowBatch assemble_window(const std::vector<Matrix>& day_embeddings,
                            std::size_t stock, std::size_t day,
                            std::size_t window) {
  if (day >= day_embeddings.size()) throw ContractError("window day out of range");
  const std::size_t d_h = day_embeddings[day].cols();
  const std::size_t len = window + 1;
  WindowBatch batch;
  batch.rows = Matrix(len, d_h);
  const long first = static_cast<long>(day) - static_cast<long>(window);
  batch.valid_from = first < 0 ? static_cast<std::size_t>(-first) : 0;
  for (std::size_t r = batch.valid_from; r < len; ++r) {
    const std::size_t t = static_cast<std::size_t>(first + static_cast<long>(r));
    for (std::size_t c = 0; c < d_h; ++c)
      batch.rows.at(r, c) = day_embeddings[t].at(stock, c);
  }
  return batch;
}

void init_temporal_params(ParamStore& store, const TemporalConfig& cfg,
                          std::uint64_t seed) {
  for (const char* name : {"tmp.Wq", "tmp.Wk", "tmp.Wv", "tmp.Wo"}) {
    Rng rng(derive_seed(seed, std::string("init:") + name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_h));
    Matrix m(cfg.d_h, cfg.d_h);
    for (auto& v : m.data()) v = rng.uniform(-bound, bound);
    store.insert(name, std::move(m));
  }
}

Node* temporal_attend(Tape& tape, Node* window_rows, std::size_t valid_from,
                      ParamBinder& params, const TemporalConfig& cfg) {
  const std::size_t len = window_rows->value.rows();
  if (valid_from >= len) {
    throw ContractError("temporal window has no valid rows");
  }
  Node* q = tape.matmul(window_rows, params("tmp.Wq"));
  Node* k = tape.matmul(window_rows, params("tmp.Wk"));
  Node* v = tape.matmul(window_rows, params("tmp.Wv"));

  // scores for valid query positions only; padded rows are never queries
  Node* q_valid = valid_from == 0 ? q : tape.rows(q, valid_from, len);
  Node* scores = tape.scale(tape.matmul(q_valid, tape.transpose(k)),
                            1.0 / std::sqrt(static_cast<double>(cfg.d_h)));

  std::vector<Node*> head_outputs;
  head_outputs.reserve(cfg.heads);
  for (std::size_t h = 1; h <= cfg.heads; ++h) {
    const double slope = alibi_slope(h, cfg.heads);
    Matrix mask(len - valid_from, len);
    for (std::size_t r = 0; r < mask.rows(); ++r) {
      const std::size_t qpos = valid_from + r;
      for (std::size_t j = 0; j < len; ++j) {
        if (j > qpos || j < valid_from) {
          mask.at(r, j) = kMaskedSentinel;  // future or padded key
        } else {
          mask.at(r, j) = -slope * static_cast<double>(qpos - j);
        }
      }
    }
    head_outputs.push_back(tape.matmul(tape.softmax_rows(scores, mask), v));
  }
  return tape.matmul(tape.mean_over(head_outputs), params("tmp.Wo"));
}

}  // namespace mdgnn
