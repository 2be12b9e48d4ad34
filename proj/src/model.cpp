#include "mdgnn/model.hpp"

#include <cmath>
#include <set>

#include "mdgnn/errors.hpp"
#include "mdgnn/rng.hpp"

namespace mdgnn {

namespace {

void insert_init(ParamStore& store, const std::string& name, std::size_t rows,
                 std::size_t cols, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init:" + name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.uniform(-bound, bound);
  store.insert(name, std::move(m));
}

}  // namespace

void init_model_params(ParamStore& store, const ModelConfig& cfg,
                       std::uint64_t seed) {
  if (cfg.kind == ModelKind::MLP) {
    insert_init(store, "mlp.W1", cfg.encoder.d_in, cfg.mlp_hidden, seed);
    insert_init(store, "mlp.b1", 1, cfg.mlp_hidden, seed);
    insert_init(store, "mlp.W2", cfg.mlp_hidden, 1, seed);
    insert_init(store, "mlp.b2", 1, 1, seed);
    return;
  }
  init_encoder_params(store, cfg.encoder, seed);
  if (!cfg.no_temporal) init_temporal_params(store, cfg.temporal, seed);
  insert_init(store, "head.W", cfg.encoder.d_h, 1, seed);
  insert_init(store, "head.b", 1, 1, seed);
}

std::map<std::size_t, Node*> forward_logits(
    Tape& tape, const DynamicGraph& g, ParamBinder& params,
    const ModelConfig& cfg, const std::vector<std::size_t>& days,
    std::vector<FusionWeightRecord>* fusion_log) {
  std::map<std::size_t, Node*> out;
  if (days.empty()) return out;

  if (cfg.kind == ModelKind::MLP) {
    for (std::size_t t : days) {
      Node* x = tape.leaf(g.snapshots.at(t).stock_features);
      Node* h = tape.tanh_(tape.add_row(tape.matmul(x, params("mlp.W1")),
                                        params("mlp.b1")));
      out[t] = tape.add_row(tape.matmul(h, params("mlp.W2")), params("mlp.b2"));
    }
    return out;
  }

  const std::size_t n = g.n_stocks();
  const std::size_t window = cfg.no_temporal ? 0 : cfg.temporal.window;

  std::set<std::size_t> needed;
  for (std::size_t t : days) {
    if (t >= g.snapshots.size()) throw ContractError("target day out of range");
    const std::size_t first = t >= window ? t - window : 0;
    for (std::size_t d = first; d <= t; ++d) needed.insert(d);
  }
  std::map<std::size_t, Node*> encoded;
  for (std::size_t d : needed) {
    encoded[d] = encode_snapshot(tape, g.snapshots.at(d), params, cfg.encoder,
                                 fusion_log);
  }

  Node* head_w = params("head.W");
  Node* head_b = params("head.b");
  for (std::size_t t : days) {
    if (cfg.no_temporal) {
      out[t] = tape.add_row(tape.matmul(encoded.at(t), head_w), head_b);
      continue;
    }
    std::vector<Node*> logits;
    logits.reserve(n);
    const std::size_t len = window + 1;
    const long first = static_cast<long>(t) - static_cast<long>(window);
    const std::size_t pad = first < 0 ? static_cast<std::size_t>(-first) : 0;
    for (std::size_t v = 0; v < n; ++v) {
      std::vector<Node*> rows;
      rows.reserve(len);
      if (pad > 0) rows.push_back(tape.leaf(Matrix(pad, cfg.encoder.d_h)));
      for (std::size_t r = pad; r < len; ++r) {
        const std::size_t d = static_cast<std::size_t>(first + static_cast<long>(r));
        rows.push_back(tape.row(encoded.at(d), v));
      }
      Node* window_node = tape.concat_rows(rows);
      Node* z_rows = temporal_attend(tape, window_node, pad, params, cfg.temporal);
      Node* z = tape.row(z_rows, z_rows->value.rows() - 1);
      logits.push_back(tape.add(tape.matmul(z, head_w), head_b));
    }
    out[t] = tape.concat_rows(logits);
  }
  return out;
}

Node* prediction_loss(Tape& tape, const std::vector<Node*>& logits,
                      const std::vector<std::vector<double>>& labels,
                      const std::vector<std::vector<char>>& valid,
                      LossKind kind, double tau) {
  if (logits.size() != labels.size() || logits.size() != valid.size()) {
    throw ContractError("prediction_loss: day count mismatch");
  }
  std::size_t n_valid = 0;
  std::vector<Node*> per_day_terms;
  for (std::size_t d = 0; d < logits.size(); ++d) {
    Node* u = logits[d];
    const std::size_t n = u->value.rows();
    if (u->value.cols() != 1 || labels[d].size() != n || valid[d].size() != n) {
      throw ContractError("prediction_loss: shape mismatch on day index " +
                          std::to_string(d));
    }
    Matrix mask(n, 1);
    Matrix target(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (!valid[d][i]) continue;
      mask.at(i, 0) = 1.0;
      ++n_valid;
      target.at(i, 0) = kind == LossKind::BCE
                            ? (labels[d][i] > 0.0 ? 1.0 : 0.0)
                            : 1.0 / (1.0 + std::exp(-labels[d][i] / tau));
    }
    Node* term;
    if (kind == LossKind::BCE) {
      // softplus(u) - t*u, numerically stable for any logit
      Node* tu = tape.mul(u, tape.leaf(target));
      term = tape.add(tape.softplus(u), tape.scale(tu, -1.0));
    } else {
      Node* diff = tape.add(tape.sigmoid(u), tape.scale(tape.leaf(target), -1.0));
      term = tape.mul(diff, diff);
    }
    per_day_terms.push_back(tape.sum(tape.mul(term, tape.leaf(mask))));
  }
  if (n_valid == 0) throw ContractError("prediction_loss: empty valid set");
  Node* total = per_day_terms[0];
  for (std::size_t i = 1; i < per_day_terms.size(); ++i)
    total = tape.add(total, per_day_terms[i]);
  return tape.scale(total, 1.0 / static_cast<double>(n_valid));
}

std::vector<double> sigmoid_values(const Node* logits) {
  std::vector<double> out(logits->value.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u = logits->value.at(i, 0);
    out[i] = u >= 0.0 ? 1.0 / (1.0 + std::exp(-u))
                      : std::exp(u) / (1.0 + std::exp(u));
  }
  return out;
}

}  // namespace mdgnn
