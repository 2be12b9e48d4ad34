#include "mdgnn/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "mdgnn/errors.hpp"
#include "mdgnn/rng.hpp"

namespace mdgnn {

std::vector<Relation> relation_chain(MetaPathId m) {
  switch (m) {
    case MetaPathId::SS: return {Relation::SS};
    case MetaPathId::SBS: return {Relation::SB, Relation::SB};
    case MetaPathId::SIIS: return {Relation::SI, Relation::II, Relation::SI};
  }
  return {};
}

namespace {

struct PairAccum {
  std::vector<double> feat_sum;
  std::size_t feat_vectors = 0;
  double instances = 0;
  std::set<std::pair<int, std::size_t>> intermediates;

  void add_edge_features(const std::vector<double>& f) {
    if (feat_sum.empty()) feat_sum.assign(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) feat_sum[i] += f[i];
    ++feat_vectors;
  }
  void add_intermediate(NodeKind k, std::size_t idx) {
    intermediates.insert({static_cast<int>(k), idx});
  }
};

using PairMap = std::map<std::pair<std::size_t, std::size_t>, PairAccum>;

std::vector<InducedEdge> finalize(PairMap& pairs) {
  std::vector<InducedEdge> out;
  out.reserve(pairs.size());
  for (auto& [key, acc] : pairs) {
    InducedEdge e;
    e.src = key.first;
    e.dst = key.second;
    e.instance_count = acc.instances;
    e.mean_features = acc.feat_sum;
    if (acc.feat_vectors > 0) {
      for (auto& v : e.mean_features) v /= static_cast<double>(acc.feat_vectors);
    }
    for (const auto& [kind, idx] : acc.intermediates) {
      e.intermediates.push_back({static_cast<NodeKind>(kind), idx});
    }
    out.push_back(std::move(e));
  }
  return out;  // std::map iteration is already (src, dst)-sorted
}

}  // namespace

std::vector<InducedEdge> induce_meta_path_graph(const GraphSnapshot& s, MetaPathId m) {
  const std::size_t nS = s.n_stocks();
  PairMap pairs;

  if (m == MetaPathId::SS) {
    for (const auto& e : s.edges) {
      if (e.relation != Relation::SS) continue;
      for (auto [i, j] : {std::pair{e.src.index, e.dst.index},
                          std::pair{e.dst.index, e.src.index}}) {
        auto& acc = pairs[{i, j}];
        acc.add_edge_features(e.features);
        acc.instances += 1;
      }
    }
  } else if (m == MetaPathId::SBS) {
    std::map<std::size_t, std::vector<const EdgeRecord*>> by_bank;
    for (const auto& e : s.edges) {
      if (e.relation == Relation::SB) by_bank[e.dst.index].push_back(&e);
    }
    for (const auto& [bank, edges] : by_bank) {
      for (const EdgeRecord* ea : edges) {
        for (const EdgeRecord* eb : edges) {
          const std::size_t i = ea->src.index, j = eb->src.index;
          if (i == j) continue;
          auto& acc = pairs[{i, j}];
          acc.add_edge_features(ea->features);
          acc.add_edge_features(eb->features);
          acc.instances += 1;
          acc.add_intermediate(NodeKind::Bank, bank);
        }
      }
    }
  } else {  // SIIS
    std::map<std::size_t, std::vector<const EdgeRecord*>> si_by_stock, si_by_ind;
    std::map<std::size_t, std::vector<std::pair<std::size_t, const EdgeRecord*>>> ii_adj;
    for (const auto& e : s.edges) {
      if (e.relation == Relation::SI) {
        si_by_stock[e.src.index].push_back(&e);
        si_by_ind[e.dst.index].push_back(&e);
      } else if (e.relation == Relation::II) {
        ii_adj[e.src.index].push_back({e.dst.index, &e});
        ii_adj[e.dst.index].push_back({e.src.index, &e});
      }
    }
    for (std::size_t i = 0; i < nS; ++i) {
      auto it = si_by_stock.find(i);
      if (it == si_by_stock.end()) continue;
      for (const EdgeRecord* e1 : it->second) {
        const std::size_t i1 = e1->dst.index;
        // implicit II identity link plus explicit II neighbors
        std::vector<std::pair<std::size_t, const EdgeRecord*>> hops{{i1, nullptr}};
        auto ii = ii_adj.find(i1);
        if (ii != ii_adj.end()) {
          hops.insert(hops.end(), ii->second.begin(), ii->second.end());
        }
        for (const auto& [i2, e2] : hops) {
          auto jt = si_by_ind.find(i2);
          if (jt == si_by_ind.end()) continue;
          for (const EdgeRecord* e3 : jt->second) {
            const std::size_t j = e3->src.index;
            if (j == i) continue;
            auto& acc = pairs[{i, j}];
            acc.add_edge_features(e1->features);
            if (e2) acc.add_edge_features(e2->features);
            acc.add_edge_features(e3->features);
            acc.instances += 1;
            acc.add_intermediate(NodeKind::Industry, i1);
            acc.add_intermediate(NodeKind::Industry, i2);
          }
        }
      }
    }
  }
  return finalize(pairs);
}

namespace {

std::string param_prefix(std::size_t layer, std::size_t path) {
  return "enc.l" + std::to_string(layer) + ".m" + std::to_string(path);
}

Matrix init_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                   const std::string& name) {
  Rng rng(derive_seed(seed, "init:" + name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.uniform(-bound, bound);
  return m;
}

void insert_init(ParamStore& store, const std::string& name, std::size_t rows,
                 std::size_t cols, std::uint64_t seed) {
  store.insert(name, init_matrix(rows, cols, seed, name));
}

// One directed attention edge over generic query/key embedding matrices.
struct GenEdge {
  std::size_t src = 0;      // row in the query matrix (always a stock)
  std::size_t dst_row = 0;  // row in the key matrix
  Node* e_node = nullptr;   // 1 x (2*d_e+1) composed edge feature, or null
};

// Edge-aware multi-head attention with average pooling over heads. Returns
// one 1 x d_h node per stock, null where the stock has no neighbors.
std::vector<Node*> attend_core(Tape& tape, Node* h_query, Node* h_key,
                               const std::vector<GenEdge>& edges,
                               ParamBinder& params, const EncoderConfig& cfg,
                               const std::string& prefix) {
  const std::size_t n = h_query->value.rows();
  std::vector<std::vector<std::size_t>> by_src(n);
  for (std::size_t e = 0; e < edges.size(); ++e) by_src[edges[e].src].push_back(e);

  // per-head projected embeddings and score pieces
  std::vector<Node*> proj_key(cfg.heads), s_query(cfg.heads), s_key(cfg.heads);
  std::vector<std::vector<Node*>> s_edge(cfg.heads);
  for (std::size_t k = 0; k < cfg.heads; ++k) {
    const std::string hp = prefix + ".h" + std::to_string(k);
    Node* W = params(hp + ".W");
    Node* proj_q = tape.matmul(h_query, W);
    proj_key[k] = h_query == h_key ? proj_q : tape.matmul(h_key, W);
    s_query[k] = tape.matmul(proj_q, params(hp + ".a1"));
    s_key[k] = tape.matmul(proj_key[k], params(hp + ".a2"));
    if (!cfg.no_edge_features) {
      Node* We = params(hp + ".We");
      Node* a3 = params(hp + ".a3");
      s_edge[k].reserve(edges.size());
      for (const auto& e : edges) {
        s_edge[k].push_back(tape.matmul(tape.matmul(e.e_node, We), a3));
      }
    }
  }

  std::vector<Node*> out(n, nullptr);
  for (std::size_t i = 0; i < n; ++i) {
    if (by_src[i].empty()) continue;
    std::vector<Node*> head_outputs;
    head_outputs.reserve(cfg.heads);
    for (std::size_t k = 0; k < cfg.heads; ++k) {
      std::vector<Node*> scores, neighbor_rows;
      scores.reserve(by_src[i].size());
      for (std::size_t e : by_src[i]) {
        Node* b = tape.add(tape.row(s_query[k], i), tape.row(s_key[k], edges[e].dst_row));
        if (!cfg.no_edge_features) b = tape.add(b, s_edge[k][e]);
        scores.push_back(b);
        neighbor_rows.push_back(tape.row(proj_key[k], edges[e].dst_row));
      }
      Node* alpha = tape.softmax_rows(
          tape.leaky_relu(tape.concat_cols(scores), cfg.leaky_slope));
      // Weighted terms are summed in an order determined by their contents
      // (weight, then row values), not by neighbor index, so the float sum is
      // bit-identical under any relabeling of the nodes.
      std::vector<Node*> terms;
      terms.reserve(neighbor_rows.size());
      for (std::size_t j = 0; j < neighbor_rows.size(); ++j) {
        terms.push_back(tape.scale_by(tape.cell(alpha, 0, j), neighbor_rows[j]));
      }
      std::vector<std::size_t> order(terms.size());
      for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double wa = alpha->value.at(0, a), wb = alpha->value.at(0, b);
        if (wa != wb) return wa < wb;
        const auto& ra = neighbor_rows[a]->value.data();
        const auto& rb = neighbor_rows[b]->value.data();
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(),
                                            rb.end());
      });
      Node* acc = terms[order[0]];
      for (std::size_t j = 1; j < order.size(); ++j) {
        acc = tape.add(acc, terms[order[j]]);
      }
      head_outputs.push_back(acc);
    }
    out[i] = tape.tanh_(tape.mean_over(head_outputs));
  }
  return out;
}

Node* intermediate_row(Tape& tape, Node* h_banks, Node* h_industries,
                       const NodeRef& ref) {
  return tape.row(ref.kind == NodeKind::Bank ? h_banks : h_industries, ref.index);
}

Node* compose_edge_node(Tape& tape, const InducedEdge& e, Node* h_banks,
                        Node* h_industries, Node* w_intermediate,
                        std::size_t d_e) {
  Node* feat = tape.leaf(
      e.mean_features.empty()
          ? Matrix(1, d_e)
          : Matrix(1, e.mean_features.size(), e.mean_features));
  Node* inter;
  if (e.intermediates.empty()) {
    inter = tape.leaf(Matrix(1, d_e));
  } else {
    std::vector<Node*> rows;
    rows.reserve(e.intermediates.size());
    for (const auto& ref : e.intermediates) {
      rows.push_back(intermediate_row(tape, h_banks, h_industries, ref));
    }
    inter = tape.matmul(tape.mean_over(rows), w_intermediate);
  }
  Node* count = tape.leaf(Matrix(1, 1, {e.instance_count}));
  return tape.concat_cols({feat, inter, count});
}

}  // namespace

void init_encoder_params(ParamStore& store, const EncoderConfig& cfg,
                         std::uint64_t seed) {
  insert_init(store, "enc.in.S", cfg.d_in, cfg.d_h, seed);
  insert_init(store, "enc.in.B", cfg.d_in, cfg.d_h, seed);
  insert_init(store, "enc.in.I", cfg.d_in, cfg.d_h, seed);
  const std::size_t edge_dim = 2 * cfg.d_e + 1;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    for (std::size_t m = 0; m < 3; ++m) {
      const std::string mp = param_prefix(l, m);
      insert_init(store, mp + ".Wie", cfg.d_h, cfg.d_e, seed);
      for (std::size_t k = 0; k < cfg.heads; ++k) {
        const std::string hp = mp + ".h" + std::to_string(k);
        insert_init(store, hp + ".W", cfg.d_h, cfg.d_h, seed);
        insert_init(store, hp + ".a1", cfg.d_h, 1, seed);
        insert_init(store, hp + ".a2", cfg.d_h, 1, seed);
        insert_init(store, hp + ".a3", cfg.d_h, 1, seed);
        insert_init(store, hp + ".We", edge_dim, cfg.d_h, seed);
      }
    }
    insert_init(store, "enc.l" + std::to_string(l) + ".fuse", cfg.d_h, 1, seed);
  }
}

std::vector<Node*> attend_meta_path(Tape& tape, Node* h_stocks, Node* h_banks,
                                    Node* h_industries,
                                    const std::vector<InducedEdge>& edges,
                                    ParamBinder& params, const EncoderConfig& cfg,
                                    std::size_t layer, std::size_t path_index) {
  const std::string prefix = param_prefix(layer, path_index);
  std::vector<GenEdge> gen;
  gen.reserve(edges.size());
  for (const auto& e : edges) {
    GenEdge ge;
    ge.src = e.src;
    ge.dst_row = e.dst;
    if (!cfg.no_edge_features) {
      ge.e_node = compose_edge_node(tape, e, h_banks, h_industries,
                                    params(prefix + ".Wie"), cfg.d_e);
    }
    gen.push_back(ge);
  }
  return attend_core(tape, h_stocks, h_stocks, gen, params, cfg, prefix);
}

Node* encode_snapshot(Tape& tape, const GraphSnapshot& s, ParamBinder& params,
                      const EncoderConfig& cfg,
                      std::vector<FusionWeightRecord>* fusion_log) {
  if (s.stock_features.cols() != cfg.d_in) {
    throw DimensionError("snapshot feature dim " +
                         std::to_string(s.stock_features.cols()) +
                         " does not match configured d_in " +
                         std::to_string(cfg.d_in));
  }
  const std::size_t nS = s.n_stocks();

  Node* h_stocks = tape.matmul(tape.leaf(s.stock_features, "x:S"), params("enc.in.S"));
  Node* h_banks = s.n_banks() > 0
                      ? tape.matmul(tape.leaf(s.bank_features, "x:B"), params("enc.in.B"))
                      : tape.leaf(Matrix(0, cfg.d_h));
  Node* h_industries =
      s.n_industries() > 0
          ? tape.matmul(tape.leaf(s.industry_features, "x:I"), params("enc.in.I"))
          : tape.leaf(Matrix(0, cfg.d_h));

  // structural induction once per snapshot, reused across layers
  std::vector<std::vector<InducedEdge>> typed;
  std::vector<GenEdge> untyped;
  Node* h_all = nullptr;
  if (cfg.no_meta_path) {
    // one untyped graph over all node kinds; stock rows first
    h_all = tape.concat_rows({h_stocks, h_banks, h_industries});
    const std::size_t bank_off = nS, ind_off = nS + s.n_banks();
    auto global_row = [&](const NodeRef& r) {
      switch (r.kind) {
        case NodeKind::Stock: return r.index;
        case NodeKind::Bank: return bank_off + r.index;
        case NodeKind::Industry: return ind_off + r.index;
      }
      return r.index;
    };
    for (const auto& e : s.edges) {
      for (auto [a, b] : {std::pair{e.src, e.dst}, std::pair{e.dst, e.src}}) {
        if (a.kind != NodeKind::Stock) continue;  // only stock rows are updated
        GenEdge ge;
        ge.src = a.index;
        ge.dst_row = global_row(b);
        if (!cfg.no_edge_features) {
          Node* feat = tape.leaf(Matrix(1, e.features.size(), e.features));
          Node* pad = tape.leaf(Matrix(1, cfg.d_e));
          Node* count = tape.leaf(Matrix(1, 1, {1.0}));
          ge.e_node = tape.concat_cols({feat, pad, count});
        }
        untyped.push_back(ge);
      }
    }
    std::sort(untyped.begin(), untyped.end(), [](const GenEdge& a, const GenEdge& b) {
      return std::tie(a.src, a.dst_row) < std::tie(b.src, b.dst_row);
    });
  } else {
    for (MetaPathId m : {MetaPathId::SS, MetaPathId::SBS, MetaPathId::SIIS}) {
      typed.push_back(induce_meta_path_graph(s, m));
    }
  }

  Node* h_cur = h_stocks;
  for (std::size_t layer = 0; layer < cfg.layers; ++layer) {
    std::vector<std::vector<Node*>> per_path;
    if (cfg.no_meta_path) {
      per_path.push_back(attend_core(tape, h_cur, h_all, untyped, params, cfg,
                                     param_prefix(layer, 0)));
    } else {
      for (std::size_t m = 0; m < 3; ++m) {
        per_path.push_back(attend_meta_path(tape, h_cur, h_banks, h_industries,
                                            typed[m], params, cfg, layer, m));
      }
    }

    Node* fuse_w = params("enc.l" + std::to_string(layer) + ".fuse");
    std::vector<Node*> fused(nS);
    for (std::size_t i = 0; i < nS; ++i) {
      std::vector<Node*> available;
      std::vector<std::size_t> path_ids;
      for (std::size_t m = 0; m < per_path.size(); ++m) {
        if (per_path[m][i]) {
          available.push_back(per_path[m][i]);
          path_ids.push_back(m);
        }
      }
      FusionWeightRecord rec;
      rec.day = s.day;
      rec.stock = i;
      rec.layer = layer;
      if (available.empty()) {
        // no meta-path reaches this stock: fall back to its own features
        fused[i] = tape.tanh_(tape.row(h_cur, i));
      } else if (cfg.no_hier_fusion) {
        fused[i] = tape.tanh_(tape.mean_over(available));
        for (std::size_t m : path_ids)
          rec.weights[m] = 1.0 / static_cast<double>(available.size());
      } else {
        std::vector<Node*> scores;
        scores.reserve(available.size());
        for (Node* h : available) scores.push_back(tape.matmul(h, fuse_w));
        Node* weights = tape.softmax_rows(tape.concat_cols(scores));
        fused[i] = tape.tanh_(tape.matmul(weights, tape.concat_rows(available)));
        for (std::size_t m = 0; m < path_ids.size(); ++m)
          rec.weights[path_ids[m]] = weights->value.at(0, m);
      }
      if (fusion_log) fusion_log->push_back(rec);
    }
    h_cur = tape.concat_rows(fused);
  }
  return h_cur;
}

void write_fusion_weights_csv(const std::vector<FusionWeightRecord>& records,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "day,stock,layer,w_ss,w_sbs,w_siis\n";
  for (const auto& r : records) {
    out << r.day << "," << r.stock << "," << r.layer << "," << r.weights[0] << ","
        << r.weights[1] << "," << r.weights[2] << "\n";
  }
}

}  // namespace mdgnn
