#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdgnn/graph.hpp"
#include "mdgnn/param_store.hpp"
#include "mdgnn/tape.hpp"

namespace mdgnn {

enum class MetaPathId { SS, SBS, SIIS };

// Relation chains: SS=[SS], SBS=[SB,SB], SIIS=[SI,II,SI]. Each industry
// carries an implicit II identity link, so same-industry stock pairs are
// always SIIS-connected; explicit II edges extend reach to linked industries.
std::vector<Relation> relation_chain(MetaPathId m);

// One induced stock-stock edge. Multiple path instances between the same
// ordered pair collapse into one record with the instance count kept as a
// feature.
struct InducedEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::vector<double> mean_features;   // elementwise mean of constituent edges
  double instance_count = 0;
  std::vector<NodeRef> intermediates;  // distinct bank/industry nodes on paths
};

// Directed edges (both directions of every induced pair), sorted by
// (src, dst) for deterministic iteration.
std::vector<InducedEdge> induce_meta_path_graph(const GraphSnapshot& s, MetaPathId m);

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t d_h = 32;
  std::size_t d_in = 42;
  std::size_t d_e = 4;
  double leaky_slope = 0.2;

  // ablation switches
  bool no_edge_features = false;
  bool no_meta_path = false;   // collapse all relations into one untyped graph
  bool no_hier_fusion = false; // plain mean instead of attention fusion
};

// Per-(stock, layer) fusion weights, exportable as
// "day,stock,layer,w_ss,w_sbs,w_siis" (-1 where a meta-path is absent).
struct FusionWeightRecord {
  std::size_t day = 0;
  std::size_t stock = 0;
  std::size_t layer = 0;
  double weights[3] = {-1.0, -1.0, -1.0};
};

// Registers every encoder parameter in the store (uniform +-1/sqrt(fan_in)).
void init_encoder_params(ParamStore& store, const EncoderConfig& cfg,
                         std::uint64_t seed);

// Per-stock contribution of one meta-path; entries are null for stocks with
// no neighbors under this meta-path.
std::vector<Node*> attend_meta_path(Tape& tape, Node* h_stocks, Node* h_banks,
                                    Node* h_industries,
                                    const std::vector<InducedEdge>& edges,
                                    ParamBinder& params, const EncoderConfig& cfg,
                                    std::size_t layer, std::size_t path_index);

// Returns the final-layer n_S x d_h stock embedding node.
Node* encode_snapshot(Tape& tape, const GraphSnapshot& s, ParamBinder& params,
                      const EncoderConfig& cfg,
                      std::vector<FusionWeightRecord>* fusion_log = nullptr);

void write_fusion_weights_csv(const std::vector<FusionWeightRecord>& records,
                              const std::string& path);

}  // namespace mdgnn
