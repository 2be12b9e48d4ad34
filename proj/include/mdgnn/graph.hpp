#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mdgnn/matrix.hpp"

namespace mdgnn {

enum class NodeKind { Stock, Bank, Industry };

enum class Relation { SS, SB, SI, II };

const char* to_string(NodeKind k);
const char* to_string(Relation r);
Relation relation_from_string(const std::string& s);

struct NodeRef {
  NodeKind kind;
  std::size_t index;

  bool operator==(const NodeRef&) const = default;
};

// Edges are stored once (undirected) and expanded to both directions at
// message-passing time.
struct EdgeRecord {
  Relation relation;
  NodeRef src;
  NodeRef dst;
  std::vector<double> features;  // length d_e

  bool operator==(const EdgeRecord&) const = default;
};

struct GraphSnapshot {
  std::size_t day = 0;
  Matrix stock_features;     // n_S x d_in
  Matrix bank_features;      // n_B x d_in
  Matrix industry_features;  // n_I x d_in
  std::vector<EdgeRecord> edges;

  std::size_t n_stocks() const { return stock_features.rows(); }
  std::size_t n_banks() const { return bank_features.rows(); }
  std::size_t n_industries() const { return industry_features.rows(); }

  bool operator==(const GraphSnapshot&) const = default;
};

struct DynamicGraph {
  std::vector<GraphSnapshot> snapshots;  // strictly increasing day
  Matrix prices;                         // n_S x T, strictly positive
  std::vector<double> benchmark;         // length T

  std::size_t n_stocks() const { return prices.rows(); }
  std::size_t n_days() const { return prices.cols(); }

  bool operator==(const DynamicGraph&) const = default;
};

struct LabelFrame {
  Matrix labels;           // n_S x (T-1)
  std::vector<char> valid; // same layout, row-major

  bool is_valid(std::size_t stock, std::size_t day) const {
    return valid[stock * labels.cols() + day] != 0;
  }
};

// y_it = (p_{i,t+1} - p_it)/p_it - benchmark_t; last day carries no label.
LabelFrame build_labels(const DynamicGraph& g);

// Returns every violated snapshot invariant; empty means ok.
std::vector<std::string> validate(const GraphSnapshot& s);

// Relabels stocks: stock i becomes row perm[i]. Edge-list order is preserved;
// bank and industry nodes are untouched. perm must be a permutation of
// 0..n_stocks-1.
GraphSnapshot permute_stocks(const GraphSnapshot& s,
                             const std::vector<std::size_t>& perm);

// Identical snapshot keeping only the given relations; node sets unchanged.
GraphSnapshot relation_subset(const GraphSnapshot& s,
                              const std::vector<Relation>& keep);

// On-disk layout under `dir`:
//   snapshots.jsonl  one JSON object per day
//   prices.csv       header "stock,day0,day1,..."
//   benchmark.csv    header "day,return"
// save then load is the identity, bitwise on floats.
void save(const DynamicGraph& g, const std::string& dir);
DynamicGraph load(const std::string& dir);

}  // namespace mdgnn
