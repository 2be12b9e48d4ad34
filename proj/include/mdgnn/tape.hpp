#pragma once

#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mdgnn/matrix.hpp"

namespace mdgnn {

// Additive mask sentinel: most-negative finite double. Positions carrying the
// sentinel are excluded from softmax entirely and forced to exactly 0.
inline constexpr double kMaskedSentinel = std::numeric_limits<double>::lowest();

class Tape;

struct Node {
  Matrix value;
  Matrix grad;  // same shape, zero-initialized
  std::string op;
  std::vector<Node*> parents;
  std::function<void()> backprop;  // accumulates into parents' grads
  std::size_t index = 0;           // position on the tape
};

// Eager reverse-mode tape. Nodes are appended in forward execution order, so
// the list is topologically sorted by construction. A Tape and its Nodes are
// confined to one thread; distinct Tapes may run in parallel.
class Tape {
 public:
  Node* leaf(Matrix value, std::string tag = "leaf");

  Node* matmul(Node* a, Node* b);
  Node* transpose(Node* x);
  Node* add(Node* a, Node* b);
  // matrix + row vector (1 x cols), broadcast down rows. The only broadcast
  // in the library.
  Node* add_row(Node* a, Node* row);
  Node* mul(Node* a, Node* b);  // elementwise
  Node* scale(Node* x, double c);
  // (1x1 scalar node) * matrix node
  Node* scale_by(Node* scalar, Node* x);
  Node* concat_cols(const std::vector<Node*>& parts);
  Node* concat_rows(const std::vector<Node*>& parts);
  Node* row(Node* x, std::size_t r);
  Node* cell(Node* x, std::size_t r, std::size_t c);  // 1x1 slice
  Node* rows(Node* x, std::size_t r0, std::size_t r1);  // [r0, r1)
  Node* sum(Node* x);                                   // -> 1x1
  Node* mean_over(const std::vector<Node*>& xs);

  Node* leaky_relu(Node* x, double slope);
  Node* tanh_(Node* x);
  Node* sigmoid(Node* x);
  Node* softplus(Node* x);
  Node* softmax_rows(Node* x, std::optional<Matrix> additive_mask = std::nullopt);

  // Populates grad on every node reachable from `loss` (a 1x1 node);
  // unreachable nodes keep zero grad. Deterministic: strict reverse tape
  // order, no parallel reductions.
  void backward(Node* loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  Node* emplace(Matrix value, std::string op, std::vector<Node*> parents);

  std::deque<std::unique_ptr<Node>> nodes_;
};

}  // namespace mdgnn
