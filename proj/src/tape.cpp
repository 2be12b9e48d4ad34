#include "mdgnn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mdgnn/errors.hpp"

namespace mdgnn {

Node* Tape::emplace(Matrix value, std::string op, std::vector<Node*> parents) {
  if (!value.all_finite()) {
    throw NumericError("non-finite result in op '" + op + "'");
  }
  auto node = std::make_unique<Node>();
  node->grad = Matrix::zeros(value.rows(), value.cols());
  node->value = std::move(value);
  node->op = std::move(op);
  node->parents = std::move(parents);
  node->index = nodes_.size();
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

Node* Tape::leaf(Matrix value, std::string tag) {
  return emplace(std::move(value), std::move(tag), {});
}

Node* Tape::matmul(Node* a, Node* b) {
  Node* n = emplace(Matrix::matmul(a->value, b->value), "matmul", {a, b});
  n->backprop = [n, a, b] {
    const Matrix da = Matrix::matmul(n->grad, b->value.transposed());
    const Matrix db = Matrix::matmul(a->value.transposed(), n->grad);
    for (std::size_t i = 0; i < da.size(); ++i) a->grad.data()[i] += da.data()[i];
    for (std::size_t i = 0; i < db.size(); ++i) b->grad.data()[i] += db.data()[i];
  };
  return n;
}

Node* Tape::transpose(Node* x) {
  Node* n = emplace(x->value.transposed(), "transpose", {x});
  n->backprop = [n, x] {
    const Matrix g = n->grad.transposed();
    for (std::size_t i = 0; i < g.size(); ++i) x->grad.data()[i] += g.data()[i];
  };
  return n;
}

Node* Tape::add(Node* a, Node* b) {
  if (!a->value.same_shape(b->value)) {
    throw DimensionError("add shape mismatch: " + a->value.shape_str() + " vs " +
                         b->value.shape_str());
  }
  Matrix v = a->value;
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] += b->value.data()[i];
  Node* n = emplace(std::move(v), "add", {a, b});
  n->backprop = [n, a, b] {
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      a->grad.data()[i] += n->grad.data()[i];
      b->grad.data()[i] += n->grad.data()[i];
    }
  };
  return n;
}

Node* Tape::add_row(Node* a, Node* row) {
  if (row->value.rows() != 1 || row->value.cols() != a->value.cols()) {
    throw DimensionError("add_row expects 1x" + std::to_string(a->value.cols()) +
                         " bias, got " + row->value.shape_str());
  }
  Matrix v = a->value;
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) v.at(r, c) += row->value.at(0, c);
  Node* n = emplace(std::move(v), "add_row", {a, row});
  n->backprop = [n, a, row] {
    for (std::size_t r = 0; r < n->grad.rows(); ++r)
      for (std::size_t c = 0; c < n->grad.cols(); ++c) {
        a->grad.at(r, c) += n->grad.at(r, c);
        row->grad.at(0, c) += n->grad.at(r, c);
      }
  };
  return n;
}

Node* Tape::mul(Node* a, Node* b) {
  if (!a->value.same_shape(b->value)) {
    throw DimensionError("mul shape mismatch: " + a->value.shape_str() + " vs " +
                         b->value.shape_str());
  }
  Matrix v = a->value;
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] *= b->value.data()[i];
  Node* n = emplace(std::move(v), "mul", {a, b});
  n->backprop = [n, a, b] {
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      a->grad.data()[i] += n->grad.data()[i] * b->value.data()[i];
      b->grad.data()[i] += n->grad.data()[i] * a->value.data()[i];
    }
  };
  return n;
}

Node* Tape::scale(Node* x, double c) {
  Matrix v = x->value;
  for (auto& e : v.data()) e *= c;
  Node* n = emplace(std::move(v), "scale", {x});
  n->backprop = [n, x, c] {
    for (std::size_t i = 0; i < n->grad.size(); ++i)
      x->grad.data()[i] += c * n->grad.data()[i];
  };
  return n;
}

Node* Tape::scale_by(Node* scalar, Node* x) {
  if (scalar->value.rows() != 1 || scalar->value.cols() != 1) {
    throw DimensionError("scale_by expects a 1x1 scalar, got " +
                         scalar->value.shape_str());
  }
  const double s = scalar->value.at(0, 0);
  Matrix v = x->value;
  for (auto& e : v.data()) e *= s;
  Node* n = emplace(std::move(v), "scale_by", {scalar, x});
  n->backprop = [n, scalar, x, s] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      acc += n->grad.data()[i] * x->value.data()[i];
      x->grad.data()[i] += s * n->grad.data()[i];
    }
    scalar->grad.at(0, 0) += acc;
  };
  return n;
}

Node* Tape::concat_cols(const std::vector<Node*>& parts) {
  if (parts.empty()) throw ContractError("concat_cols of empty list");
  const std::size_t r = parts[0]->value.rows();
  std::size_t total = 0;
  for (Node* p : parts) {
    if (p->value.rows() != r) {
      throw DimensionError("concat_cols row mismatch: " +
                           parts[0]->value.shape_str() + " vs " +
                           p->value.shape_str());
    }
    total += p->value.cols();
  }
  Matrix v(r, total);
  std::size_t off = 0;
  for (Node* p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t c = 0; c < p->value.cols(); ++c)
        v.at(i, off + c) = p->value.at(i, c);
    off += p->value.cols();
  }
  Node* n = emplace(std::move(v), "concat_cols", parts);
  n->backprop = [n] {
    std::size_t off2 = 0;
    for (Node* p : n->parents) {
      for (std::size_t i = 0; i < p->grad.rows(); ++i)
        for (std::size_t c = 0; c < p->grad.cols(); ++c)
          p->grad.at(i, c) += n->grad.at(i, off2 + c);
      off2 += p->grad.cols();
    }
  };
  return n;
}

Node* Tape::concat_rows(const std::vector<Node*>& parts) {
  if (parts.empty()) throw ContractError("concat_rows of empty list");
  const std::size_t c = parts[0]->value.cols();
  std::size_t total = 0;
  for (Node* p : parts) {
    if (p->value.cols() != c) {
      throw DimensionError("concat_rows col mismatch: " +
                           parts[0]->value.shape_str() + " vs " +
                           p->value.shape_str());
    }
    total += p->value.rows();
  }
  Matrix v(total, c);
  std::size_t off = 0;
  for (Node* p : parts) {
    for (std::size_t i = 0; i < p->value.rows(); ++i)
      for (std::size_t j = 0; j < c; ++j) v.at(off + i, j) = p->value.at(i, j);
    off += p->value.rows();
  }
  Node* n = emplace(std::move(v), "concat_rows", parts);
  n->backprop = [n] {
    std::size_t off2 = 0;
    for (Node* p : n->parents) {
      for (std::size_t i = 0; i < p->grad.rows(); ++i)
        for (std::size_t j = 0; j < p->grad.cols(); ++j)
          p->grad.at(i, j) += n->grad.at(off2 + i, j);
      off2 += p->grad.rows();
    }
  };
  return n;
}

Node* Tape::row(Node* x, std::size_t r) { return rows(x, r, r + 1); }

Node* Tape::cell(Node* x, std::size_t r, std::size_t c) {
  if (r >= x->value.rows() || c >= x->value.cols()) {
    throw DimensionError("cell (" + std::to_string(r) + "," + std::to_string(c) +
                         ") out of range for " + x->value.shape_str());
  }
  Node* n = emplace(Matrix(1, 1, {x->value.at(r, c)}), "cell", {x});
  n->backprop = [n, x, r, c] { x->grad.at(r, c) += n->grad.at(0, 0); };
  return n;
}

Node* Tape::rows(Node* x, std::size_t r0, std::size_t r1) {
  if (r0 >= r1 || r1 > x->value.rows()) {
    throw DimensionError("rows slice [" + std::to_string(r0) + "," +
                         std::to_string(r1) + ") out of range for " +
                         x->value.shape_str());
  }
  Matrix v(r1 - r0, x->value.cols());
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t c = 0; c < x->value.cols(); ++c)
      v.at(i - r0, c) = x->value.at(i, c);
  Node* n = emplace(std::move(v), "rows", {x});
  n->backprop = [n, x, r0] {
    for (std::size_t i = 0; i < n->grad.rows(); ++i)
      for (std::size_t c = 0; c < n->grad.cols(); ++c)
        x->grad.at(r0 + i, c) += n->grad.at(i, c);
  };
  return n;
}

Node* Tape::sum(Node* x) {
  double s = 0.0;
  for (double v : x->value.data()) s += v;
  Node* n = emplace(Matrix(1, 1, {s}), "sum", {x});
  n->backprop = [n, x] {
    const double g = n->grad.at(0, 0);
    for (auto& e : x->grad.data()) e += g;
  };
  return n;
}

Node* Tape::mean_over(const std::vector<Node*>& xs) {
  if (xs.empty()) throw ContractError("mean_over of empty set");
  for (Node* x : xs) {
    if (!x->value.same_shape(xs[0]->value)) {
      throw DimensionError("mean_over shape mismatch: " +
                           xs[0]->value.shape_str() + " vs " +
                           x->value.shape_str());
    }
  }
  Matrix v = Matrix::zeros(xs[0]->value.rows(), xs[0]->value.cols());
  for (Node* x : xs)
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] += x->value.data()[i];
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (auto& e : v.data()) e *= inv;
  Node* n = emplace(std::move(v), "mean_over", xs);
  n->backprop = [n, inv] {
    for (Node* p : n->parents)
      for (std::size_t i = 0; i < n->grad.size(); ++i)
        p->grad.data()[i] += inv * n->grad.data()[i];
  };
  return n;
}

Node* Tape::leaky_relu(Node* x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw ContractError("leaky_relu slope must lie in (0,1)");
  }
  Matrix v = x->value;
  for (auto& e : v.data())
    if (e < 0.0) e *= slope;
  Node* n = emplace(std::move(v), "leaky_relu", {x});
  n->backprop = [n, x, slope] {
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      // subgradient at 0 defined as 1 (positive-branch convention)
      const double f = x->value.data()[i] >= 0.0 ? 1.0 : slope;
      x->grad.data()[i] += f * n->grad.data()[i];
    }
  };
  return n;
}

Node* Tape::tanh_(Node* x) {
  Matrix v = x->value;
  for (auto& e : v.data()) e = std::tanh(e);
  Node* n = emplace(std::move(v), "tanh", {x});
  n->backprop = [n, x] {
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      const double y = n->value.data()[i];
      x->grad.data()[i] += (1.0 - y * y) * n->grad.data()[i];
    }
  };
  return n;
}

Node* Tape::sigmoid(Node* x) {
  Matrix v = x->value;
  for (auto& e : v.data()) {
    e = e >= 0.0 ? 1.0 / (1.0 + std::exp(-e))
                 : std::exp(e) / (1.0 + std::exp(e));
  }
  Node* n = emplace(std::move(v), "sigmoid", {x});
  n->backprop = [n, x] {
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      const double y = n->value.data()[i];
      x->grad.data()[i] += y * (1.0 - y) * n->grad.data()[i];
    }
  };
  return n;
}

Node* Tape::softplus(Node* x) {
  Matrix v = x->value;
  for (auto& e : v.data())
    e = std::max(e, 0.0) + std::log1p(std::exp(-std::fabs(e)));
  Node* n = emplace(std::move(v), "softplus", {x});
  n->backprop = [n, x] {
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      const double u = x->value.data()[i];
      const double s = u >= 0.0 ? 1.0 / (1.0 + std::exp(-u))
                                : std::exp(u) / (1.0 + std::exp(u));
      x->grad.data()[i] += s * n->grad.data()[i];
    }
  };
  return n;
}

Node* Tape::softmax_rows(Node* x, std::optional<Matrix> additive_mask) {
  if (additive_mask && !additive_mask->same_shape(x->value)) {
    throw DimensionError("softmax mask shape " + additive_mask->shape_str() +
                         " does not match input " + x->value.shape_str());
  }
  const std::size_t R = x->value.rows(), C = x->value.cols();
  Matrix v(R, C);
  // masked[r*C+c] marks excluded positions
  std::vector<char> masked(R * C, 0);
  for (std::size_t r = 0; r < R; ++r) {
    double rowmax = -std::numeric_limits<double>::infinity();
    std::size_t unmasked = 0;
    for (std::size_t c = 0; c < C; ++c) {
      double bias = additive_mask ? additive_mask->at(r, c) : 0.0;
      if (bias == kMaskedSentinel) {
        masked[r * C + c] = 1;
        continue;
      }
      ++unmasked;
      rowmax = std::max(rowmax, x->value.at(r, c) + bias);
    }
    if (unmasked == 0) {
      throw NumericError("softmax row " + std::to_string(r) +
                         " is fully masked (degenerate row)");
    }
    std::vector<double> exps;
    exps.reserve(unmasked);
    for (std::size_t c = 0; c < C; ++c) {
      if (masked[r * C + c]) continue;
      double bias = additive_mask ? additive_mask->at(r, c) : 0.0;
      const double e = std::exp(x->value.at(r, c) + bias - rowmax);
      v.at(r, c) = e;
      exps.push_back(e);
    }
    // value-ordered summation: the denominator is invariant under any
    // reordering of the entries (exact permutation equivariance upstream)
    std::sort(exps.begin(), exps.end());
    double denom = 0.0;
    for (double e : exps) denom += e;
    for (std::size_t c = 0; c < C; ++c) {
      if (masked[r * C + c]) {
        v.at(r, c) = 0.0;  // exactly zero, not just tiny
      } else {
        v.at(r, c) /= denom;
      }
    }
  }
  Node* n = emplace(std::move(v), "softmax_rows", {x});
  n->backprop = [n, x, masked = std::move(masked), C] {
    for (std::size_t r = 0; r < n->grad.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        if (masked[r * C + c]) continue;
        dot += n->grad.at(r, c) * n->value.at(r, c);
      }
      for (std::size_t c = 0; c < C; ++c) {
        if (masked[r * C + c]) continue;
        x->grad.at(r, c) += n->value.at(r, c) * (n->grad.at(r, c) - dot);
      }
    }
  };
  return n;
}

void Tape::backward(Node* loss) {
  if (loss->value.rows() != 1 || loss->value.cols() != 1) {
    throw ContractError("backward expects a 1x1 loss node, got " +
                        loss->value.shape_str());
  }
  for (auto& n : nodes_) n->grad.fill(0.0);

  // Reachability from the loss over parent edges; unreachable nodes keep
  // zero grad and their backprop is skipped.
  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<Node*> stack{loss};
  reachable[loss->index] = 1;
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    for (Node* p : n->parents) {
      if (!reachable[p->index]) {
        reachable[p->index] = 1;
        stack.push_back(p);
      }
    }
  }

  loss->grad.at(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (reachable[n->index] && n->backprop) n->backprop();
  }
}

}  // namespace mdgnn
