#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mdgnn/matrix.hpp"
#include "mdgnn/tape.hpp"

namespace mdgnn {

// Named trainable matrices with gradient slots and Adam moments. Values are
// read-shared during parallel evaluation and exclusively owned during updates.
class ParamStore {
 public:
  struct Entry {
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;
  };

  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  void insert(const std::string& name, Matrix value);
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;

  std::vector<std::string> names() const;  // sorted, so iteration is stable
  std::size_t total_entries() const;

  void zero_grads();

  // Flat binary format: magic "MDGP", version u32, then records of
  // (name length u32, name bytes, rows u32, cols u32, little-endian f64s).
  void save(const std::string& path) const;
  static ParamStore load(const std::string& path);

  bool values_equal(const ParamStore& other) const;

 private:
  std::map<std::string, Entry> params_;
};

// Binds store parameters to leaf nodes on one tape, creating each leaf on
// first use so a forward pass only materializes the params it touches.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

  Node* operator()(const std::string& name);

  // Copies tape gradients back into the store's grad slots (accumulating).
  void harvest_grads();

  ParamStore& store() { return store_; }

 private:
  Tape& tape_;
  ParamStore& store_;
  std::map<std::string, Node*> bound_;
};

// f builds a scalar loss from bound params on the given tape.
using ExprBuilder = std::function<Node*(Tape&, ParamBinder&)>;

// Max over all parameter entries of
// |analytic - central difference| / max(1, |central difference|).
double grad_check(const ExprBuilder& f, ParamStore& params, double h);

}  // namespace mdgnn
