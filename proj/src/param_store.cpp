#include "mdgnn/param_store.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mdgnn/errors.hpp"

namespace mdgnn {

void ParamStore::insert(const std::string& name, Matrix value) {
  if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  Entry e;
  e.grad = Matrix::zeros(value.rows(), value.cols());
  e.adam_m = Matrix::zeros(value.rows(), value.cols());
  e.adam_v = Matrix::zeros(value.rows(), value.cols());
  e.value = std::move(value);
  params_.emplace(name, std::move(e));
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

std::size_t ParamStore::total_entries() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += v.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [k, v] : params_) v.grad.fill(0.0);
}

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
  // little-endian
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("truncated parameter file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw DataError("truncated parameter file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void ParamStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write("MDGP", 4);
  write_u32(out, 1);  // version
  for (const auto& [name, e] : params_) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(e.value.rows()));
    write_u32(out, static_cast<std::uint32_t>(e.value.cols()));
    for (double v : e.value.data()) write_f64(out, v);
  }
  if (!out) throw DataError("write failure on '" + path + "'");
}

ParamStore ParamStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MDGP", 4) != 0) {
    throw DataError("'" + path + "' is not a parameter file (bad magic)");
  }
  const std::uint32_t version = read_u32(in);
  if (version != 1) {
    throw DataError("unsupported parameter file version " + std::to_string(version));
  }
  ParamStore store;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw DataError("truncated parameter name");
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (auto& v : data) v = read_f64(in);
    store.insert(name, Matrix(rows, cols, std::move(data)));
  }
  return store;
}

bool ParamStore::values_equal(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (const auto& [name, e] : params_) {
    if (!other.contains(name)) return false;
    if (!(other.at(name).value == e.value)) return false;
  }
  return true;
}

Node* ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Node* leaf = tape_.leaf(store_.at(name).value, "param:" + name);
  bound_.emplace(name, leaf);
  return leaf;
}

void ParamBinder::harvest_grads() {
  for (const auto& [name, node] : bound_) {
    auto& g = store_.at(name).grad;
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += node->grad.data()[i];
  }
}

double grad_check(const ExprBuilder& f, ParamStore& params, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw ContractError("grad_check step h must lie in [1e-7, 1e-3]");
  }
  auto eval = [&]() -> double {
    Tape tape;
    ParamBinder bind(tape, params);
    Node* loss = f(tape, bind);
    if (loss->value.rows() != 1 || loss->value.cols() != 1) {
      throw ContractError("grad_check expression must produce a 1x1 loss");
    }
    const double v = loss->value.at(0, 0);
    if (!std::isfinite(v)) throw NumericError("non-finite loss in grad_check");
    return v;
  };

  // Analytic pass.
  params.zero_grads();
  {
    Tape tape;
    ParamBinder bind(tape, params);
    Node* loss = f(tape, bind);
    tape.backward(loss);
    bind.harvest_grads();
  }

  double max_rel = 0.0;
  for (const auto& name : params.names()) {
    auto& e = params.at(name);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double orig = e.value.data()[i];
      e.value.data()[i] = orig + h;
      const double up = eval();
      e.value.data()[i] = orig - h;
      const double down = eval();
      e.value.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      if (!std::isfinite(numeric)) {
        throw NumericError("non-finite central difference at '" + name + "'");
      }
      const double analytic = e.grad.data()[i];
      const double rel = std::fabs(analytic - numeric) /
                         std::max(1.0, std::fabs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace mdgnn
