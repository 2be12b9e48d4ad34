#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mdgnn/errors.hpp"
#include "mdgnn/matrix.hpp"
#include "mdgnn/param_store.hpp"
#include "mdgnn/rng.hpp"
#include "mdgnn/tape.hpp"

using namespace mdgnn;

TEST_CASE("matrix rejects non-finite entries and bad shapes") {
  CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::nan("")}), NumericError);
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("matmul identity cases") {
  Matrix a{{1, 2}, {3, 4}};
  CHECK(Matrix::matmul(a, Matrix::identity(2)) == a);
  Matrix v{{5}, {7}};
  CHECK(Matrix::matmul(Matrix::identity(2), v) == v);
  CHECK_THROWS_AS(Matrix::matmul(a, Matrix(3, 1)), DimensionError);
}

TEST_CASE("matmul backward: grad of sum(A*B) wrt A is B^T broadcast") {
  Tape tape;
  Node* a = tape.leaf(Matrix{{1, 2}});
  Node* b = tape.leaf(Matrix{{3}, {4}});
  Node* loss = tape.sum(tape.matmul(a, b));
  tape.backward(loss);
  CHECK(a->grad == Matrix{{3, 4}});
  CHECK(b->grad == Matrix{{1}, {2}});
}

TEST_CASE("softmax rows: symmetry, mask, and hand-derived values") {
  Tape tape;
  Node* x = tape.leaf(Matrix{{0, 0}});
  Node* y = tape.softmax_rows(x);
  CHECK(y->value.at(0, 0) == doctest::Approx(0.5));
  CHECK(y->value.at(0, 1) == doctest::Approx(0.5));

  Node* masked_in = tape.leaf(Matrix{{7.3, 1.0}});
  Matrix mask(1, 2);
  mask.at(0, 1) = kMaskedSentinel;
  Node* masked = tape.softmax_rows(masked_in, mask);
  CHECK(masked->value.at(0, 0) == 1.0);
  CHECK(masked->value.at(0, 1) == 0.0);  // exactly zero

  // e^x / sum(e^x) at [ln 1, ln 3], checked against hand evaluation
  Node* z = tape.softmax_rows(tape.leaf(Matrix{{std::log(1.0), std::log(3.0)}}));
  CHECK(z->value.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(z->value.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("fully masked softmax row is rejected") {
  Tape tape;
  Node* x = tape.leaf(Matrix{{1.0, 2.0}});
  Matrix mask(1, 2);
  mask.at(0, 0) = kMaskedSentinel;
  mask.at(0, 1) = kMaskedSentinel;
  CHECK_THROWS_AS(tape.softmax_rows(x, mask), NumericError);
}

TEST_CASE("softmax simplex property on random rows") {
  Rng rng(7);
  Tape tape;
  for (int rep = 0; rep < 50; ++rep) {
    Matrix m(3, 5);
    for (auto& v : m.data()) v = rng.normal(0.0, 3.0);
    Node* y = tape.softmax_rows(tape.leaf(m));
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 5; ++c) {
        const double v = y->value.at(r, c);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        s += v;
      }
      CHECK(std::fabs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("leaky relu values and subgradient at zero") {
  Tape tape;
  Node* x = tape.leaf(Matrix{{2.0, -1.0, 0.0}});
  Node* y = tape.leaky_relu(x, 0.2);
  CHECK(y->value == Matrix{{2.0, -0.2, 0.0}});
  tape.backward(tape.sum(y));
  CHECK(x->grad == Matrix{{1.0, 0.2, 1.0}});  // subgradient at 0 is 1
}

TEST_CASE("elementwise and structural ops") {
  Tape tape;
  CHECK(tape.sigmoid(tape.leaf(Matrix{{0.0}}))->value.at(0, 0) == 0.5);
  Node* m = tape.mean_over({tape.leaf(Matrix{{2.0}}), tape.leaf(Matrix{{4.0}})});
  CHECK(m->value.at(0, 0) == 3.0);
  Node* c = tape.concat_cols(
      {tape.leaf(Matrix{{1.0}}), tape.leaf(Matrix{{2.0}}), tape.leaf(Matrix{{3.0}})});
  CHECK(c->value == Matrix{{1.0, 2.0, 3.0}});
  CHECK_THROWS_AS(tape.add(tape.leaf(Matrix(1, 2)), tape.leaf(Matrix(2, 1))),
                  DimensionError);
}

TEST_CASE("backward: loss = x^2 at x=3 gives grad 6") {
  Tape tape;
  Node* x = tape.leaf(Matrix{{3.0}});
  Node* loss = tape.mul(x, x);
  tape.backward(loss);
  CHECK(x->grad.at(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("backward: loss = sum(sigmoid(x)) at x=0 gives grad 0.25") {
  Tape tape;
  Node* x = tape.leaf(Matrix{{0.0}});
  tape.backward(tape.sum(tape.sigmoid(x)));
  CHECK(x->grad.at(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("backward requires scalar loss and is deterministic") {
  Tape tape;
  Node* x = tape.leaf(Matrix{{1.0, 2.0}});
  CHECK_THROWS_AS(tape.backward(x), ContractError);
  Node* loss = tape.sum(tape.tanh_(x));
  tape.backward(loss);
  Matrix g1 = x->grad;
  tape.backward(loss);
  CHECK(x->grad == g1);  // bitwise identical
}

TEST_CASE("unreachable nodes keep zero grad") {
  Tape tape;
  Node* x = tape.leaf(Matrix{{2.0}});
  Node* unrelated = tape.mul(x, x);
  Node* y = tape.leaf(Matrix{{5.0}});
  tape.backward(tape.mul(y, y));
  CHECK(unrelated->grad.at(0, 0) == 0.0);
  CHECK(x->grad.at(0, 0) == 0.0);
}

namespace {

// Random composite expression exercising most ops; used against the
// finite-difference oracle below.
Node* composite(Tape& tape, ParamBinder& p) {
  Node* w = p("w");       // 3x3
  Node* b = p("b");       // 1x3
  Node* x = p("x");       // 2x3
  Node* h = tape.tanh_(tape.add_row(tape.matmul(x, w), b));
  Node* s = tape.softmax_rows(tape.leaky_relu(h, 0.2));
  Node* z = tape.mul(s, tape.sigmoid(h));
  Node* t = tape.concat_cols({tape.row(z, 0), tape.row(z, 1)});
  return tape.sum(tape.mul(t, t));
}

}  // namespace

TEST_CASE("grad_check: composite expression matches central differences") {
  Rng rng(13);
  ParamStore store;
  auto rand_mat = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (auto& v : m.data()) v = rng.normal(0.0, 0.7);
    return m;
  };
  store.insert("w", rand_mat(3, 3));
  store.insert("b", rand_mat(1, 3));
  store.insert("x", rand_mat(2, 3));
  const double err = grad_check(composite, store, 1e-5);
  CHECK(err <= 1e-4);
}

TEST_CASE("grad_check: linear model is exact to 1e-8") {
  ParamStore store;
  store.insert("w", Matrix{{0.3}, {-0.2}, {0.5}});
  auto linear = [](Tape& tape, ParamBinder& p) {
    Node* x = tape.leaf(Matrix{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    return tape.sum(tape.matmul(x, p("w")));
  };
  CHECK(grad_check(linear, store, 1e-4) <= 1e-8);
}

TEST_CASE("grad_check rejects out-of-range h") {
  ParamStore store;
  store.insert("w", Matrix{{1.0}});
  auto f = [](Tape& tape, ParamBinder& p) { return tape.sum(p("w")); };
  CHECK_THROWS_AS(grad_check(f, store, 1e-2), ContractError);
}

TEST_CASE("param store serialization round-trips bitwise") {
  ParamStore store;
  Rng rng(42);
  Matrix a(3, 4), b(1, 7);
  for (auto& v : a.data()) v = rng.normal(0.0, 1.0);
  for (auto& v : b.data()) v = rng.uniform(-2.0, 2.0);
  store.insert("layer.weight", a);
  store.insert("layer.bias", b);
  const auto path = std::filesystem::temp_directory_path() / "mdgnn_params.bin";
  store.save(path.string());
  ParamStore loaded = ParamStore::load(path.string());
  CHECK(loaded.values_equal(store));
  CHECK(loaded.at("layer.weight").value == a);
  std::filesystem::remove(path);
}

TEST_CASE("param store load rejects bad magic") {
  const auto path = std::filesystem::temp_directory_path() / "mdgnn_bad.bin";
  {
    std::ofstream out(path);
    out << "NOPE1234";
  }
  CHECK_THROWS_AS(ParamStore::load(path.string()), DataError);
  std::filesystem::remove(path);
}
