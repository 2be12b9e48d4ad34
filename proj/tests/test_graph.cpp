#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mdgnn/errors.hpp"
#include "mdgnn/graph.hpp"
#include "mdgnn/synthetic.hpp"

using namespace mdgnn;
namespace fs = std::filesystem;

namespace {

GraphSnapshot tiny_snapshot() {
  GraphSnapshot s;
  s.day = 0;
  s.stock_features = Matrix(3, 2, {1, 2, 3, 4, 5, 6});
  s.bank_features = Matrix(1, 2, {7, 8});
  s.industry_features = Matrix(1, 2, {9, 10});
  s.edges = {
      {Relation::SS, {NodeKind::Stock, 0}, {NodeKind::Stock, 1}, {0.5}},
      {Relation::SB, {NodeKind::Stock, 2}, {NodeKind::Bank, 0}, {0.25}},
      {Relation::SI, {NodeKind::Stock, 0}, {NodeKind::Industry, 0}, {1.0}},
  };
  return s;
}

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("mdgnn-graph-" + tag);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("build_labels matches the defining formula exactly") {
  DynamicGraph g;
  g.prices = Matrix(2, 3, {100.0, 110.0, 99.0, 50.0, 50.0, 75.0});
  g.benchmark = {0.01, -0.02, 0.0};
  g.snapshots.resize(1);
  const LabelFrame f = build_labels(g);
  REQUIRE(f.labels.rows() == 2);
  REQUIRE(f.labels.cols() == 2);
  CHECK(f.labels.at(0, 0) == (110.0 - 100.0) / 100.0 - 0.01);
  CHECK(f.labels.at(0, 1) == (99.0 - 110.0) / 110.0 - (-0.02));
  CHECK(f.labels.at(1, 0) == (50.0 - 50.0) / 50.0 - 0.01);
  CHECK(f.labels.at(1, 1) == (75.0 - 50.0) / 50.0 - (-0.02));
  for (std::size_t i = 0; i < f.valid.size(); ++i) CHECK(f.valid[i] == 1);
}

TEST_CASE("build_labels rejects short or non-positive series") {
  DynamicGraph g;
  g.prices = Matrix(1, 1, {100.0});
  g.benchmark = {0.0};
  CHECK_THROWS_AS(build_labels(g), DataError);

  g.prices = Matrix(1, 2, {100.0, 0.0});
  g.benchmark = {0.0, 0.0};
  CHECK_THROWS_AS(build_labels(g), DataError);
}

TEST_CASE("validate accepts a well-formed snapshot") {
  CHECK(validate(tiny_snapshot()).empty());
}

TEST_CASE("validate flags SS self-loops") {
  auto s = tiny_snapshot();
  s.edges.push_back({Relation::SS, {NodeKind::Stock, 1}, {NodeKind::Stock, 1}, {0.1}});
  const auto v = validate(s);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("self-loop") != std::string::npos);
}

TEST_CASE("validate flags duplicate edges including reversed duplicates") {
  auto s = tiny_snapshot();
  s.edges.push_back({Relation::SS, {NodeKind::Stock, 1}, {NodeKind::Stock, 0}, {0.5}});
  const auto v = validate(s);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("duplicate") != std::string::npos);
}

TEST_CASE("validate flags relation/kind mismatches and bad indices") {
  auto s = tiny_snapshot();
  s.edges.push_back({Relation::SB, {NodeKind::Stock, 0}, {NodeKind::Industry, 0}, {0.1}});
  s.edges.push_back({Relation::SI, {NodeKind::Stock, 9}, {NodeKind::Industry, 0}, {0.1}});
  const auto v = validate(s);
  REQUIRE(v.size() == 2);
  CHECK(v[0].find("mismatch") != std::string::npos);
  CHECK(v[1].find("out of range") != std::string::npos);
}

TEST_CASE("validate flags inconsistent edge feature lengths") {
  auto s = tiny_snapshot();
  s.edges.push_back({Relation::SS, {NodeKind::Stock, 1}, {NodeKind::Stock, 2}, {0.1, 0.2}});
  const auto v = validate(s);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("feature length") != std::string::npos);
}

TEST_CASE("relation_subset is idempotent and monotone") {
  const auto s = tiny_snapshot();
  const auto once = relation_subset(s, {Relation::SS, Relation::SI});
  const auto twice = relation_subset(once, {Relation::SS, Relation::SI});
  CHECK(once == twice);
  CHECK(once.edges.size() == 2);
  CHECK(relation_subset(s, {}).edges.empty());
  CHECK(relation_subset(s, {Relation::SS, Relation::SB, Relation::SI, Relation::II}) == s);
}

TEST_CASE("permute_stocks relabels rows and endpoints, keeping edge order") {
  const auto s = tiny_snapshot();
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto p = permute_stocks(s, perm);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(p.stock_features.at(perm[i], c) == s.stock_features.at(i, c));
    }
  }
  REQUIRE(p.edges.size() == s.edges.size());
  CHECK(p.edges[0].src.index == perm[0]);
  CHECK(p.edges[0].dst.index == perm[1]);
  CHECK(p.edges[1].src.index == perm[2]);
  CHECK(p.edges[1].dst.index == 0);  // bank untouched
  CHECK(p.edges[2].dst.index == 0);  // industry untouched
  CHECK(p.bank_features == s.bank_features);

  CHECK_THROWS_AS(permute_stocks(s, {0, 1}), ContractError);
  CHECK_THROWS_AS(permute_stocks(s, {0, 0, 1}), ContractError);
}

TEST_CASE("save then load is the identity on a generated dataset") {
  MarketConfig cfg = preset("toy");
  cfg.days = 5;
  cfg.seed = 42;
  const DynamicGraph g = generate(cfg);
  const auto dir = temp_dir("roundtrip");
  save(g, dir.string());
  const DynamicGraph loaded = load(dir.string());
  CHECK(loaded == g);
  fs::remove_all(dir);
}

TEST_CASE("load rejects an SS self-loop with a schema error") {
  MarketConfig cfg = preset("toy");
  cfg.days = 4;
  DynamicGraph g = generate(cfg);
  g.snapshots[0].edges.push_back(
      {Relation::SS, {NodeKind::Stock, 1}, {NodeKind::Stock, 1},
       g.snapshots[0].edges[0].features});
  const auto dir = temp_dir("selfloop");
  save(g, dir.string());
  CHECK_THROWS_WITH_AS(load(dir.string()),
                       doctest::Contains("schema error"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("load names the line of a truncated price row") {
  MarketConfig cfg = preset("toy");
  cfg.days = 4;
  const DynamicGraph g = generate(cfg);
  const auto dir = temp_dir("truncated");
  save(g, dir.string());

  // drop the last field of the third data row (file line 4)
  std::ifstream in(dir / "prices.csv");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  lines[3] = lines[3].substr(0, lines[3].rfind(','));
  std::ofstream out(dir / "prices.csv");
  for (const auto& l : lines) out << l << "\n";
  out.close();

  CHECK_THROWS_WITH_AS(load(dir.string()), doctest::Contains("line 4"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("load rejects a changing stock count across days") {
  MarketConfig cfg = preset("toy");
  cfg.days = 4;
  DynamicGraph g = generate(cfg);
  auto& s = g.snapshots[2];
  s.stock_features = Matrix(s.n_stocks() - 1, s.stock_features.cols());
  s.edges.clear();
  const auto dir = temp_dir("count");
  save(g, dir.string());
  CHECK_THROWS_WITH_AS(load(dir.string()),
                       doctest::Contains("stock count changed"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("load rejects non-increasing snapshot days") {
  MarketConfig cfg = preset("toy");
  cfg.days = 4;
  DynamicGraph g = generate(cfg);
  g.snapshots[2].day = g.snapshots[1].day;
  const auto dir = temp_dir("days");
  save(g, dir.string());
  CHECK_THROWS_WITH_AS(load(dir.string()),
                       doctest::Contains("strictly increasing"), DataError);
  fs::remove_all(dir);
}
