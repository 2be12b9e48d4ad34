#include "mdgnn/graph.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "mdgnn/errors.hpp"

namespace mdgnn {

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Stock: return "S";
    case NodeKind::Bank: return "B";
    case NodeKind::Industry: return "I";
  }
  return "?";
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::SS: return "SS";
    case Relation::SB: return "SB";
    case Relation::SI: return "SI";
    case Relation::II: return "II";
  }
  return "?";
}

Relation relation_from_string(const std::string& s) {
  if (s == "SS") return Relation::SS;
  if (s == "SB") return Relation::SB;
  if (s == "SI") return Relation::SI;
  if (s == "II") return Relation::II;
  throw DataError("unknown relation '" + s + "'");
}

LabelFrame build_labels(const DynamicGraph& g) {
  const std::size_t n = g.n_stocks(), T = g.n_days();
  if (T < 2) throw DataError("need at least 2 days to build labels");
  if (g.benchmark.size() < T) throw DataError("benchmark series shorter than price series");
  LabelFrame frame;
  frame.labels = Matrix::zeros(n, T - 1);
  frame.valid.assign(n * (T - 1), 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const double p0 = g.prices.at(i, t);
      const double p1 = g.prices.at(i, t + 1);
      if (!(p0 > 0.0) || !(p1 > 0.0)) {
        throw DataError("non-positive price for stock " + std::to_string(i) +
                        " at day " + std::to_string(!(p0 > 0.0) ? t : t + 1));
      }
      frame.labels.at(i, t) = (p1 - p0) / p0 - g.benchmark[t];
    }
  }
  return frame;
}

namespace {

std::pair<NodeKind, NodeKind> endpoint_kinds(Relation r) {
  switch (r) {
    case Relation::SS: return {NodeKind::Stock, NodeKind::Stock};
    case Relation::SB: return {NodeKind::Stock, NodeKind::Bank};
    case Relation::SI: return {NodeKind::Stock, NodeKind::Industry};
    case Relation::II: return {NodeKind::Industry, NodeKind::Industry};
  }
  return {NodeKind::Stock, NodeKind::Stock};
}

std::size_t kind_count(const GraphSnapshot& s, NodeKind k) {
  switch (k) {
    case NodeKind::Stock: return s.n_stocks();
    case NodeKind::Bank: return s.n_banks();
    case NodeKind::Industry: return s.n_industries();
  }
  return 0;
}

std::string edge_str(const EdgeRecord& e) {
  return std::string(to_string(e.relation)) + " " + to_string(e.src.kind) +
         std::to_string(e.src.index) + "-" + to_string(e.dst.kind) +
         std::to_string(e.dst.index);
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError("parse error at line " + std::to_string(line_no) +
                    ": bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

std::vector<std::string> validate(const GraphSnapshot& s) {
  std::vector<std::string> violations;
  if (s.bank_features.rows() > 0 && s.bank_features.cols() != s.stock_features.cols()) {
    violations.push_back("bank feature dim differs from stock feature dim");
  }
  if (s.industry_features.rows() > 0 &&
      s.industry_features.cols() != s.stock_features.cols()) {
    violations.push_back("industry feature dim differs from stock feature dim");
  }
  std::size_t d_e = 0;
  bool have_d_e = false;
  std::set<std::tuple<Relation, int, std::size_t, int, std::size_t>> seen;
  for (const auto& e : s.edges) {
    const auto [ka, kb] = endpoint_kinds(e.relation);
    if (e.src.kind != ka || e.dst.kind != kb) {
      violations.push_back("relation/kind mismatch: " + edge_str(e));
      continue;
    }
    if (e.src.index >= kind_count(s, e.src.kind) ||
        e.dst.index >= kind_count(s, e.dst.kind)) {
      violations.push_back("endpoint index out of range: " + edge_str(e));
    }
    if (e.relation == Relation::SS && e.src == e.dst) {
      violations.push_back("SS self-loop at stock " + std::to_string(e.src.index));
    }
    if (!have_d_e) {
      d_e = e.features.size();
      have_d_e = true;
    } else if (e.features.size() != d_e) {
      violations.push_back("edge feature length " + std::to_string(e.features.size()) +
                           " differs from " + std::to_string(d_e) + ": " + edge_str(e));
    }
    // undirected storage: (rel, a, b) and (rel, b, a) are the same edge
    auto key = std::make_tuple(e.relation, static_cast<int>(e.src.kind), e.src.index,
                               static_cast<int>(e.dst.kind), e.dst.index);
    if (e.src.kind == e.dst.kind && e.dst.index < e.src.index) {
      key = std::make_tuple(e.relation, static_cast<int>(e.dst.kind), e.dst.index,
                            static_cast<int>(e.src.kind), e.src.index);
    }
    if (!seen.insert(key).second) {
      violations.push_back("duplicate edge: " + edge_str(e));
    }
  }
  return violations;
}

GraphSnapshot permute_stocks(const GraphSnapshot& s,
                             const std::vector<std::size_t>& perm) {
  const std::size_t n = s.n_stocks();
  if (perm.size() != n) {
    throw ContractError("permutation length " + std::to_string(perm.size()) +
                        " does not match stock count " + std::to_string(n));
  }
  std::vector<char> hit(n, 0);
  for (std::size_t p : perm) {
    if (p >= n || hit[p]) throw ContractError("invalid stock permutation");
    hit[p] = 1;
  }
  GraphSnapshot out = s;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < s.stock_features.cols(); ++c)
      out.stock_features.at(perm[i], c) = s.stock_features.at(i, c);
  for (auto& e : out.edges) {
    if (e.src.kind == NodeKind::Stock) e.src.index = perm[e.src.index];
    if (e.dst.kind == NodeKind::Stock) e.dst.index = perm[e.dst.index];
  }
  return out;
}

GraphSnapshot relation_subset(const GraphSnapshot& s,
                              const std::vector<Relation>& keep) {
  GraphSnapshot out = s;
  out.edges.clear();
  for (const auto& e : s.edges) {
    if (std::find(keep.begin(), keep.end(), e.relation) != keep.end()) {
      out.edges.push_back(e);
    }
  }
  return out;
}

void save(const DynamicGraph& g, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream out(fs::path(dir) / "snapshots.jsonl");
    if (!out) throw DataError("cannot write snapshots.jsonl in '" + dir + "'");
    for (const auto& s : g.snapshots) {
      nlohmann::json j;
      j["day"] = s.day;
      auto dump_kind = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t r = 0; r < m.rows(); ++r) {
          nlohmann::json row = nlohmann::json::array();
          for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m.at(r, c));
          rows.push_back(std::move(row));
        }
        return rows;
      };
      j["nodes"]["S"] = dump_kind(s.stock_features);
      j["nodes"]["B"] = dump_kind(s.bank_features);
      j["nodes"]["I"] = dump_kind(s.industry_features);
      nlohmann::json edges = nlohmann::json::array();
      for (const auto& e : s.edges) {
        edges.push_back({{"rel", to_string(e.relation)},
                         {"src", e.src.index},
                         {"dst", e.dst.index},
                         {"feat", e.features}});
      }
      j["edges"] = std::move(edges);
      out << j.dump() << "\n";
    }
  }
  {
    std::ofstream out(fs::path(dir) / "prices.csv");
    if (!out) throw DataError("cannot write prices.csv in '" + dir + "'");
    out << "stock";
    for (std::size_t t = 0; t < g.n_days(); ++t) out << ",day" << t;
    out << "\n";
    for (std::size_t i = 0; i < g.n_stocks(); ++i) {
      out << i;
      for (std::size_t t = 0; t < g.n_days(); ++t)
        out << "," << format_double(g.prices.at(i, t));
      out << "\n";
    }
  }
  {
    std::ofstream out(fs::path(dir) / "benchmark.csv");
    if (!out) throw DataError("cannot write benchmark.csv in '" + dir + "'");
    out << "day,return\n";
    for (std::size_t t = 0; t < g.benchmark.size(); ++t)
      out << t << "," << format_double(g.benchmark[t]) << "\n";
  }
}

DynamicGraph load(const std::string& dir) {
  namespace fs = std::filesystem;
  DynamicGraph g;

  {
    std::ifstream in(fs::path(dir) / "snapshots.jsonl");
    if (!in) throw DataError("cannot open snapshots.jsonl in '" + dir + "'");
    std::string line;
    std::size_t line_no = 0;
    long last_day = -1;
    std::size_t n_stocks = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& ex) {
        throw DataError("parse error at snapshots.jsonl line " +
                        std::to_string(line_no) + ": " + ex.what());
      }
      GraphSnapshot s;
      try {
        s.day = j.at("day").get<std::size_t>();
        auto load_kind = [](const nlohmann::json& rows) {
          const std::size_t nr = rows.size();
          const std::size_t nc = nr == 0 ? 0 : rows.at(0).size();
          std::vector<double> data;
          data.reserve(nr * nc);
          for (const auto& row : rows) {
            if (row.size() != nc) throw DataError("ragged node feature rows");
            for (const auto& v : row) data.push_back(v.get<double>());
          }
          return Matrix(nr, nc, std::move(data));
        };
        s.stock_features = load_kind(j.at("nodes").at("S"));
        s.bank_features = load_kind(j.at("nodes").at("B"));
        s.industry_features = load_kind(j.at("nodes").at("I"));
        for (const auto& je : j.at("edges")) {
          EdgeRecord e;
          e.relation = relation_from_string(je.at("rel").get<std::string>());
          const auto [ka, kb] = endpoint_kinds(e.relation);
          e.src = {ka, je.at("src").get<std::size_t>()};
          e.dst = {kb, je.at("dst").get<std::size_t>()};
          e.features = je.at("feat").get<std::vector<double>>();
          s.edges.push_back(std::move(e));
        }
      } catch (const nlohmann::json::exception& ex) {
        throw DataError("parse error at snapshots.jsonl line " +
                        std::to_string(line_no) + ": " + ex.what());
      }
      if (long(s.day) <= last_day) {
        throw DataError("snapshot days not strictly increasing at line " +
                        std::to_string(line_no));
      }
      last_day = long(s.day);
      if (g.snapshots.empty()) {
        n_stocks = s.n_stocks();
      } else if (s.n_stocks() != n_stocks) {
        throw DataError("schema error: stock count changed from " +
                        std::to_string(n_stocks) + " to " +
                        std::to_string(s.n_stocks()) + " at day " +
                        std::to_string(s.day));
      }
      const auto violations = validate(s);
      if (!violations.empty()) {
        throw DataError("schema error at day " + std::to_string(s.day) + ": " +
                        violations.front());
      }
      g.snapshots.push_back(std::move(s));
    }
    if (g.snapshots.empty()) throw DataError("snapshots.jsonl is empty");
  }

  {
    std::ifstream in(fs::path(dir) / "prices.csv");
    if (!in) throw DataError("cannot open prices.csv in '" + dir + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("prices.csv is empty");
    const auto header = split_csv(line);
    if (header.empty() || header[0] != "stock") {
      throw DataError("prices.csv header must start with 'stock'");
    }
    const std::size_t T = header.size() - 1;
    std::vector<double> data;
    std::size_t rows = 0, line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto fields = split_csv(line);
      if (fields.size() != T + 1) {
        throw DataError("parse error at prices.csv line " + std::to_string(line_no) +
                        ": expected " + std::to_string(T + 1) + " fields, got " +
                        std::to_string(fields.size()));
      }
      for (std::size_t t = 0; t < T; ++t)
        data.push_back(parse_double(fields[t + 1], line_no));
      ++rows;
    }
    g.prices = Matrix(rows, T, std::move(data));
    for (std::size_t i = 0; i < g.prices.size(); ++i) {
      if (!(g.prices.data()[i] > 0.0)) {
        throw DataError("non-positive price at stock " + std::to_string(i / T) +
                        " day " + std::to_string(i % T));
      }
    }
  }

  {
    std::ifstream in(fs::path(dir) / "benchmark.csv");
    if (!in) throw DataError("cannot open benchmark.csv in '" + dir + "'");
    std::string line;
    if (!std::getline(in, line) || line != "day,return") {
      throw DataError("benchmark.csv header must be 'day,return'");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto fields = split_csv(line);
      if (fields.size() != 2) {
        throw DataError("parse error at benchmark.csv line " + std::to_string(line_no));
      }
      g.benchmark.push_back(parse_double(fields[1], line_no));
    }
  }

  if (g.prices.rows() != g.snapshots.front().n_stocks()) {
    throw DataError("schema error: prices.csv rows (" + std::to_string(g.prices.rows()) +
                    ") do not match snapshot stock count (" +
                    std::to_string(g.snapshots.front().n_stocks()) + ")");
  }
  return g;
}

}  // namespace mdgnn
