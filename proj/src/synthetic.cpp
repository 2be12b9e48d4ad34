#include "mdgnn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mdgnn/errors.hpp"
#include "mdgnn/rng.hpp"

namespace mdgnn {

void MarketConfig::validate() const {
  if (n_stocks < 1 || n_banks < 1 || n_industries < 1) {
    throw ConfigError("node counts must be >= 1");
  }
  if (days < window_hint + 2) {
    throw ConfigError("days must be >= window_hint + 2");
  }
  if (industry_beta < 0.0 || bank_beta < 0.0) {
    throw ConfigError("factor betas must be >= 0");
  }
  if (noise_sigma < 0.0 || obs_sigma < 0.0) {
    throw ConfigError("noise levels must be >= 0");
  }
  if (holdings_churn < 0.0 || holdings_churn > 1.0) {
    throw ConfigError("holdings_churn must lie in [0,1]");
  }
  if (!(factor_persistence >= 0.0 && factor_persistence < 1.0)) {
    throw ConfigError("factor_persistence must lie in [0,1)");
  }
  if (context_signal_gain < 0.0) {
    throw ConfigError("context_signal_gain must be >= 0");
  }
  if (signal_dims > d_in) {
    throw ConfigError("signal_dims cannot exceed d_in");
  }
  if (d_in < 1 || d_e < 1) {
    throw ConfigError("feature dims must be >= 1");
  }
}

MarketConfig preset(const std::string& name) {
  MarketConfig cfg;
  if (name == "csi100-like") {
    cfg.n_stocks = 100;
    cfg.n_banks = 196;
    cfg.n_industries = 97;
    cfg.days = 250;
    return cfg;
  }
  if (name == "toy") {
    cfg.n_stocks = 10;
    cfg.n_banks = 4;
    cfg.n_industries = 3;
    cfg.days = 40;
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

namespace {

// Per-edge features drawn from an edge-keyed substream, so the values do not
// depend on generation order or on which day the edge first appears.
std::vector<double> edge_features(const MarketConfig& cfg, const std::string& key) {
  Rng rng(derive_seed(cfg.seed, "edgefeat:" + key));
  std::vector<double> feat(cfg.d_e);
  feat[0] = rng.uniform(0.5, 1.5);  // connection strength
  for (std::size_t i = 1; i < cfg.d_e; ++i) feat[i] = rng.normal(0.0, 0.1);
  return feat;
}

std::string edge_key(Relation r, std::size_t a, std::size_t b) {
  return std::string(to_string(r)) + ":" + std::to_string(a) + ":" + std::to_string(b);
}

}  // namespace

DynamicGraph generate(const MarketConfig& cfg) {
  cfg.validate();
  const std::size_t nS = cfg.n_stocks, nB = cfg.n_banks, nI = cfg.n_industries;
  const std::size_t T = cfg.days;
  const double phi = cfg.factor_persistence;
  const double innov = std::sqrt(1.0 - phi * phi);

  Rng structure(derive_seed(cfg.seed, "structure"));
  Rng factors(derive_seed(cfg.seed, "factors"));
  Rng features(derive_seed(cfg.seed, "features"));
  Rng churn(derive_seed(cfg.seed, "churn"));

  // --- static structure ---
  std::vector<std::size_t> industry_of(nS);
  for (std::size_t i = 0; i < nS; ++i) industry_of[i] = structure.index(nI);

  // II links between industries whose factors co-move
  std::set<std::pair<std::size_t, std::size_t>> ii_links;
  if (nI >= 2) {
    const std::size_t n_links = std::max<std::size_t>(1, nI / 2);
    while (ii_links.size() < n_links) {
      std::size_t a = structure.index(nI), b = structure.index(nI);
      if (a == b) continue;
      ii_links.insert({std::min(a, b), std::max(a, b)});
    }
  }

  // SS edges between same-owner stocks
  const std::size_t n_owners = std::max<std::size_t>(2, nS / 3);
  std::vector<std::size_t> owner_of(nS);
  for (std::size_t i = 0; i < nS; ++i) owner_of[i] = structure.index(n_owners);

  // initial bank holdings: each stock held by k distinct banks
  const std::size_t k_banks = std::min(nB, std::size_t{3});
  std::vector<std::vector<char>> holds(nB, std::vector<char>(nS, 0));
  for (std::size_t i = 0; i < nS; ++i) {
    std::set<std::size_t> chosen;
    while (chosen.size() < k_banks) chosen.insert(structure.index(nB));
    for (std::size_t b : chosen) holds[b][i] = 1;
  }
  const double density = static_cast<double>(k_banks) / static_cast<double>(nB);
  const double add_prob =
      density < 1.0 ? cfg.holdings_churn * density / (1.0 - density) : 0.0;

  // --- factor processes ---
  std::vector<double> raw_factor(nI, 0.0), flow(nB, 0.0);
  for (auto& v : raw_factor) v = factors.normal();
  for (auto& v : flow) v = factors.normal();

  auto mixed_factors = [&](const std::vector<double>& raw) {
    // II-linked industries share co-movement
    std::vector<double> mixed = raw;
    std::vector<double> norm(nI, 1.0);
    for (const auto& [a, b] : ii_links) {
      mixed[a] += 0.4 * raw[b];
      mixed[b] += 0.4 * raw[a];
      norm[a] += 0.16;
      norm[b] += 0.16;
    }
    for (std::size_t q = 0; q < nI; ++q) mixed[q] /= std::sqrt(norm[q]);
    return mixed;
  };

  DynamicGraph g;
  g.prices = Matrix(nS, T);
  g.benchmark.assign(T, 0.0);

  std::vector<double> price(nS, 100.0);
  std::vector<std::vector<double>> returns(T, std::vector<double>(nS, 0.0));

  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      // evolve factors, flows, and holdings
      for (auto& v : raw_factor) v = phi * v + innov * factors.normal();
      for (auto& v : flow) v = phi * v + innov * factors.normal();
      for (std::size_t b = 0; b < nB; ++b) {
        for (std::size_t i = 0; i < nS; ++i) {
          if (holds[b][i]) {
            if (churn.bernoulli(cfg.holdings_churn)) holds[b][i] = 0;
          } else if (churn.bernoulli(add_prob)) {
            holds[b][i] = 1;
          }
        }
      }
    }
    const std::vector<double> factor = mixed_factors(raw_factor);

    // state driving both today's return innovation and the planted features
    const double beta_sum = cfg.industry_beta + cfg.bank_beta;
    // features expose the state rescaled to O(1) so the signal dims are on the
    // same footing as the N(0,1) distractor dims
    const double gain = beta_sum > 0.0 ? 1.0 / beta_sum : 1.0;
    std::vector<double> state(nS, 0.0);
    for (std::size_t i = 0; i < nS; ++i) {
      double bank_sum = 0.0;
      std::size_t bank_cnt = 0;
      for (std::size_t b = 0; b < nB; ++b) {
        if (holds[b][i]) {
          bank_sum += flow[b];
          ++bank_cnt;
        }
      }
      const double bank_mean = bank_cnt ? bank_sum / bank_cnt : 0.0;
      state[i] = cfg.industry_beta * factor[industry_of[i]] +
                 cfg.bank_beta * bank_mean;
    }

    if (t > 0) {
      for (std::size_t i = 0; i < nS; ++i) {
        double r = state[i] + cfg.noise_sigma * factors.normal();
        r = std::max(r, -0.9);  // keep prices positive
        returns[t][i] = r;
        price[i] *= 1.0 + r;
      }
    }
    for (std::size_t i = 0; i < nS; ++i) g.prices.at(i, t) = price[i];

    // --- snapshot ---
    GraphSnapshot s;
    s.day = t;
    s.stock_features = Matrix(nS, cfg.d_in);
    s.bank_features = Matrix(nB, cfg.d_in);
    s.industry_features = Matrix(nI, cfg.d_in);
    for (std::size_t i = 0; i < nS; ++i) {
      for (std::size_t d = 0; d < cfg.d_in; ++d) {
        s.stock_features.at(i, d) =
            d < cfg.signal_dims
                ? gain * state[i] + cfg.obs_sigma * features.normal()
                : features.normal();
      }
    }
    for (std::size_t b = 0; b < nB; ++b) {
      for (std::size_t d = 0; d < cfg.d_in; ++d) {
        s.bank_features.at(b, d) =
            d < cfg.signal_dims
                ? cfg.context_signal_gain * flow[b] +
                      cfg.obs_sigma * features.normal()
                : features.normal();
      }
    }
    for (std::size_t q = 0; q < nI; ++q) {
      for (std::size_t d = 0; d < cfg.d_in; ++d) {
        s.industry_features.at(q, d) =
            d < cfg.signal_dims
                ? cfg.context_signal_gain * factor[q] +
                      cfg.obs_sigma * features.normal()
                : features.normal();
      }
    }

    for (std::size_t i = 0; i < nS; ++i) {
      for (std::size_t j = i + 1; j < nS; ++j) {
        if (owner_of[i] == owner_of[j]) {
          s.edges.push_back({Relation::SS,
                             {NodeKind::Stock, i},
                             {NodeKind::Stock, j},
                             edge_features(cfg, edge_key(Relation::SS, i, j))});
        }
      }
    }
    for (std::size_t b = 0; b < nB; ++b) {
      for (std::size_t i = 0; i < nS; ++i) {
        if (holds[b][i]) {
          s.edges.push_back({Relation::SB,
                             {NodeKind::Stock, i},
                             {NodeKind::Bank, b},
                             edge_features(cfg, edge_key(Relation::SB, i, b))});
        }
      }
    }
    for (std::size_t i = 0; i < nS; ++i) {
      s.edges.push_back(
          {Relation::SI,
           {NodeKind::Stock, i},
           {NodeKind::Industry, industry_of[i]},
           edge_features(cfg, edge_key(Relation::SI, i, industry_of[i]))});
    }
    for (const auto& [a, b] : ii_links) {
      s.edges.push_back({Relation::II,
                         {NodeKind::Industry, a},
                         {NodeKind::Industry, b},
                         edge_features(cfg, edge_key(Relation::II, a, b))});
    }
    g.snapshots.push_back(std::move(s));
  }

  // benchmark = cross-sectional mean next-day return, so labels are zero-mean
  for (std::size_t t = 0; t + 1 < T; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < nS; ++i) acc += returns[t + 1][i];
    g.benchmark[t] = acc / static_cast<double>(nS);
  }
  g.benchmark[T - 1] = 0.0;

  return g;
}

}  // namespace mdgnn
