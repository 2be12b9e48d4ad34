#include "mdgnn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mdgnn/errors.hpp"
#include "mdgnn/rng.hpp"

namespace mdgnn {

nlohmann::json default_config_json() {
  return nlohmann::json{
      {"dataset", ""},
      {"preset", "toy"},
      {"generator", nlohmann::json::object()},
      {"seed", 1},
      {"relations", {"SS", "SB", "SI", "II"}},
      {"model",
       {{"kind", "mdgnn"},
        {"d_h", 32},
        {"layers", 2},
        {"heads", 2},
        {"leaky_slope", 0.2},
        {"window", 10},
        {"temporal_heads", 4},
        {"loss", "bce"},
        {"mse_tau", 0.01},
        {"mlp_hidden", 32},
        {"no_edge_features", false},
        {"no_meta_path", false},
        {"no_hier_fusion", false},
        {"no_temporal", false}}},
      {"train",
       {{"epochs", 500},
        {"patience", 20},
        {"lr", 1e-3},
        {"beta1", 0.9},
        {"beta2", 0.999},
        {"eps", 1e-8}}},
      {"schedule", {{"train", 24}, {"val", 4}, {"test", 10}}},
      {"metrics", {{"k", 3}}}};
}

namespace {

const char* kGeneratorKeys[] = {
    "n_stocks",       "n_banks",     "n_industries",       "days",
    "d_in",           "d_e",         "industry_beta",      "bank_beta",
    "noise_sigma",    "holdings_churn", "seed",            "signal_dims",
    "obs_sigma",      "factor_persistence", "window_hint",
    "context_signal_gain"};

void merge_into(nlohmann::json& base, const nlohmann::json& overlay,
                const std::string& path) {
  if (!overlay.is_object()) {
    throw ConfigError("config section '" + (path.empty() ? "(root)" : path) +
                      "' must be an object");
  }
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string here = path.empty() ? it.key() : path + "." + it.key();
    if (path == "generator" || (path.empty() && it.key() == "generator")) {
      // free-form but keys must name generator fields
      if (it.key() != "generator") {
        bool known = false;
        for (const char* k : kGeneratorKeys) known = known || it.key() == k;
        if (!known) throw ConfigError("unknown config key '" + here + "'");
        base[it.key()] = it.value();
        continue;
      }
    }
    if (!base.contains(it.key())) {
      throw ConfigError("unknown config key '" + here + "'");
    }
    if (base[it.key()].is_object() && it.value().is_object()) {
      merge_into(base[it.key()], it.value(), here);
    } else {
      base[it.key()] = it.value();
    }
  }
}

template <typename T>
T get_as(const nlohmann::json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("bad value for config key '" + key + "': " + ex.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
  nlohmann::json full = default_config_json();
  merge_into(full, doc, "");

  ExperimentConfig cfg;
  cfg.canonical = full;
  cfg.dataset_path = get_as<std::string>(full, "dataset");
  cfg.preset = get_as<std::string>(full, "preset");
  cfg.generator_overrides = full.at("generator");
  cfg.seed = get_as<std::uint64_t>(full, "seed");

  cfg.relations.clear();
  for (const auto& r : full.at("relations")) {
    cfg.relations.push_back(relation_from_string(r.get<std::string>()));
  }
  if (cfg.relations.empty()) throw ConfigError("relations list may not be empty");

  const auto& m = full.at("model");
  const std::string kind = get_as<std::string>(m, "kind");
  if (kind == "mdgnn") {
    cfg.model.kind = ModelKind::MDGNN;
  } else if (kind == "mlp") {
    cfg.model.kind = ModelKind::MLP;
  } else {
    throw ConfigError("model.kind must be 'mdgnn' or 'mlp', got '" + kind + "'");
  }
  cfg.model.encoder.d_h = get_as<std::size_t>(m, "d_h");
  cfg.model.encoder.layers = get_as<std::size_t>(m, "layers");
  cfg.model.encoder.heads = get_as<std::size_t>(m, "heads");
  cfg.model.encoder.leaky_slope = get_as<double>(m, "leaky_slope");
  cfg.model.encoder.no_edge_features = get_as<bool>(m, "no_edge_features");
  cfg.model.encoder.no_meta_path = get_as<bool>(m, "no_meta_path");
  cfg.model.encoder.no_hier_fusion = get_as<bool>(m, "no_hier_fusion");
  cfg.model.temporal.window = get_as<std::size_t>(m, "window");
  cfg.model.temporal.heads = get_as<std::size_t>(m, "temporal_heads");
  cfg.model.temporal.d_h = cfg.model.encoder.d_h;
  cfg.model.no_temporal = get_as<bool>(m, "no_temporal");
  cfg.model.mlp_hidden = get_as<std::size_t>(m, "mlp_hidden");
  cfg.model.mse_tau = get_as<double>(m, "mse_tau");
  const std::string loss = get_as<std::string>(m, "loss");
  if (loss == "bce") {
    cfg.model.loss = LossKind::BCE;
  } else if (loss == "mse") {
    cfg.model.loss = LossKind::MSE;
  } else {
    throw ConfigError("model.loss must be 'bce' or 'mse', got '" + loss + "'");
  }
  if (cfg.model.encoder.layers == 0 || cfg.model.encoder.heads == 0 ||
      cfg.model.encoder.d_h == 0 || cfg.model.temporal.heads == 0) {
    throw ConfigError("model sizes must be positive");
  }

  const auto& t = full.at("train");
  cfg.train.epochs = get_as<std::size_t>(t, "epochs");
  cfg.train.patience = get_as<std::size_t>(t, "patience");
  cfg.train.lr = get_as<double>(t, "lr");
  cfg.train.beta1 = get_as<double>(t, "beta1");
  cfg.train.beta2 = get_as<double>(t, "beta2");
  cfg.train.eps = get_as<double>(t, "eps");
  if (!(cfg.train.lr >= 0.0) || !(cfg.train.eps > 0.0) ||
      !(cfg.train.beta1 >= 0.0 && cfg.train.beta1 < 1.0) ||
      !(cfg.train.beta2 >= 0.0 && cfg.train.beta2 < 1.0)) {
    throw ConfigError("bad optimizer hyperparameters");
  }

  const auto& s = full.at("schedule");
  cfg.sched_train = get_as<std::size_t>(s, "train");
  cfg.sched_val = get_as<std::size_t>(s, "val");
  cfg.sched_test = get_as<std::size_t>(s, "test");

  cfg.metric_k = get_as<std::size_t>(full.at("metrics"), "k");
  if (cfg.metric_k == 0) throw ConfigError("metrics.k must be positive");
  return cfg;
}

void set_config_key(nlohmann::json& doc, const std::string& dotted_key,
                    const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("empty config key");
  nlohmann::json* cur = &doc;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', pos);
    const std::string part = dotted_key.substr(pos, dot - pos);
    if (part.empty()) throw ConfigError("bad config key '" + dotted_key + "'");
    if (dot == std::string::npos) {
      // value: JSON literal when it parses, bare string otherwise
      nlohmann::json parsed =
          nlohmann::json::parse(value, nullptr, /*allow_exceptions=*/false);
      (*cur)[part] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
      return;
    }
    cur = &(*cur)[part];
    pos = dot + 1;
  }
}

std::string config_hash(const nlohmann::json& doc) {
  const std::string dump = doc.dump();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(dump)));
  return std::string(buf);
}

MarketConfig market_config_from(const ExperimentConfig& cfg) {
  MarketConfig m = preset(cfg.preset == "toy" || cfg.preset == "csi100-like"
                              ? cfg.preset
                              : throw ConfigError("unknown preset '" + cfg.preset + "'"));
  m.seed = cfg.seed;
  const auto& o = cfg.generator_overrides;
  auto sz = [&](const char* k, std::size_t& dst) {
    if (o.contains(k)) dst = o.at(k).get<std::size_t>();
  };
  auto dbl = [&](const char* k, double& dst) {
    if (o.contains(k)) dst = o.at(k).get<double>();
  };
  sz("n_stocks", m.n_stocks);
  sz("n_banks", m.n_banks);
  sz("n_industries", m.n_industries);
  sz("days", m.days);
  sz("d_in", m.d_in);
  sz("d_e", m.d_e);
  sz("signal_dims", m.signal_dims);
  sz("window_hint", m.window_hint);
  dbl("industry_beta", m.industry_beta);
  dbl("bank_beta", m.bank_beta);
  dbl("noise_sigma", m.noise_sigma);
  dbl("holdings_churn", m.holdings_churn);
  dbl("obs_sigma", m.obs_sigma);
  dbl("factor_persistence", m.factor_persistence);
  dbl("context_signal_gain", m.context_signal_gain);
  if (o.contains("seed")) m.seed = o.at("seed").get<std::uint64_t>();
  m.validate();
  return m;
}

DynamicGraph resolve_dataset(const ExperimentConfig& cfg) {
  if (!cfg.dataset_path.empty()) return load(cfg.dataset_path);
  return generate(market_config_from(cfg));
}

namespace {

// d_in and d_e come from the data, not the config document.
ModelConfig concrete_model(const ExperimentConfig& cfg, const DynamicGraph& g) {
  ModelConfig m = cfg.model;
  m.encoder.d_in = g.snapshots.front().stock_features.cols();
  m.encoder.d_e = 1;
  for (const auto& s : g.snapshots) {
    if (!s.edges.empty()) {
      m.encoder.d_e = s.edges.front().features.size();
      break;
    }
  }
  return m;
}

DynamicGraph restrict_relations(const DynamicGraph& g,
                                const std::vector<Relation>& keep) {
  const std::vector<Relation> all{Relation::SS, Relation::SB, Relation::SI,
                                  Relation::II};
  bool full = true;
  for (Relation r : all) {
    full = full && std::find(keep.begin(), keep.end(), r) != keep.end();
  }
  if (full) return g;
  DynamicGraph out = g;
  for (auto& s : out.snapshots) s = relation_subset(s, keep);
  return out;
}

void check_fold(const Fold& f) {
  if (!(f.train_begin < f.train_end && f.train_end == f.val_begin &&
        f.val_begin < f.val_end && f.val_end == f.test_begin &&
        f.test_begin < f.test_end)) {
    throw ContractError("fold intervals must be contiguous and ordered");
  }
}

std::string csv_num(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

}  // namespace

BacktestOutcome run_backtest(const ExperimentConfig& cfg, const DynamicGraph& g) {
  const DynamicGraph data = restrict_relations(g, cfg.relations);
  const LabelFrame labels = build_labels(data);
  const ModelConfig model_cfg = concrete_model(cfg, data);

  BacktestOutcome out;
  out.folds = rolling_schedule(labels.labels.cols(), cfg.sched_train,
                               cfg.sched_val, cfg.sched_test);

  std::vector<DayScores> test_days;
  for (std::size_t f = 0; f < out.folds.size(); ++f) {
    const Fold& fold = out.folds[f];
    check_fold(fold);
    TrainConfig tc = cfg.train;
    // per-fold substream so later folds do not depend on earlier fold count
    tc.seed = derive_seed(cfg.seed, "fold:" + std::to_string(f));
    TrainResult result = train(data, labels, fold, model_cfg, tc);
    out.val_ic_per_fold.push_back(result.best_val_ic);

    const auto days = labeled_days(labels, fold.test_begin, fold.test_end);
    auto scored = score_days(data, labels, result.params, model_cfg, days,
                             &out.fusion_weights);
    for (auto& s : scored) {
      if (s.day < fold.val_end) {
        throw ContractError("test day precedes end of validation window");
      }
      test_days.push_back(std::move(s));
    }
  }
  out.report = evaluate_days(test_days, cfg.metric_k);
  return out;
}

nlohmann::json report_to_json(const BacktestOutcome& outcome,
                              const ExperimentConfig& cfg) {
  const BacktestReport& r = outcome.report;
  nlohmann::json folds = nlohmann::json::array();
  for (std::size_t f = 0; f < outcome.folds.size(); ++f) {
    const Fold& fd = outcome.folds[f];
    folds.push_back({{"train", {fd.train_begin, fd.train_end}},
                     {"val", {fd.val_begin, fd.val_end}},
                     {"test", {fd.test_begin, fd.test_end}},
                     {"val_ic", outcome.val_ic_per_fold[f]}});
  }
  nlohmann::json per_day = nlohmann::json::array();
  for (const auto& d : r.per_day) {
    nlohmann::json j{{"day", d.day}, {"top_k", d.top_k}};
    j["ic"] = d.ic ? nlohmann::json(*d.ic) : nlohmann::json();
    j["portfolio_return"] =
        d.portfolio_ret ? nlohmann::json(*d.portfolio_ret) : nlohmann::json();
    j["precision"] = d.precision ? nlohmann::json(*d.precision) : nlohmann::json();
    per_day.push_back(std::move(j));
  }
  return nlohmann::json{
      {"config", cfg.canonical},
      {"config_hash", config_hash(cfg.canonical)},
      {"metrics",
       {{"ic", r.ic},
        {"ir", r.ir_defined ? nlohmann::json(r.ir) : nlohmann::json()},
        {"cr", r.cr},
        {"precision_at_k", r.prec_at_k},
        {"k", r.k}}},
      {"folds", std::move(folds)},
      {"per_day", std::move(per_day)},
      {"skipped_ic_days", r.skipped_ic_days},
      {"skipped_topk_days", r.skipped_topk_days}};
}

void write_report_files(const BacktestOutcome& outcome, const ExperimentConfig& cfg,
                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "report.json");
    if (!out) throw DataError("cannot write report.json in '" + out_dir + "'");
    out << report_to_json(outcome, cfg).dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(out_dir) / "daily_metrics.csv");
    if (!out) throw DataError("cannot write daily_metrics.csv in '" + out_dir + "'");
    out << "day,ic,portfolio_return,precision_at_k,top_k\n";
    for (const auto& d : outcome.report.per_day) {
      out << d.day << "," << csv_num(d.ic) << "," << csv_num(d.portfolio_ret)
          << "," << csv_num(d.precision) << ",";
      for (std::size_t i = 0; i < d.top_k.size(); ++i) {
        if (i) out << "|";
        out << d.top_k[i];
      }
      out << "\n";
    }
  }
  write_fusion_weights_csv(outcome.fusion_weights,
                           (fs::path(out_dir) / "fusion_weights.csv").string());
}

std::vector<AblationRow> run_component_ablations(const ExperimentConfig& cfg,
                                                 const DynamicGraph& g) {
  struct Variant {
    const char* name;
    void (*apply)(ExperimentConfig&);
  };
  const Variant variants[] = {
      {"full", [](ExperimentConfig&) {}},
      {"no_edge_features",
       [](ExperimentConfig& c) { c.model.encoder.no_edge_features = true; }},
      {"no_meta_path",
       [](ExperimentConfig& c) { c.model.encoder.no_meta_path = true; }},
      {"no_fusion",
       [](ExperimentConfig& c) { c.model.encoder.no_hier_fusion = true; }},
      {"no_temporal", [](ExperimentConfig& c) { c.model.no_temporal = true; }},
      {"mlp", [](ExperimentConfig& c) { c.model.kind = ModelKind::MLP; }},
  };
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    ExperimentConfig c = cfg;
    v.apply(c);
    rows.push_back({v.name, run_backtest(c, g).report});
  }
  return rows;
}

std::vector<AblationRow> run_relation_ablations(const ExperimentConfig& cfg,
                                                const DynamicGraph& g) {
  const std::vector<std::vector<Relation>> subsets = {
      {Relation::SS},
      {Relation::SS, Relation::SB},
      {Relation::SS, Relation::SI},
      {Relation::SS, Relation::SI, Relation::II},
      {Relation::SS, Relation::SB, Relation::SI},
      {Relation::SS, Relation::SB, Relation::SI, Relation::II},
  };
  std::vector<AblationRow> rows;
  for (const auto& subset : subsets) {
    ExperimentConfig c = cfg;
    c.relations = subset;
    std::string name;
    for (Relation r : subset) {
      if (!name.empty()) name += "+";
      name += to_string(r);
    }
    rows.push_back({std::move(name), run_backtest(c, g).report});
  }
  return rows;
}

namespace {

void write_report_rows(std::ofstream& out, const std::vector<AblationRow>& rows) {
  for (const auto& r : rows) {
    out << r.name << "," << csv_num(r.report.ic) << ","
        << csv_num(r.report.ir_defined ? std::optional<double>(r.report.ir)
                                       : std::nullopt)
        << "," << csv_num(r.report.cr) << "," << csv_num(r.report.prec_at_k)
        << "\n";
  }
}

}  // namespace

void write_ablation_files(const std::vector<AblationRow>& component_rows,
                          const std::vector<AblationRow>& relation_rows,
                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "ablation_components.csv");
    if (!out) throw DataError("cannot write ablation_components.csv");
    out << "variant,ic,ir,cr,precision_at_k\n";
    write_report_rows(out, component_rows);
  }
  {
    std::ofstream out(fs::path(out_dir) / "ablation_relations.csv");
    if (!out) throw DataError("cannot write ablation_relations.csv");
    out << "relations,ic,ir,cr,precision_at_k\n";
    write_report_rows(out, relation_rows);
  }
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg,
                                  const DynamicGraph& g, const std::string& axis) {
  std::vector<std::size_t> values;
  if (axis == "window") {
    values = {2, 5, 10, 15, 20};
  } else if (axis == "layers") {
    values = {1, 2, 3, 4};
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "' (want window or layers)");
  }
  std::vector<SweepPoint> points;
  for (std::size_t v : values) {
    ExperimentConfig c = cfg;
    if (axis == "window") {
      c.model.temporal.window = v;
    } else {
      c.model.encoder.layers = v;
    }
    points.push_back({v, run_backtest(c, g).report});
  }
  return points;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& axis,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << axis << ",ic,ir,cr,precision_at_k\n";
  for (const auto& p : points) {
    out << p.value << "," << csv_num(p.report.ic) << ","
        << csv_num(p.report.ir_defined ? std::optional<double>(p.report.ir)
                                       : std::nullopt)
        << "," << csv_num(p.report.cr) << "," << csv_num(p.report.prec_at_k)
        << "\n";
  }
}

namespace {

bool matrices_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) && a.data() == b.data();
}

// small toy setup shared by the check suites
struct CheckFixture {
  DynamicGraph g;
  ModelConfig model;

  explicit CheckFixture(std::uint64_t seed) {
    MarketConfig mc = preset("toy");
    mc.days = 12;
    mc.seed = seed;
    g = generate(mc);
    model.encoder.d_in = mc.d_in;
    model.encoder.d_e = mc.d_e;
    model.encoder.d_h = 8;
    model.encoder.layers = 1;
    model.encoder.heads = 2;
    model.temporal.d_h = 8;
    model.temporal.window = 3;
    model.temporal.heads = 2;
  }
};

bool check_gradients(const CheckFixture& fx, std::uint64_t seed) {
  ParamStore params;
  init_model_params(params, fx.model, seed);
  const std::vector<std::size_t> days{4, 5};
  LabelFrame labels = build_labels(fx.g);
  std::vector<std::vector<double>> y;
  std::vector<std::vector<char>> v;
  for (std::size_t t : days) {
    std::vector<double> yr(fx.g.n_stocks());
    std::vector<char> vr(fx.g.n_stocks(), 1);
    for (std::size_t i = 0; i < fx.g.n_stocks(); ++i) yr[i] = labels.labels.at(i, t);
    y.push_back(yr);
    v.push_back(vr);
  }
  auto builder = [&](Tape& tape, ParamBinder& bind) {
    auto logits_by_day = forward_logits(tape, fx.g, bind, fx.model, days);
    std::vector<Node*> logits;
    for (std::size_t t : days) logits.push_back(logits_by_day.at(t));
    return prediction_loss(tape, logits, y, v, fx.model.loss, fx.model.mse_tau);
  };
  return grad_check(builder, params, 1e-5) < 1e-6;
}

bool check_equivariance(const CheckFixture& fx, std::uint64_t seed) {
  ParamStore params;
  init_encoder_params(params, fx.model.encoder, seed);
  const GraphSnapshot& s = fx.g.snapshots[3];
  Tape tape;
  ParamBinder bind(tape, params);
  Node* base = encode_snapshot(tape, s, bind, fx.model.encoder);

  Rng rng(derive_seed(seed, "check:perm"));
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<std::size_t> perm(s.n_stocks());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i) {
      std::swap(perm[i - 1], perm[rng.index(i)]);
    }
    Tape t2;
    ParamBinder b2(t2, params);
    Node* permuted = encode_snapshot(t2, permute_stocks(s, perm), b2, fx.model.encoder);
    for (std::size_t i = 0; i < s.n_stocks(); ++i) {
      for (std::size_t c = 0; c < fx.model.encoder.d_h; ++c) {
        if (permuted->value.at(perm[i], c) != base->value.at(i, c)) return false;
      }
    }
  }
  return true;
}

bool check_determinism(const ExperimentConfig& base_cfg, std::uint64_t seed) {
  ExperimentConfig cfg = base_cfg;
  cfg.seed = seed;
  cfg.train.epochs = 3;
  cfg.model.encoder.d_h = 8;
  cfg.model.temporal.d_h = 8;
  cfg.model.temporal.window = 3;
  cfg.sched_train = 6;
  cfg.sched_val = 2;
  cfg.sched_test = 3;
  MarketConfig mc = preset("toy");
  mc.days = 13;
  mc.seed = seed;
  const DynamicGraph g1 = generate(mc), g2 = generate(mc);
  if (!(g1 == g2)) return false;
  const auto r1 = report_to_json(run_backtest(cfg, g1), cfg);
  const auto r2 = report_to_json(run_backtest(cfg, g2), cfg);
  return r1.dump() == r2.dump();
}

bool check_roundtrip(const CheckFixture& fx, std::uint64_t seed) {
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() / ("mdgnn-check-" + std::to_string(seed));
  save(fx.g, dir.string());
  const DynamicGraph loaded = load(dir.string());
  bool ok = loaded == fx.g;

  ParamStore params;
  init_model_params(params, fx.model, seed);
  const fs::path pfile = dir / "params.bin";
  params.save(pfile.string());
  ok = ok && ParamStore::load(pfile.string()).values_equal(params);
  fs::remove_all(dir);
  return ok;
}

bool check_masking(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "check:mask"));
  Tape tape;
  Matrix x(3, 4);
  for (auto& v : x.data()) v = rng.normal();
  Matrix mask = Matrix::zeros(3, 4);
  mask.at(0, 2) = kMaskedSentinel;
  mask.at(1, 0) = kMaskedSentinel;
  mask.at(1, 3) = kMaskedSentinel;
  Node* sm = tape.softmax_rows(tape.leaf(x), mask);
  for (std::size_t r = 0; r < 3; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      const double v = sm->value.at(r, c);
      if (mask.at(r, c) == kMaskedSentinel && v != 0.0) return false;
      if (v < 0.0) return false;
      row_sum += v;
    }
    if (std::fabs(row_sum - 1.0) > 1e-12) return false;
  }
  Matrix all = Matrix::zeros(1, 2);
  all.at(0, 0) = kMaskedSentinel;
  all.at(0, 1) = kMaskedSentinel;
  try {
    tape.softmax_rows(tape.leaf(Matrix(1, 2, {0.0, 0.0})), all);
    return false;  // fully-masked row must throw
  } catch (const NumericError&) {
    return true;
  }
}

bool check_causality(const CheckFixture& fx, std::uint64_t seed) {
  ParamStore params;
  init_temporal_params(params, fx.model.temporal, seed);
  Rng rng(derive_seed(seed, "check:causal"));
  const std::size_t len = fx.model.temporal.window + 1;
  Matrix w(len, fx.model.temporal.d_h);
  for (auto& v : w.data()) v = rng.normal();

  Tape t1;
  ParamBinder b1(t1, params);
  Node* out1 = temporal_attend(t1, t1.leaf(w), 0, b1, fx.model.temporal);

  // editing the future must not change earlier outputs
  Matrix w2 = w;
  for (std::size_t c = 0; c < w2.cols(); ++c) w2.at(len - 1, c) += 1.5;
  Tape t2;
  ParamBinder b2(t2, params);
  Node* out2 = temporal_attend(t2, t2.leaf(w2), 0, b2, fx.model.temporal);
  for (std::size_t q = 0; q + 1 < len; ++q) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      if (out1->value.at(q, c) != out2->value.at(q, c)) return false;
    }
  }
  return true;
}

}  // namespace

int run_invariant_checks(std::ostream& out, std::uint64_t seed) {
  const CheckFixture fx(seed);
  ExperimentConfig cfg = parse_config(nlohmann::json::object());

  struct Suite {
    const char* name;
    std::function<bool()> run;
  };
  const std::vector<Suite> suites = {
      {"gradient-check", [&] { return check_gradients(fx, seed); }},
      {"masked-softmax", [&] { return check_masking(seed); }},
      {"permutation-equivariance", [&] { return check_equivariance(fx, seed); }},
      {"temporal-causality", [&] { return check_causality(fx, seed); }},
      {"save-load-roundtrip", [&] { return check_roundtrip(fx, seed); }},
      {"end-to-end-determinism", [&] { return check_determinism(cfg, seed); }},
  };
  int failures = 0;
  for (const auto& s : suites) {
    bool ok = false;
    std::string why;
    try {
      ok = s.run();
    } catch (const std::exception& ex) {
      why = ex.what();
    }
    out << (ok ? "[ok]   " : "[FAIL] ") << s.name;
    if (!ok && !why.empty()) out << " (" << why << ")";
    out << "\n";
    if (!ok) ++failures;
  }
  return failures;
}

}  // namespace mdgnn
