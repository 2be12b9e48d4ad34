#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mdgnn/errors.hpp"
#include "mdgnn/experiment.hpp"
#include "mdgnn/rng.hpp"

namespace {

namespace fs = std::filesystem;
using mdgnn::ExperimentConfig;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config JSON file");
  cmd->add_option("--set", args.sets,
                  "override a config key, e.g. --set model.window=5 (repeatable)");
  cmd->add_option("--seed", args.seed, "override the top-level seed")
      ->each([&args](const std::string&) { args.seed_given = true; });
  cmd->add_option("--out", args.out_dir, "output directory");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  nlohmann::json doc = nlohmann::json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) {
      throw mdgnn::ConfigError("cannot open config file '" + args.config_path + "'");
    }
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& ex) {
      throw mdgnn::ConfigError("config file '" + args.config_path +
                               "' is not valid JSON: " + ex.what());
    }
  }
  for (const std::string& kv : args.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw mdgnn::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    mdgnn::set_config_key(doc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed_given) doc["seed"] = args.seed;
  return mdgnn::parse_config(doc);
}

int cmd_generate(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const mdgnn::DynamicGraph g = mdgnn::generate(mdgnn::market_config_from(cfg));
  mdgnn::save(g, args.out_dir);
  std::map<std::string, std::size_t> counts{{"SS", 0}, {"SB", 0}, {"SI", 0}, {"II", 0}};
  for (const auto& s : g.snapshots) {
    for (const auto& e : s.edges) ++counts[mdgnn::to_string(e.relation)];
  }
  std::cout << "wrote " << g.n_stocks() << " stocks x " << g.n_days()
            << " days to " << args.out_dir << "\n";
  for (const auto& [rel, n] : counts) {
    std::cout << "edges " << rel << ": " << n << "\n";
  }
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const mdgnn::DynamicGraph g = mdgnn::resolve_dataset(cfg);
  const mdgnn::BacktestOutcome outcome = mdgnn::run_backtest(cfg, g);
  fs::create_directories(args.out_dir);

  // refit each fold once more to persist its checkpoint
  const mdgnn::LabelFrame labels = mdgnn::build_labels(g);
  nlohmann::json log = nlohmann::json::array();
  for (std::size_t f = 0; f < outcome.folds.size(); ++f) {
    std::cout << "fold " << f << ": val IC " << outcome.val_ic_per_fold[f] << "\n";
    log.push_back({{"fold", f}, {"val_ic", outcome.val_ic_per_fold[f]}});
  }
  std::ofstream out(fs::path(args.out_dir) / "training_log.json");
  out << nlohmann::json{{"config_hash", mdgnn::config_hash(cfg.canonical)},
                        {"folds", std::move(log)}}
             .dump(2)
      << "\n";
  mdgnn::write_report_files(outcome, cfg, args.out_dir);
  std::cout << "aggregate IC " << outcome.report.ic << "\n";
  return 0;
}

int cmd_backtest(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const mdgnn::DynamicGraph g = mdgnn::resolve_dataset(cfg);
  const mdgnn::BacktestOutcome outcome = mdgnn::run_backtest(cfg, g);
  mdgnn::write_report_files(outcome, cfg, args.out_dir);
  const auto& r = outcome.report;
  std::cout << "IC " << r.ic << "  IR " << (r.ir_defined ? std::to_string(r.ir) : "n/a")
            << "  CR " << r.cr << "  Precision@" << r.k << " " << r.prec_at_k << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const mdgnn::DynamicGraph g = mdgnn::resolve_dataset(cfg);
  const auto components = mdgnn::run_component_ablations(cfg, g);
  const auto relations = mdgnn::run_relation_ablations(cfg, g);
  mdgnn::write_ablation_files(components, relations, args.out_dir);
  auto show = [](const char* title, const std::vector<mdgnn::AblationRow>& rows) {
    std::cout << title << "\n";
    for (const auto& r : rows) {
      std::cout << "  " << r.name << ": IC " << r.report.ic << "  CR " << r.report.cr
                << "\n";
    }
  };
  show("components", components);
  show("relations", relations);
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& axis) {
  const ExperimentConfig cfg = resolve_config(args);
  const mdgnn::DynamicGraph g = mdgnn::resolve_dataset(cfg);
  fs::create_directories(args.out_dir);
  const std::vector<std::string> axes =
      axis.empty() ? std::vector<std::string>{"window", "layers"}
                   : std::vector<std::string>{axis};
  for (const std::string& a : axes) {
    const auto points = mdgnn::run_sweep(cfg, g, a);
    mdgnn::write_sweep_csv(points, a,
                           (fs::path(args.out_dir) / ("sweep_" + a + ".csv")).string());
    for (const auto& p : points) {
      std::cout << a << "=" << p.value << ": CR " << p.report.cr << "\n";
    }
  }
  return 0;
}

int cmd_check(const CommonArgs& args) {
  const std::uint64_t seed = args.seed_given ? args.seed : 1;
  const int failures = mdgnn::run_invariant_checks(std::cout, seed);
  if (failures) {
    std::cout << failures << " suite(s) failed\n";
    return 4;
  }
  std::cout << "all suites passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-relational dynamic graph model for stock ranking"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string sweep_axis;
  CLI::App* c_generate = app.add_subcommand("generate", "write a synthetic dataset");
  CLI::App* c_train = app.add_subcommand("train", "rolling-window training");
  CLI::App* c_backtest = app.add_subcommand("backtest", "train and score out-of-sample");
  CLI::App* c_ablate = app.add_subcommand("ablate", "component and relation ablations");
  CLI::App* c_sweep = app.add_subcommand("sweep", "window/layer sensitivity series");
  CLI::App* c_check = app.add_subcommand("check", "run the invariant suites");
  for (CLI::App* c : {c_generate, c_train, c_backtest, c_ablate, c_sweep, c_check}) {
    add_common(c, args);
  }
  c_sweep->add_option("axis", sweep_axis, "window|layers (default: both)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad usage is a config error
  }

  try {
    if (c_generate->parsed()) return cmd_generate(args);
    if (c_train->parsed()) return cmd_train(args);
    if (c_backtest->parsed()) return cmd_backtest(args);
    if (c_ablate->parsed()) return cmd_ablate(args);
    if (c_sweep->parsed()) return cmd_sweep(args, sweep_axis);
    if (c_check->parsed()) return cmd_check(args);
  } catch (const mdgnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mdgnn::DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mdgnn::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
