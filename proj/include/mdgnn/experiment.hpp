#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdgnn/metrics.hpp"
#include "mdgnn/model.hpp"
#include "mdgnn/synthetic.hpp"
#include "mdgnn/trainer.hpp"

namespace mdgnn {

// One JSON document drives every command; CLI flags override individual keys.
struct ExperimentConfig {
  std::string dataset_path;  // empty: generate from the preset below
  std::string preset = "toy";
  nlohmann::json generator_overrides = nlohmann::json::object();

  ModelConfig model;
  TrainConfig train;

  std::size_t sched_train = 24;
  std::size_t sched_val = 4;
  std::size_t sched_test = 10;
  std::size_t metric_k = 3;

  std::vector<Relation> relations = {Relation::SS, Relation::SB, Relation::SI,
                                     Relation::II};
  std::uint64_t seed = 1;

  nlohmann::json canonical;  // fully-resolved document, used for hashing
};

nlohmann::json default_config_json();
ExperimentConfig parse_config(const nlohmann::json& doc);

// Dotted-path override, e.g. set_config_key(doc, "model.window", "5").
void set_config_key(nlohmann::json& doc, const std::string& dotted_key,
                    const std::string& value);

std::string config_hash(const nlohmann::json& doc);

MarketConfig market_config_from(const ExperimentConfig& cfg);
DynamicGraph resolve_dataset(const ExperimentConfig& cfg);

struct BacktestOutcome {
  BacktestReport report;
  Schedule folds;
  std::vector<double> val_ic_per_fold;
  std::vector<FusionWeightRecord> fusion_weights;  // test-day fusion weights
};

BacktestOutcome run_backtest(const ExperimentConfig& cfg, const DynamicGraph& g);

nlohmann::json report_to_json(const BacktestOutcome& outcome,
                              const ExperimentConfig& cfg);
void write_report_files(const BacktestOutcome& outcome, const ExperimentConfig& cfg,
                        const std::string& out_dir);

struct AblationRow {
  std::string name;
  BacktestReport report;
};

// The five component variants (full, w/o edge, w/o meta-path,
// w/o aggregation, w/o temporal) plus the built-in MLP control.
std::vector<AblationRow> run_component_ablations(const ExperimentConfig& cfg,
                                                 const DynamicGraph& g);

// The six relation subsets: SS / SS+SB / SS+SI / SS+SI+II / SS+SB+SI / all.
std::vector<AblationRow> run_relation_ablations(const ExperimentConfig& cfg,
                                                const DynamicGraph& g);

void write_ablation_files(const std::vector<AblationRow>& component_rows,
                          const std::vector<AblationRow>& relation_rows,
                          const std::string& out_dir);

struct SweepPoint {
  std::size_t value = 0;
  BacktestReport report;
};

// axis: "window" (delta_t in {2,5,10,15,20}) or "layers" (L in {1,2,3,4})
std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg,
                                  const DynamicGraph& g, const std::string& axis);
void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& axis,
                     const std::string& path);

// Invariant battery behind the `check` subcommand; prints one line per suite
// and returns the number of failures.
int run_invariant_checks(std::ostream& out, std::uint64_t seed);

}  // namespace mdgnn
