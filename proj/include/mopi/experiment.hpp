#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mopi/baselines.hpp"
#include "mopi/datagen.hpp"
#include "mopi/metrics.hpp"
#include "mopi/serialize.hpp"
#include "mopi/solver.hpp"

namespace mopi {

// Config-driven pipeline: generate -> pretrain -> calibrate with each method
// -> evaluate, replicated with seed = base_seed + r. Every run is
// reconstructible from the config document plus the base seed.
struct MethodConfig {
  std::string name;             // "mopi" | "cc" | "scp"
  double param = std::numeric_limits<double>::quiet_NaN();  // free sweep tag
  WeightClass weight;           // mopi / cc
  // shape (mopi only)
  ShapeModel::Kind shape_kind = ShapeModel::Kind::ConstantVector;
  int shape_anchors = 100;
  double shape_bandwidth = 1.0;
  int shape_hidden = 32;
  SolverConfig solver;          // mopi; cc reuses adam + iterations
  std::string label() const;
};

struct PretrainConfig {
  std::string mean = "ridge";   // "ridge" | "knn"
  double ridge = 1e-8;
  int knn_k = 25;
  bool grouped_scales = false;  // box families: per-group residual scales
};

struct FamilyConfig {
  std::string kind = "sublevel";      // "sublevel" | "box" | "ellipsoid"
  std::string score = "abs_residual"; // sublevel: "abs_residual" | "mahalanobis" | "normalized_inf"
  PretrainConfig pretrain;
};

struct MetricConfig {
  int bins = 100;
  int balls = 50;
  std::string ball_radius = "auto";  // "auto" | "uniform" | "sqrt2dx"
  int exact_msce_outer = 2000;
  int exact_msce_inner = 10000;
};

struct ExperimentConfig {
  std::string name = "experiment";
  GeneratorSpec generator;
  int n_pre = 1000;
  int n_cal = 500;
  int n_test = 1000;
  double alpha = 0.1;
  int replications = 1;
  uint64_t base_seed = 1;
  FamilyConfig family;
  std::vector<MethodConfig> methods;
  std::vector<std::string> metrics{"marginal"};
  MetricConfig metric_config;
};

ExperimentConfig experiment_config_from_json(const Json& j);
Json experiment_config_to_json(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

struct ResultRow {
  int replication = 0;
  std::string method;
  double param = std::numeric_limits<double>::quiet_NaN();
  std::string metric;
  double value = 0.0;
};

struct ExperimentResult {
  std::string hash;
  std::vector<ResultRow> rows;
  int failed_replications = 0;
  std::vector<std::string> failures;
};

// Bounded worker pool (MOPI_WORKERS, default 1); rows are collected in
// replication order so output is deterministic. A replication that throws is
// logged and counted; more than 10% failures fails the run.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_results_csv(const ExperimentResult& result, const std::string& path);
ExperimentResult read_results_csv(const std::string& path);
Json summarize(const ExperimentResult& result);

struct CvGrid {
  std::vector<double> bandwidth{1.0};
  std::vector<double> gamma{1e-3};
  std::vector<double> learning_rate{1e-2};
};

struct CvChoice {
  double bandwidth = 1.0;
  double gamma = 1e-3;
  double learning_rate = 1e-2;
  double objective = 0.0;
};

// K-fold (default 2) cross-validation on the calibration split, scoring each
// grid point by binned root-MSCE on the held-out fold; ties go to the
// lexicographically smallest grid point in (bandwidth, gamma, lr) order.
CvChoice cross_validate(const ExperimentConfig& config, const std::string& method_name,
                        const CvGrid& grid, int folds = 2);

// Long-format plot series (x, series, mean, sd). Kinds: "group" (per-group
// coverage bars), "rsweep" (metric vs the method param tag), "coverage_vs_n".
void emit_plotdata(const std::string& results_csv, const std::string& figure_kind,
                   const std::string& out_path, const std::string& metric = "");

// --- building blocks shared with the CLI ------------------------------------

struct PretrainedParts {
  std::shared_ptr<const SetFamily> mopi_family;      // box/ellipsoid or sublevel
  std::shared_ptr<const SetFamily> baseline_family;  // always sublevel
  Vector neutral;                                    // neutral shape for MOPI
};

struct ReplicationData {
  Dataset pretrain;
  Dataset calibration;
  Dataset test;
};

// The three independently generated splits of replication r (seed =
// base_seed + r); the CLI's gen/pretrain/fit/eval subcommands draw the same
// data as the experiment loop.
ReplicationData generate_replication_data(const ExperimentConfig& config, int replication);

PretrainedParts pretrain_families(const FamilyConfig& config, const Dataset& pre, double alpha,
                                  const std::optional<GroupScheme>& scheme);

// Fits one configured method; a non-empty trace_path dumps the MOPI fit
// trace as CSV.
PredictionRule fit_method(const MethodConfig& method, const PretrainedParts& parts,
                          const Dataset& cal, double alpha,
                          const std::optional<GroupScheme>& scheme,
                          const std::string& trace_path = "");

}  // namespace mopi
