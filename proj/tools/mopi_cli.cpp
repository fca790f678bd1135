// Experiment harness CLI: config-driven generate / pretrain / fit / eval
// pipelines, replication loops, cross-validation and plot-data emission.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "mopi/experiment.hpp"

using namespace mopi;

namespace {

// Applies --set key.path=value overrides onto the JSON config.
void apply_overrides(Json& config, const std::vector<std::string>& overrides) {
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    const std::string path = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(raw);
    } catch (...) {
      value = raw;  // bare strings stay strings
    }
    Json* node = &config;
    size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot - start);
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      node = &(*node)[key];
      start = dot + 1;
    }
  }
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  Json doc = read_json(path);
  apply_overrides(doc, overrides);
  return experiment_config_from_json(doc);
}

const Dataset& split_of(const ReplicationData& data, const std::string& name) {
  if (name == "pretrain") return data.pretrain;
  if (name == "calibration") return data.calibration;
  if (name == "test") return data.test;
  throw ConfigError("split '" + name + "'");
}

int find_method(const ExperimentConfig& config, const std::string& name) {
  for (size_t i = 0; i < config.methods.size(); ++i) {
    if (config.methods[i].name == name) return static_cast<int>(i);
  }
  throw ConfigError("method '" + name + "' not present in config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minimax-calibrated prediction sets: experiment harness"};
  app.require_subcommand(1);

  std::string config_path, out_path, method_name = "mopi";
  std::string rule_path, artifacts_path, results_path, figure_kind, metric, trace_path;
  std::string split_name = "calibration", grid_path;
  std::vector<std::string> overrides;
  int replication = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON")->required();
    cmd->add_option("--set", overrides, "override config entries as key.path=value");
    cmd->add_option("--replication", replication, "replication index (seed = base_seed + r)");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a dataset split to CSV");
  add_common(gen);
  gen->add_option("--split", split_name, "pretrain | calibration | test");
  gen->add_option("--out", out_path, "output CSV path")->required();

  CLI::App* pretrain = app.add_subcommand("pretrain", "fit frozen components on the pretrain split");
  add_common(pretrain);
  pretrain->add_option("--out", out_path, "artifacts JSON path")->required();

  CLI::App* fit = app.add_subcommand("fit", "calibrate one method and write the rule JSON");
  add_common(fit);
  fit->add_option("--method", method_name, "method name from the config");
  fit->add_option("--artifacts", artifacts_path, "artifacts JSON from `pretrain`")->required();
  fit->add_option("--out", out_path, "rule JSON path")->required();
  fit->add_option("--trace", trace_path, "optional fit-trace CSV (mopi only)");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a fitted rule on the test split");
  add_common(eval);
  eval->add_option("--rule", rule_path, "rule JSON")->required();
  eval->add_option("--artifacts", artifacts_path, "artifacts JSON")->required();
  eval->add_option("--out", out_path, "metrics JSON path")->required();

  CLI::App* experiment = app.add_subcommand("experiment", "run the full replication loop");
  add_common(experiment);
  experiment->add_option("--out-dir", out_path, "output directory")->required();

  CLI::App* cv = app.add_subcommand("cv", "cross-validate hyperparameters on the calibration split");
  add_common(cv);
  cv->add_option("--method", method_name, "method name from the config");
  cv->add_option("--grid", grid_path, "grid JSON with bandwidth/gamma/lr arrays")->required();
  cv->add_option("--out", out_path, "chosen-hyperparameters JSON path")->required();

  CLI::App* plotdata = app.add_subcommand("plotdata", "emit long-format plot series from results");
  plotdata->add_option("--results", results_path, "results CSV from `experiment`")->required();
  plotdata->add_option("--kind", figure_kind, "group | rsweep | coverage_vs_n")->required();
  plotdata->add_option("--metric", metric, "metric override for sweep kinds");
  plotdata->add_option("--out", out_path, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const ExperimentConfig config = load_config(config_path, overrides);
      const ReplicationData data = generate_replication_data(config, replication);
      Json meta{{"config_hash", config_hash(config)},
                {"generator", experiment_config_to_json(config)["generator"]},
                {"replication", replication},
                {"split", split_name},
                {"git", MOPI_GIT_HASH}};
      export_csv(split_of(data, split_name), out_path, meta.dump(2));
      std::cout << "wrote " << out_path << "\n";
    } else if (pretrain->parsed()) {
      const ExperimentConfig config = load_config(config_path, overrides);
      const ReplicationData data = generate_replication_data(config, replication);
      const PretrainedParts parts =
          pretrain_families(config.family, data.pretrain, config.alpha, config.generator.scheme);
      Json doc = artifacts_to_json(*parts.mopi_family);
      doc["baseline_family"] = to_json(*parts.baseline_family);
      doc["neutral"] = parts.neutral;
      doc["config_hash"] = config_hash(config);
      write_json(doc, out_path);
      std::cout << "wrote " << out_path << "\n";
    } else if (fit->parsed()) {
      const ExperimentConfig config = load_config(config_path, overrides);
      const Json artifacts = read_json(artifacts_path);
      PretrainedParts parts;
      parts.mopi_family = std::make_shared<SetFamily>(family_from_artifacts(artifacts));
      parts.baseline_family =
          std::make_shared<SetFamily>(family_from_json(artifacts.at("baseline_family")));
      parts.neutral = artifacts.at("neutral").get<Vector>();
      const ReplicationData data = generate_replication_data(config, replication);
      MethodConfig method = config.methods[find_method(config, method_name)];
      method.solver.seed = config.base_seed + static_cast<uint64_t>(replication);
      PredictionRule rule = fit_method(method, parts, data.calibration, config.alpha,
                                       config.generator.scheme, trace_path);
      rule.config_hash = config_hash(config);
      write_json(rule_to_json(rule), out_path);
      std::cout << "wrote " << out_path << "\n";
    } else if (eval->parsed()) {
      const ExperimentConfig config = load_config(config_path, overrides);
      const PredictionRule rule = rule_from_json(read_json(rule_path), read_json(artifacts_path));
      const ReplicationData data = generate_replication_data(config, replication);
      const Dataset& test = data.test;
      Json out{{"config_hash", config_hash(config)}, {"method", to_string(rule.method)}};
      for (const std::string& m : config.metrics) {
        if (m == "marginal") {
          out["marginal"] = marginal_coverage(rule, test);
        } else if (m == "root_msce_binned") {
          out["root_msce_binned"] =
              root_msce_binned(rule, test, config.metric_config.bins, config.alpha).root_msce;
        } else if (m == "worst_case") {
          SeededRng rng(config.base_seed + replication, 5);
          const std::optional<double> radius =
              config.metric_config.ball_radius == "uniform" || test.dim_x() == 1
                  ? std::optional<double>{}
                  : std::optional<double>{std::sqrt(2.0 * test.dim_x())};
          out["worst_case"] =
              worst_case_ball_coverage(rule, test, config.metric_config.balls, radius, rng);
        } else if (m == "group_coverage" && config.generator.scheme) {
          out["group_coverage"] = group_coverage(rule, test, *config.generator.scheme);
        } else if (m == "level_coverage") {
          Json levels;
          for (const auto& [z, c] : level_coverage(rule, test)) {
            levels["z" + std::to_string(z)] = c;
          }
          out["level_coverage"] = levels;
        } else if (m == "set_size") {
          try {
            const SetSizeSummary s = set_size_summary(rule, test);
            out["median_volume"] = s.median_volume;
            out["median_log_volume"] = s.median_log_volume;
          } catch (const Unsupported&) {
          }
        } else if (m == "exact_msce") {
          const ExactMsce e = exact_msce(rule, config.generator, config.alpha,
                                         config.metric_config.exact_msce_outer,
                                         config.base_seed ^ 0x5eedULL,
                                         config.metric_config.exact_msce_inner);
          out["exact_msce"] = e.msce;
          out["exact_msce_mc_error"] = e.mc_error;
        }
      }
      write_json(out, out_path);
      std::cout << "wrote " << out_path << "\n";
    } else if (experiment->parsed()) {
      const ExperimentConfig config = load_config(config_path, overrides);
      const ExperimentResult result = run_experiment(config);
      std::filesystem::create_directories(out_path);
      write_results_csv(result, out_path + "/results.csv");
      write_json(summarize(result), out_path + "/summary.json");
      std::cout << "wrote " << out_path << "/results.csv and summary.json\n";
    } else if (cv->parsed()) {
      const ExperimentConfig config = load_config(config_path, overrides);
      const Json grid_doc = read_json(grid_path);
      CvGrid grid;
      if (grid_doc.contains("bandwidth")) grid.bandwidth = grid_doc["bandwidth"].get<Vector>();
      if (grid_doc.contains("gamma")) grid.gamma = grid_doc["gamma"].get<Vector>();
      if (grid_doc.contains("lr")) grid.learning_rate = grid_doc["lr"].get<Vector>();
      const CvChoice choice =
          cross_validate(config, method_name, grid, grid_doc.value("folds", 2));
      write_json(Json{{"bandwidth", choice.bandwidth},
                      {"gamma", choice.gamma},
                      {"lr", choice.learning_rate},
                      {"objective", choice.objective},
                      {"config_hash", config_hash(config)}},
                 out_path);
      std::cout << "wrote " << out_path << "\n";
    } else if (plotdata->parsed()) {
      emit_plotdata(results_path, figure_kind, out_path, metric);
      std::cout << "wrote " << out_path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
