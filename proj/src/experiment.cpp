#include "mopi/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "mopi/errors.hpp"

namespace mopi {

namespace {

uint64_t fnv1a_str(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string MethodConfig::label() const {
  if (std::isnan(param)) return name;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s@%g", name.c_str(), param);
  return buf;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  const int version = j.value("schema_version", 1);
  if (version != 1) {
    throw ConfigError("unsupported config schema_version " + std::to_string(version));
  }
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  const Json& g = j.at("generator");
  c.generator.kind = GeneratorSpec::kind_from_string(g.at("kind").get<std::string>());
  c.generator.d_x = g.value("d_x", 6);
  c.generator.d_y = g.value("d_y", 2);
  c.generator.rho = g.value("rho", 1.0);
  if (g.contains("scheme")) {
    GroupScheme s;
    const std::string kind = g.at("scheme").at("kind").get<std::string>();
    s.kind = kind == "interval1d" ? GroupScheme::Kind::Interval1D
                                  : GroupScheme::Kind::ComplexOverlap;
    s.count = g.at("scheme").value("count", 5);
    c.generator.scheme = s;
  }
  c.n_pre = j.at("n_pre").get<int>();
  c.n_cal = j.at("n_cal").get<int>();
  c.n_test = j.at("n_test").get<int>();
  c.alpha = j.value("alpha", 0.1);
  c.replications = j.value("replications", 1);
  c.base_seed = j.value("base_seed", uint64_t{1});
  if (j.contains("family")) {
    const Json& f = j.at("family");
    c.family.kind = f.value("kind", c.family.kind);
    c.family.score = f.value("score", c.family.score);
    if (f.contains("pretrain")) {
      const Json& p = f.at("pretrain");
      c.family.pretrain.mean = p.value("mean", c.family.pretrain.mean);
      c.family.pretrain.ridge = p.value("ridge", c.family.pretrain.ridge);
      c.family.pretrain.knn_k = p.value("knn_k", c.family.pretrain.knn_k);
      c.family.pretrain.grouped_scales =
          p.value("grouped_scales", c.family.pretrain.grouped_scales);
    }
  }
  for (const Json& m : j.at("methods")) {
    MethodConfig mc;
    mc.name = m.at("name").get<std::string>();
    if (m.contains("param")) mc.param = m.at("param").get<double>();
    if (m.contains("weight")) {
      const Json& w = m.at("weight");
      if (w.at("kind").get<std::string>() == "indicator") {
        mc.weight = WeightClass::indicator({});
      } else {
        mc.weight = WeightClass::rkhs(w.value("bandwidth", 1.0), w.value("gamma", 1e-3));
      }
    }
    if (m.contains("shape")) {
      const Json& s = m.at("shape");
      const std::string kind = s.at("kind").get<std::string>();
      if (kind == "constant") mc.shape_kind = ShapeModel::Kind::ConstantVector;
      else if (kind == "indicator") mc.shape_kind = ShapeModel::Kind::IndicatorBasis;
      else if (kind == "linear") mc.shape_kind = ShapeModel::Kind::LinearFeatures;
      else if (kind == "rkhs") mc.shape_kind = ShapeModel::Kind::RkhsRepresenter;
      else if (kind == "mlp") mc.shape_kind = ShapeModel::Kind::TwoLayerMlp;
      else throw ConfigError("shape kind '" + kind + "'");
      mc.shape_anchors = s.value("anchors", mc.shape_anchors);
      mc.shape_bandwidth = s.value("bandwidth", mc.shape_bandwidth);
      mc.shape_hidden = s.value("hidden", mc.shape_hidden);
    }
    if (m.contains("solver")) {
      const Json& s = m.at("solver");
      const std::string surrogate = s.value("surrogate", std::string("erf"));
      mc.solver.surrogate.kind = surrogate == "sigmoid" ? Surrogate::Kind::Sigmoid
                                                        : Surrogate::Kind::ErrorFunction;
      mc.solver.surrogate.r = s.value("r", 0.1);
      mc.solver.adam.learning_rate = s.value("lr", 1e-2);
      mc.solver.iterations = s.value("iterations", 2000);
      mc.solver.nu = s.value("nu", 0.0);
    }
    c.methods.push_back(std::move(mc));
  }
  if (j.contains("metrics")) c.metrics = j.at("metrics").get<std::vector<std::string>>();
  if (j.contains("metric_config")) {
    const Json& m = j.at("metric_config");
    c.metric_config.bins = m.value("bins", c.metric_config.bins);
    c.metric_config.balls = m.value("balls", c.metric_config.balls);
    c.metric_config.ball_radius = m.value("ball_radius", c.metric_config.ball_radius);
    c.metric_config.exact_msce_outer = m.value("exact_msce_outer", c.metric_config.exact_msce_outer);
    c.metric_config.exact_msce_inner = m.value("exact_msce_inner", c.metric_config.exact_msce_inner);
  }
  return c;
}

Json experiment_config_to_json(const ExperimentConfig& c) {
  Json g{{"kind", GeneratorSpec::kind_to_string(c.generator.kind)},
         {"d_x", c.generator.d_x},
         {"d_y", c.generator.d_y},
         {"rho", c.generator.rho}};
  if (c.generator.scheme) {
    g["scheme"] = Json{{"kind", c.generator.scheme->kind == GroupScheme::Kind::Interval1D
                                    ? "interval1d"
                                    : "complex_overlap"},
                       {"count", c.generator.scheme->count}};
  }
  Json methods = Json::array();
  for (const MethodConfig& m : c.methods) {
    Json mj{{"name", m.name}};
    if (!std::isnan(m.param)) mj["param"] = m.param;
    if (m.name != "scp") {
      mj["weight"] =
          m.weight.kind == WeightClass::Kind::IndicatorBasis
              ? Json{{"kind", "indicator"}}
              : Json{{"kind", "rkhs"}, {"bandwidth", m.weight.bandwidth}, {"gamma", m.weight.gamma}};
    }
    if (m.name == "mopi") {
      const char* sk = m.shape_kind == ShapeModel::Kind::ConstantVector    ? "constant"
                       : m.shape_kind == ShapeModel::Kind::IndicatorBasis  ? "indicator"
                       : m.shape_kind == ShapeModel::Kind::LinearFeatures  ? "linear"
                       : m.shape_kind == ShapeModel::Kind::RkhsRepresenter ? "rkhs"
                                                                           : "mlp";
      mj["shape"] = Json{{"kind", sk},
                         {"anchors", m.shape_anchors},
                         {"bandwidth", m.shape_bandwidth},
                         {"hidden", m.shape_hidden}};
    }
    mj["solver"] = Json{
        {"surrogate", m.solver.surrogate.kind == Surrogate::Kind::Sigmoid ? "sigmoid" : "erf"},
        {"r", m.solver.surrogate.r},
        {"lr", m.solver.adam.learning_rate},
        {"iterations", m.solver.iterations},
        {"nu", m.solver.nu}};
    methods.push_back(std::move(mj));
  }
  return Json{{"schema_version", 1},
              {"name", c.name},
              {"generator", g},
              {"n_pre", c.n_pre},
              {"n_cal", c.n_cal},
              {"n_test", c.n_test},
              {"alpha", c.alpha},
              {"replications", c.replications},
              {"base_seed", c.base_seed},
              {"family",
               Json{{"kind", c.family.kind},
                    {"score", c.family.score},
                    {"pretrain", Json{{"mean", c.family.pretrain.mean},
                                      {"ridge", c.family.pretrain.ridge},
                                      {"knn_k", c.family.pretrain.knn_k},
                                      {"grouped_scales", c.family.pretrain.grouped_scales}}}}},
              {"methods", methods},
              {"metrics", c.metrics},
              {"metric_config", Json{{"bins", c.metric_config.bins},
                                     {"balls", c.metric_config.balls},
                                     {"ball_radius", c.metric_config.ball_radius},
                                     {"exact_msce_outer", c.metric_config.exact_msce_outer},
                                     {"exact_msce_inner", c.metric_config.exact_msce_inner}}}};
}

std::string config_hash(const ExperimentConfig& c) {
  return hash_hex(fnv1a_str(experiment_config_to_json(c).dump()));
}

ReplicationData generate_replication_data(const ExperimentConfig& config, int replication) {
  const uint64_t seed = config.base_seed + static_cast<uint64_t>(replication);
  SeededRng master(seed, 3);
  GeneratorSpec gen = config.generator;
  gen.seed = master.next_u64();
  gen.n = config.n_pre;
  gen.role = DataRole::Pretrain;
  Dataset pre = generate(gen);
  gen.seed = master.next_u64();
  gen.n = config.n_cal;
  gen.role = DataRole::Calibration;
  Dataset cal = generate(gen);
  gen.seed = master.next_u64();
  gen.n = config.n_test;
  gen.role = DataRole::Test;
  Dataset test = generate(gen);
  return ReplicationData{std::move(pre), std::move(cal), std::move(test)};
}

PretrainedParts pretrain_families(const FamilyConfig& config, const Dataset& pre, double alpha,
                                  const std::optional<GroupScheme>& scheme) {
  MeanMap mu0 = config.pretrain.mean == "knn" ? fit_knn_mean(pre, config.pretrain.knn_k)
                                              : fit_ridge_mean(pre, config.pretrain.ridge);
  PretrainedParts parts;
  if (config.kind == "sublevel") {
    ScoreFunction score = [&]() {
      if (config.score == "abs_residual") return ScoreFunction::abs_residual(mu0);
      if (config.score == "mahalanobis") {
        const GlobalCovariance cov = fit_global_covariance(pre, mu0);
        return ScoreFunction::mahalanobis(mu0, Whitening::fixed(cov.inv_sqrt, cov.log_det));
      }
      if (config.score == "normalized_inf") {
        const ScaleMap sigma0 = fit_scales(pre, mu0, config.pretrain.grouped_scales
                                                         ? scheme
                                                         : std::optional<GroupScheme>{});
        return ScoreFunction::normalized_inf(mu0, sigma0);
      }
      throw ConfigError("sublevel score '" + config.score + "'");
    }();
    auto family = std::make_shared<SetFamily>(SetFamily::sublevel(std::move(score)));
    parts.mopi_family = family;
    parts.baseline_family = family;
  } else if (config.kind == "box") {
    const ScaleMap sigma0 = fit_scales(pre, mu0, config.pretrain.grouped_scales
                                                     ? scheme
                                                     : std::optional<GroupScheme>{});
    parts.mopi_family = std::make_shared<SetFamily>(SetFamily::box(mu0, sigma0));
    parts.baseline_family = std::make_shared<SetFamily>(
        SetFamily::sublevel(ScoreFunction::normalized_inf(mu0, sigma0)));
  } else if (config.kind == "ellipsoid") {
    const GlobalCovariance cov = fit_global_covariance(pre, mu0);
    const Whitening wh = Whitening::fixed(cov.inv_sqrt, cov.log_det);
    parts.mopi_family = std::make_shared<SetFamily>(SetFamily::ellipsoid(mu0, wh));
    parts.baseline_family =
        std::make_shared<SetFamily>(SetFamily::sublevel(ScoreFunction::mahalanobis(mu0, wh)));
  } else {
    throw ConfigError("family kind '" + config.kind + "'");
  }
  parts.neutral = neutral_shape_for(*parts.mopi_family, pre, alpha);
  return parts;
}

PredictionRule fit_method(const MethodConfig& method, const PretrainedParts& parts,
                          const Dataset& cal, double alpha,
                          const std::optional<GroupScheme>& scheme,
                          const std::string& trace_path) {
  if (method.name == "scp") {
    return fit_scp(parts.baseline_family, cal, alpha);
  }
  if (method.name == "cc") {
    CcConfig cc;
    cc.adam = method.solver.adam;
    cc.iterations = method.solver.iterations;
    cc.condition_on_x = true;
    cc.scheme = scheme;
    return fit_cc(parts.baseline_family, method.weight, cal, alpha, cc).rule;
  }
  if (method.name != "mopi") throw ConfigError("method '" + method.name + "'");

  ShapeModel::Dims dims;
  dims.d_x = cal.dim_x();
  dims.m = parts.mopi_family->shape_dim();
  dims.hidden = method.shape_hidden;
  dims.bandwidth = method.shape_bandwidth;
  if (method.shape_kind == ShapeModel::Kind::IndicatorBasis) {
    if (!scheme) throw ConfigError("indicator shape needs a group scheme");
    dims.scheme = *scheme;
  }
  if (method.shape_kind == ShapeModel::Kind::RkhsRepresenter) {
    const int na = std::min(method.shape_anchors, cal.size());
    Matrix anchors(na, cal.dim_x());
    for (int a = 0; a < na; ++a) {
      const int i = static_cast<int>(static_cast<int64_t>(a) * cal.size() / na);
      for (int j = 0; j < cal.dim_x(); ++j) anchors(a, j) = cal.x()(i, j);
    }
    dims.anchors = std::move(anchors);
  }
  MopiFit fit = fit_mopi(parts.mopi_family, method.shape_kind, std::move(dims), parts.neutral,
                         method.weight, cal, alpha, method.solver);
  if (!trace_path.empty()) write_trace_csv(fit.trace, trace_path);
  return std::move(fit.rule);
}

namespace {

struct RepOutcome {
  std::vector<ResultRow> rows;
  std::string error;
};

std::optional<double> ball_radius_for(const MetricConfig& mc, int d_x) {
  if (mc.ball_radius == "uniform") return std::nullopt;
  if (mc.ball_radius == "sqrt2dx") return std::sqrt(2.0 * d_x);
  return d_x == 1 ? std::optional<double>{} : std::optional<double>{std::sqrt(2.0 * d_x)};
}

RepOutcome run_replication(const ExperimentConfig& config, int r) {
  RepOutcome out;
  try {
    const uint64_t seed = config.base_seed + static_cast<uint64_t>(r);
    const ReplicationData data = generate_replication_data(config, r);
    const Dataset& cal = data.calibration;
    const Dataset& test = data.test;

    const PretrainedParts parts =
        pretrain_families(config.family, data.pretrain, config.alpha, config.generator.scheme);

    for (const MethodConfig& method : config.methods) {
      MethodConfig fitted_method = method;
      fitted_method.solver.seed = seed;
      const PredictionRule rule =
          fit_method(fitted_method, parts, cal, config.alpha, config.generator.scheme);
      auto push = [&](const std::string& metric, double value) {
        out.rows.push_back(ResultRow{r, method.label(), method.param, metric, value});
      };
      for (const std::string& metric : config.metrics) {
        if (metric == "marginal") {
          push("marginal", marginal_coverage(rule, test));
        } else if (metric == "root_msce_binned") {
          push("root_msce_binned",
               root_msce_binned(rule, test, config.metric_config.bins, config.alpha).root_msce);
        } else if (metric == "worst_case") {
          SeededRng ball_rng(seed, 5);
          push("worst_case",
               worst_case_ball_coverage(rule, test, config.metric_config.balls,
                                        ball_radius_for(config.metric_config, test.dim_x()),
                                        ball_rng));
        } else if (metric == "group_coverage") {
          if (!config.generator.scheme) throw ConfigError("group_coverage needs a scheme");
          const Vector cov = group_coverage(rule, test, *config.generator.scheme);
          for (size_t g = 0; g < cov.size(); ++g) {
            push("group_coverage_g" + std::to_string(g + 1), cov[g]);
          }
        } else if (metric == "level_coverage") {
          for (const auto& [z, covz] : level_coverage(rule, test)) {
            push("coverage_z" + std::to_string(z), covz);
          }
        } else if (metric == "set_size") {
          try {
            const SetSizeSummary s = set_size_summary(rule, test);
            push("median_volume", s.median_volume);
            push("median_log_volume", s.median_log_volume);
          } catch (const Unsupported&) {
            // volume has no closed form for this rule; rows are omitted
          }
        } else if (metric == "exact_msce") {
          const ExactMsce e =
              exact_msce(rule, config.generator, config.alpha, config.metric_config.exact_msce_outer,
                         seed ^ 0x5eedULL, config.metric_config.exact_msce_inner);
          push("exact_msce", e.msce);
          push("exact_msce_mc_error", e.mc_error);
        } else {
          throw ConfigError("metric '" + metric + "'");
        }
      }
    }
  } catch (const std::exception& e) {
    out.error = e.what();
    out.rows.clear();
  }
  return out;
}

int worker_count() {
  if (const char* env = std::getenv("MOPI_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return 1;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result;
  result.hash = config_hash(config);
  const int r_total = config.replications;
  std::vector<RepOutcome> outcomes(r_total);

  const int workers = std::min(worker_count(), r_total);
  if (workers <= 1) {
    for (int r = 0; r < r_total; ++r) outcomes[r] = run_replication(config, r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (int r = next.fetch_add(1); r < r_total; r = next.fetch_add(1)) {
          outcomes[r] = run_replication(config, r);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (int r = 0; r < r_total; ++r) {
    if (!outcomes[r].error.empty()) {
      ++result.failed_replications;
      result.failures.push_back("replication " + std::to_string(r) + ": " + outcomes[r].error);
      continue;
    }
    for (ResultRow& row : outcomes[r].rows) result.rows.push_back(std::move(row));
  }
  if (result.failed_replications * 10 > r_total) {
    std::string msg = "more than 10% of replications failed:";
    for (const auto& f : result.failures) msg += "\n  " + f;
    throw Error(msg);
  }
  for (const auto& f : result.failures) std::cerr << "[warn] " << f << "\n";
  return result;
}

void write_results_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "# config_hash=" << result.hash << "\n";
  out << "replication,method,param,metric,value\n";
  for (const ResultRow& row : result.rows) {
    out << row.replication << "," << row.method << ","
        << (std::isnan(row.param) ? std::string() : format_double(row.param)) << "," << row.metric
        << "," << format_double(row.value) << "\n";
  }
}

ExperimentResult read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  ExperimentResult result;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# config_hash=", 0) != 0) {
    throw ParseError(path + " lacks a config hash header");
  }
  result.hash = line.substr(14);
  std::getline(in, line);  // column header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    ResultRow row;
    std::getline(ss, cell, ',');
    row.replication = std::stoi(cell);
    std::getline(ss, row.method, ',');
    std::getline(ss, cell, ',');
    row.param = cell.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(cell);
    std::getline(ss, row.metric, ',');
    std::getline(ss, cell, ',');
    row.value = std::stod(cell);
    result.rows.push_back(std::move(row));
  }
  return result;
}

Json summarize(const ExperimentResult& result) {
  struct Acc {
    double sum = 0.0, sq = 0.0;
    int n = 0;
  };
  std::map<std::string, std::map<std::string, Acc>> acc;
  for (const ResultRow& row : result.rows) {
    Acc& a = acc[row.method][row.metric];
    a.sum += row.value;
    a.sq += row.value * row.value;
    ++a.n;
  }
  Json methods;
  for (const auto& [method, metrics] : acc) {
    Json mj;
    for (const auto& [metric, a] : metrics) {
      const double mean = a.sum / a.n;
      const double var = a.n > 1 ? std::max(0.0, (a.sq - a.n * mean * mean) / (a.n - 1)) : 0.0;
      const double sd = std::sqrt(var);
      mj[metric] = Json{{"mean", mean},
                        {"std", sd},
                        {"mc_se", a.n > 0 ? sd / std::sqrt(static_cast<double>(a.n)) : 0.0},
                        {"n", a.n}};
    }
    methods[method] = std::move(mj);
  }
  return Json{{"config_hash", result.hash},
              {"failed_replications", result.failed_replications},
              {"methods", methods}};
}

CvChoice cross_validate(const ExperimentConfig& config, const std::string& method_name,
                        const CvGrid& grid, int folds) {
  if (folds < 2) throw Error("cross_validate needs at least 2 folds");
  if (grid.bandwidth.empty() || grid.gamma.empty() || grid.learning_rate.empty()) {
    throw Error("cross_validate: empty grid");
  }
  const auto it = std::find_if(config.methods.begin(), config.methods.end(),
                               [&](const MethodConfig& m) { return m.name == method_name; });
  if (it == config.methods.end()) throw ConfigError("method '" + method_name + "' not in config");
  const MethodConfig base = *it;

  const uint64_t seed = config.base_seed;
  const ReplicationData data = generate_replication_data(config, 0);
  const Dataset& cal = data.calibration;

  const PretrainedParts parts =
      pretrain_families(config.family, data.pretrain, config.alpha, config.generator.scheme);

  SeededRng fold_rng(seed, 9);
  const std::vector<int> perm = fold_rng.permutation(cal.size());

  CvChoice best;
  double best_obj = std::numeric_limits<double>::infinity();
  const int cv_bins = std::min(config.metric_config.bins, 20);
  for (double bw : grid.bandwidth) {
    for (double gm : grid.gamma) {
      for (double lr : grid.learning_rate) {
        MethodConfig m = base;
        if (m.weight.kind == WeightClass::Kind::GaussianRKHS) {
          m.weight = WeightClass::rkhs(bw, gm);
        }
        m.shape_bandwidth = bw;
        m.solver.adam.learning_rate = lr;
        m.solver.seed = seed;
        double obj = 0.0;
        for (int f = 0; f < folds; ++f) {
          std::vector<int> train_idx, held_idx;
          for (int i = 0; i < cal.size(); ++i) {
            (i % folds == f ? held_idx : train_idx).push_back(perm[i]);
          }
          const Dataset train = cal.subset(train_idx, DataRole::Calibration);
          const Dataset held = cal.subset(held_idx, DataRole::Test);
          const PredictionRule rule =
              fit_method(m, parts, train, config.alpha, config.generator.scheme);
          obj += root_msce_binned(rule, held, cv_bins, config.alpha).root_msce / folds;
        }
        if (obj < best_obj - 1e-15) {
          best_obj = obj;
          best = CvChoice{bw, gm, lr, obj};
        }
      }
    }
  }
  return best;
}

void emit_plotdata(const std::string& results_csv, const std::string& figure_kind,
                   const std::string& out_path, const std::string& metric) {
  const ExperimentResult result = read_results_csv(results_csv);
  if (result.hash.empty()) throw Error("results file lacks a config hash");

  struct Acc {
    double sum = 0.0, sq = 0.0;
    int n = 0;
  };
  // key: (x-label, series)
  std::map<std::pair<std::string, std::string>, Acc> series;

  if (figure_kind == "group") {
    for (const ResultRow& row : result.rows) {
      if (row.metric.rfind("group_coverage_", 0) == 0 || row.metric.rfind("coverage_z", 0) == 0) {
        Acc& a = series[{row.metric, row.method}];
        a.sum += row.value;
        a.sq += row.value * row.value;
        ++a.n;
      }
    }
  } else if (figure_kind == "rsweep" || figure_kind == "coverage_vs_n") {
    const std::string want =
        !metric.empty() ? metric
                        : (figure_kind == "rsweep" ? "root_msce_binned" : "marginal");
    for (const ResultRow& row : result.rows) {
      if (row.metric != want || std::isnan(row.param)) continue;
      // series name without the sweep tag
      const std::string base = row.method.substr(0, row.method.find('@'));
      Acc& a = series[{format_double(row.param), base}];
      a.sum += row.value;
      a.sq += row.value * row.value;
      ++a.n;
    }
  } else {
    throw UnsupportedKind("figure kind '" + figure_kind + "'");
  }
  if (series.empty()) throw Error("no rows match figure kind '" + figure_kind + "'");

  std::ofstream out(out_path);
  if (!out) throw Error("cannot write " + out_path);
  out << "# config_hash=" << result.hash << "\n";
  out << "x,series,mean,sd\n";
  for (const auto& [key, a] : series) {
    const double mean = a.sum / a.n;
    const double var = a.n > 1 ? std::max(0.0, (a.sq - a.n * mean * mean) / (a.n - 1)) : 0.0;
    out << key.first << "," << key.second << "," << format_double(mean) << ","
        << format_double(std::sqrt(var)) << "\n";
  }
}

}  // namespace mopi
