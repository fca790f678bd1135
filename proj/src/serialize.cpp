#include "mopi/serialize.hpp"

#include <cstdio>
#include <fstream>

#include "mopi/errors.hpp"

namespace mopi {

std::string hash_hex(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const Json& j) {
  Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.data().size()) throw ParseError("matrix payload size");
  m.data() = data;
  return m;
}

namespace {

Json scheme_to_json(const GroupScheme& s) {
  return Json{{"kind", s.kind == GroupScheme::Kind::Interval1D ? "interval1d" : "complex_overlap"},
              {"count", s.count}};
}

GroupScheme scheme_from_json(const Json& j) {
  GroupScheme s;
  const std::string kind = j.at("kind").get<std::string>();
  s.kind = kind == "interval1d" ? GroupScheme::Kind::Interval1D : GroupScheme::Kind::ComplexOverlap;
  s.count = j.at("count").get<int>();
  return s;
}

const char* shape_kind_name(ShapeModel::Kind k) {
  switch (k) {
    case ShapeModel::Kind::ConstantVector: return "constant";
    case ShapeModel::Kind::IndicatorBasis: return "indicator";
    case ShapeModel::Kind::LinearFeatures: return "linear";
    case ShapeModel::Kind::RkhsRepresenter: return "rkhs";
    case ShapeModel::Kind::TwoLayerMlp: return "mlp";
  }
  return "?";
}

ShapeModel::Kind shape_kind_from(const std::string& s) {
  if (s == "constant") return ShapeModel::Kind::ConstantVector;
  if (s == "indicator") return ShapeModel::Kind::IndicatorBasis;
  if (s == "linear") return ShapeModel::Kind::LinearFeatures;
  if (s == "rkhs") return ShapeModel::Kind::RkhsRepresenter;
  if (s == "mlp") return ShapeModel::Kind::TwoLayerMlp;
  throw ParseError("shape kind '" + s + "'");
}

Json mean_to_json(const MeanMap& m) {
  Json j;
  switch (m.kind()) {
    case MeanMap::Kind::Zero:
      j["kind"] = "zero";
      j["d_y"] = m.dim_y();
      break;
    case MeanMap::Kind::Linear:
      j["kind"] = "linear";
      j["w"] = to_json(m.w());
      j["b"] = m.b();
      break;
    case MeanMap::Kind::Knn:
      j["kind"] = "knn";
      j["k"] = m.k();
      j["x"] = to_json(m.knn_x());
      j["y"] = to_json(m.knn_y());
      break;
  }
  return j;
}

MeanMap mean_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "zero") return MeanMap::zero(j.at("d_y").get<int>());
  if (kind == "linear") {
    return MeanMap::linear(matrix_from_json(j.at("w")), j.at("b").get<Vector>());
  }
  if (kind == "knn") {
    return MeanMap::knn(j.at("k").get<int>(), matrix_from_json(j.at("x")),
                        matrix_from_json(j.at("y")));
  }
  throw ParseError("mean map kind '" + kind + "'");
}

Json scale_to_json(const ScaleMap& s) {
  if (s.is_grouped()) {
    return Json{{"kind", "grouped"},
                {"scheme", scheme_to_json(s.scheme())},
                {"sigma", to_json(s.group_sigma())}};
  }
  return Json{{"kind", "global"}, {"sigma", s.global_sigma()}};
}

ScaleMap scale_from_json(const Json& j) {
  if (j.at("kind").get<std::string>() == "grouped") {
    return ScaleMap::grouped(scheme_from_json(j.at("scheme")), matrix_from_json(j.at("sigma")));
  }
  return ScaleMap::global(j.at("sigma").get<Vector>());
}

Json whitening_to_json(const Whitening& w) {
  if (w.is_fixed()) {
    return Json{{"kind", "fixed"},
                {"w", to_json(w.fixed_matrix())},
                {"log_det_sigma0", w.log_det_sigma0({})}};
  }
  return Json{{"kind", "net"}, {"net", to_json(w.net_model())}, {"d_y", w.dim_y()}};
}

Whitening whitening_from_json(const Json& j) {
  if (j.at("kind").get<std::string>() == "fixed") {
    return Whitening::fixed(matrix_from_json(j.at("w")), j.at("log_det_sigma0").get<double>());
  }
  return Whitening::net(shape_from_json(j.at("net")), j.at("d_y").get<int>());
}

Json score_to_json(const ScoreFunction& s) {
  Json j;
  j["mu0"] = mean_to_json(s.mu0());
  switch (s.kind()) {
    case ScoreFunction::Kind::AbsResidual:
      j["kind"] = "abs_residual";
      break;
    case ScoreFunction::Kind::Mahalanobis:
      j["kind"] = "mahalanobis";
      j["whitening"] = whitening_to_json(s.whitening());
      break;
    case ScoreFunction::Kind::NormalizedInf:
      j["kind"] = "normalized_inf";
      j["sigma0"] = scale_to_json(s.sigma0());
      break;
  }
  return j;
}

ScoreFunction score_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  MeanMap mu0 = mean_from_json(j.at("mu0"));
  if (kind == "abs_residual") return ScoreFunction::abs_residual(std::move(mu0));
  if (kind == "mahalanobis") {
    return ScoreFunction::mahalanobis(std::move(mu0), whitening_from_json(j.at("whitening")));
  }
  if (kind == "normalized_inf") {
    return ScoreFunction::normalized_inf(std::move(mu0), scale_from_json(j.at("sigma0")));
  }
  throw ParseError("score kind '" + kind + "'");
}

}  // namespace

Json to_json(const ShapeModel& model) {
  const ShapeModel::Dims& d = model.dims();
  Json j;
  j["kind"] = shape_kind_name(model.kind());
  j["d_x"] = d.d_x;
  j["m"] = d.m;
  j["params"] = model.params();
  switch (model.kind()) {
    case ShapeModel::Kind::IndicatorBasis:
      j["scheme"] = scheme_to_json(d.scheme);
      break;
    case ShapeModel::Kind::LinearFeatures:
      j["intercept"] = d.intercept;
      break;
    case ShapeModel::Kind::RkhsRepresenter:
      j["anchors"] = to_json(d.anchors);
      j["bandwidth"] = d.bandwidth;
      break;
    case ShapeModel::Kind::TwoLayerMlp:
      j["hidden"] = d.hidden;
      break;
    default:
      break;
  }
  return j;
}

ShapeModel shape_from_json(const Json& j) {
  ShapeModel::Dims dims;
  const ShapeModel::Kind kind = shape_kind_from(j.at("kind").get<std::string>());
  dims.d_x = j.at("d_x").get<int>();
  dims.m = j.at("m").get<int>();
  if (j.contains("scheme")) dims.scheme = scheme_from_json(j.at("scheme"));
  if (j.contains("intercept")) dims.intercept = j.at("intercept").get<bool>();
  if (j.contains("anchors")) dims.anchors = matrix_from_json(j.at("anchors"));
  if (j.contains("bandwidth")) dims.bandwidth = j.at("bandwidth").get<double>();
  if (j.contains("hidden")) dims.hidden = j.at("hidden").get<int>();
  const Vector neutral(dims.m, 0.0);
  SeededRng rng(0);
  ShapeModel model = ShapeModel::init(kind, std::move(dims), neutral, rng);
  model.set_params(j.at("params").get<Vector>());
  return model;
}

Json to_json(const SetFamily& family) {
  Json j;
  switch (family.kind()) {
    case SetFamily::Kind::Sublevel:
      j["kind"] = "sublevel";
      j["score"] = score_to_json(family.score());
      break;
    case SetFamily::Kind::Box:
      j["kind"] = "box";
      j["mu0"] = mean_to_json(family.mu0());
      j["sigma0"] = scale_to_json(family.sigma0());
      break;
    case SetFamily::Kind::Ellipsoid:
      j["kind"] = "ellipsoid";
      j["mu0"] = mean_to_json(family.mu0());
      j["whitening"] = whitening_to_json(family.whitening());
      break;
  }
  return j;
}

SetFamily family_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "sublevel") return SetFamily::sublevel(score_from_json(j.at("score")));
  if (kind == "box") {
    return SetFamily::box(mean_from_json(j.at("mu0")), scale_from_json(j.at("sigma0")));
  }
  if (kind == "ellipsoid") {
    return SetFamily::ellipsoid(mean_from_json(j.at("mu0")),
                                whitening_from_json(j.at("whitening")));
  }
  throw ParseError("family kind '" + kind + "'");
}

Json artifacts_to_json(const SetFamily& family) {
  return Json{{"version", 1},
              {"pretrained_hash", hash_hex(family.pretrained_hash())},
              {"family", to_json(family)}};
}

SetFamily family_from_artifacts(const Json& artifacts) {
  SetFamily family = family_from_json(artifacts.at("family"));
  const std::string declared = artifacts.at("pretrained_hash").get<std::string>();
  if (declared != hash_hex(family.pretrained_hash())) {
    throw HashMismatch("artifacts declare " + declared + " but content hashes to " +
                       hash_hex(family.pretrained_hash()));
  }
  return family;
}

Json rule_to_json(const PredictionRule& rule) {
  return Json{{"version", 1},
              {"method", to_string(rule.method)},
              {"config_hash", rule.config_hash},
              {"family_kind", to_json(*rule.family).at("kind")},
              {"pretrained_hash", hash_hex(rule.family->pretrained_hash())},
              {"shape", to_json(rule.shape)}};
}

PredictionRule rule_from_json(const Json& rule_doc, const Json& artifacts) {
  if (rule_doc.at("version").get<int>() != 1) throw ParseError("unknown rule version");
  SetFamily family = family_from_artifacts(artifacts);
  const std::string expect = rule_doc.at("pretrained_hash").get<std::string>();
  if (expect != hash_hex(family.pretrained_hash())) {
    throw HashMismatch("rule was fitted against " + expect + ", artifacts hash to " +
                       hash_hex(family.pretrained_hash()));
  }
  PredictionRule rule{std::make_shared<SetFamily>(std::move(family)),
                      shape_from_json(rule_doc.at("shape")), Method::MOPI,
                      rule_doc.at("config_hash").get<std::string>()};
  const std::string method = rule_doc.at("method").get<std::string>();
  rule.method = method == "scp" ? Method::SCP : method == "cc" ? Method::CC : Method::MOPI;
  return rule;
}

void write_json(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  Json j;
  in >> j;
  return j;
}

}  // namespace mopi
