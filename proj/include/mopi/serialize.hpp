#pragma once

#include <string>

#include <json.hpp>

#include "mopi/sets.hpp"
#include "mopi/shapes.hpp"

namespace mopi {

using Json = nlohmann::json;

Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json to_json(const ShapeModel& model);
ShapeModel shape_from_json(const Json& j);

Json to_json(const SetFamily& family);
SetFamily family_from_json(const Json& j);

// Pretrained components travel in a separate artifacts document referenced by
// content hash; loading a rule against the wrong artifacts is rejected.
Json artifacts_to_json(const SetFamily& family);
SetFamily family_from_artifacts(const Json& artifacts);

Json rule_to_json(const PredictionRule& rule);
PredictionRule rule_from_json(const Json& rule_doc, const Json& artifacts);

void write_json(const Json& j, const std::string& path);
Json read_json(const std::string& path);

std::string hash_hex(uint64_t h);

}  // namespace mopi
