#pragma once

#include "json.hpp"

#include "a2/features.hpp"
#include "a2/model.hpp"

namespace a2 {

nlohmann::json model_config_json(const ModelConfig& c);
ModelConfig model_config_from(const nlohmann::json& j);
nlohmann::json schema_json(const FeatureSchema& s);
FeatureSchema schema_from(const nlohmann::json& j);

}  // namespace a2
