#pragma once

#include <json.hpp>

#include "solar/datagen.hpp"
#include "solar/trainer.hpp"

namespace solar {

// Run configuration schema: a JSON object
//   { "seed": int (mandatory),
//     "train": {...}, "sinkhorn": {...}, "selection": {...}, "prior": {...} }
// with every field optional except the seed; omitted fields take the
// documented defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& run);

GenConfig gen_config_from_json(const nlohmann::json& j);
nlohmann::json gen_config_to_json(const GenConfig& cfg);

SinkhornConfig sinkhorn_config_from_json(const nlohmann::json& j);
nlohmann::json sinkhorn_config_to_json(const SinkhornConfig& cfg);

}  // namespace solar
