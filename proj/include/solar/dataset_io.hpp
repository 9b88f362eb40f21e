#pragma once

#include <string>

#include <json.hpp>

#include "solar/types.hpp"

namespace solar {

// On-disk dataset format: a JSON object
//   { "num_classes": int,
//     "features": [[float]],
//     "candidates": [[int]]   (candidate class indices per row),
//     "true_labels": [int] or null,
//     "class_counts": [int] or null }
// Features round-trip bit-exactly through the serializer.

PLLDataset dataset_from_json(const nlohmann::json& j);
nlohmann::json dataset_to_json(const PLLDataset& ds);

PLLDataset load_dataset(const std::string& path);
void save_dataset(const PLLDataset& ds, const std::string& path);

}  // namespace solar
