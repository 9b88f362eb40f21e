#include "solar/dataset_io.hpp"

#include <fstream>

namespace solar {

using nlohmann::json;

namespace {

Matrix matrix_from_json(const json& rows, const char* what) {
    if (!rows.is_array() || rows.empty()) throw DataError(std::string(what) + " must be a non-empty array");
    const std::size_t n = rows.size();
    const std::size_t d = rows[0].is_array() ? rows[0].size() : 0;
    if (d == 0) throw DataError(std::string(what) + " rows must be non-empty arrays");
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i];
        if (!row.is_array() || row.size() != d) {
            throw DataError(std::string(what) + " row " + std::to_string(i) + " has inconsistent length");
        }
        for (std::size_t j = 0; j < d; ++j) m(i, j) = row[j].get<double>();
    }
    return m;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

PLLDataset dataset_from_json(const json& j) {
    if (!j.is_object()) throw DataError("dataset must be a JSON object");
    PLLDataset ds;
    try {
        ds.num_classes = j.at("num_classes").get<int>();
        ds.features = matrix_from_json(j.at("features"), "features");
        const auto& cands = j.at("candidates");
        if (!cands.is_array()) throw DataError("candidates must be an array");
        const auto L = static_cast<std::size_t>(std::max(ds.num_classes, 0));
        ds.candidates.reserve(cands.size());
        for (const auto& row : cands) {
            ds.candidates.push_back(CandidateMask::from_indices(L, row.get<std::vector<int>>()));
        }
        if (j.contains("true_labels") && !j.at("true_labels").is_null()) {
            ds.true_labels = j.at("true_labels").get<std::vector<int>>();
        }
        if (j.contains("class_counts") && !j.at("class_counts").is_null()) {
            ds.class_counts = j.at("class_counts").get<std::vector<int>>();
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("dataset parse failure: ") + e.what());
    }
    ds.validate();
    return ds;
}

json dataset_to_json(const PLLDataset& ds) {
    json j;
    j["num_classes"] = ds.num_classes;
    j["features"] = matrix_to_json(ds.features);
    json cands = json::array();
    for (const auto& mask : ds.candidates) cands.push_back(mask.indices());
    j["candidates"] = std::move(cands);
    j["true_labels"] = ds.true_labels ? json(*ds.true_labels) : json(nullptr);
    j["class_counts"] = ds.class_counts ? json(*ds.class_counts) : json(nullptr);
    return j;
}

PLLDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(std::string("dataset parse failure: ") + e.what());
    }
    return dataset_from_json(j);
}

void save_dataset(const PLLDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out << dataset_to_json(ds).dump() << '\n';
    if (!out) throw IoError("write failure: " + path);
}

}  // namespace solar
