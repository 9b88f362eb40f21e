#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "solar/eval.hpp"

namespace solar {

// One row of the per-epoch metrics stream.
struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double eta = 0.0;
    double rho = 0.0;
    double loss_ce = 0.0;
    double loss_cr = 0.0;
    double loss_mix = 0.0;
    double loss_rn = 0.0;
    double loss_total = 0.0;
    double reliable_fraction = 0.0;
    std::vector<double> reliable_per_class;  // reliable fraction within each argmax slice
    std::vector<double> prior;
    std::optional<double> prior_tv;
    std::optional<GroupAccuracy> test_accuracy;
};

enum class ReportFormat { kCsv, kJson };

nlohmann::json metrics_to_json(const EpochMetrics& m);
EpochMetrics metrics_from_json(const nlohmann::json& j);

// JSONL stream, one object per epoch.
void write_metrics_jsonl(const std::vector<EpochMetrics>& history, const std::string& path);
std::vector<EpochMetrics> read_metrics_jsonl(const std::string& path);

// Scalar table over the history: losses, reliable fraction, prior TV, and
// group accuracies in a stable column order. CSV and JSON carry identical
// values.
void write_report(const std::vector<EpochMetrics>& history, const std::string& path,
                  ReportFormat format);
void write_report_from_file(const std::string& metrics_path, const std::string& out_path,
                            ReportFormat format);

}  // namespace solar
