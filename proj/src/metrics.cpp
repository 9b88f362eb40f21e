#include "solar/metrics.hpp"

#include <array>
#include <cstdio>
#include <fstream>

namespace solar {

using nlohmann::json;

namespace {

json optional_to_json(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_from_json(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

constexpr std::array<const char*, 15> kReportColumns = {
    "epoch",         "lr",       "eta",      "rho",         "loss_ce",
    "loss_cr",       "loss_mix", "loss_rn",  "loss_total",  "reliable_fraction",
    "prior_tv",      "acc_overall", "acc_many", "acc_medium", "acc_few"};

json report_row(const EpochMetrics& m) {
    json row;
    row["epoch"] = m.epoch;
    row["lr"] = m.lr;
    row["eta"] = m.eta;
    row["rho"] = m.rho;
    row["loss_ce"] = m.loss_ce;
    row["loss_cr"] = m.loss_cr;
    row["loss_mix"] = m.loss_mix;
    row["loss_rn"] = m.loss_rn;
    row["loss_total"] = m.loss_total;
    row["reliable_fraction"] = m.reliable_fraction;
    row["prior_tv"] = optional_to_json(m.prior_tv);
    row["acc_overall"] = m.test_accuracy ? json(m.test_accuracy->overall) : json(nullptr);
    row["acc_many"] = m.test_accuracy ? optional_to_json(m.test_accuracy->many) : json(nullptr);
    row["acc_medium"] = m.test_accuracy ? optional_to_json(m.test_accuracy->medium) : json(nullptr);
    row["acc_few"] = m.test_accuracy ? optional_to_json(m.test_accuracy->few) : json(nullptr);
    return row;
}

std::string csv_cell(const json& v) {
    if (v.is_null()) return "";
    return v.dump();
}

}  // namespace

json metrics_to_json(const EpochMetrics& m) {
    json j = report_row(m);
    j["prior"] = m.prior;
    j["reliable_per_class"] = m.reliable_per_class;
    return j;
}

EpochMetrics metrics_from_json(const json& j) {
    EpochMetrics m;
    try {
        m.epoch = j.at("epoch").get<int>();
        m.lr = j.at("lr").get<double>();
        m.eta = j.at("eta").get<double>();
        m.rho = j.at("rho").get<double>();
        m.loss_ce = j.at("loss_ce").get<double>();
        m.loss_cr = j.at("loss_cr").get<double>();
        m.loss_mix = j.at("loss_mix").get<double>();
        m.loss_rn = j.at("loss_rn").get<double>();
        m.loss_total = j.at("loss_total").get<double>();
        m.reliable_fraction = j.at("reliable_fraction").get<double>();
        if (j.contains("prior") && !j.at("prior").is_null()) {
            m.prior = j.at("prior").get<std::vector<double>>();
        }
        if (j.contains("reliable_per_class") && !j.at("reliable_per_class").is_null()) {
            m.reliable_per_class = j.at("reliable_per_class").get<std::vector<double>>();
        }
        m.prior_tv = optional_from_json(j, "prior_tv");
        const auto overall = optional_from_json(j, "acc_overall");
        if (overall) {
            GroupAccuracy acc;
            acc.overall = *overall;
            acc.many = optional_from_json(j, "acc_many");
            acc.medium = optional_from_json(j, "acc_medium");
            acc.few = optional_from_json(j, "acc_few");
            m.test_accuracy = acc;
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("metrics parse failure: ") + e.what());
    }
    return m;
}

void write_metrics_jsonl(const std::vector<EpochMetrics>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    for (const auto& m : history) out << metrics_to_json(m).dump() << '\n';
    if (!out) throw IoError("write failure: " + path);
}

std::vector<EpochMetrics> read_metrics_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file: " + path);
    std::vector<EpochMetrics> history;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            history.push_back(metrics_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError(std::string("metrics parse failure: ") + e.what());
        }
    }
    return history;
}

void write_report(const std::vector<EpochMetrics>& history, const std::string& path,
                  ReportFormat format) {
    if (history.empty()) throw DataError("empty metrics history");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    if (format == ReportFormat::kJson) {
        json rows = json::array();
        for (const auto& m : history) rows.push_back(report_row(m));
        out << rows.dump(2) << '\n';
    } else {
        for (std::size_t c = 0; c < kReportColumns.size(); ++c) {
            out << (c ? "," : "") << kReportColumns[c];
        }
        out << '\n';
        for (const auto& m : history) {
            const json row = report_row(m);
            for (std::size_t c = 0; c < kReportColumns.size(); ++c) {
                out << (c ? "," : "") << csv_cell(row.at(kReportColumns[c]));
            }
            out << '\n';
        }
    }
    if (!out) throw IoError("write failure: " + path);
}

void write_report_from_file(const std::string& metrics_path, const std::string& out_path,
                            ReportFormat format) {
    write_report(read_metrics_jsonl(metrics_path), out_path, format);
}

}  // namespace solar
