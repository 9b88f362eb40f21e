#include "solar/solar.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <string>

#include <json.hpp>

#include "solar/config_json.hpp"
#include "solar/datagen.hpp"
#include "solar/dataset_io.hpp"
#include "solar/eval.hpp"
#include "solar/metrics.hpp"
#include "solar/sinkhorn.hpp"
#include "solar/trainer.hpp"

using nlohmann::json;

struct solar_dataset {
    solar::PLLDataset ds;
};

struct solar_model {
    solar::ClassifierModel model;
    solar::ClassPrior prior;
};

namespace {

thread_local std::string g_last_error;

char* copy_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
solar_status guarded(Fn&& fn) {
    try {
        fn();
        return SOLAR_OK;
    } catch (const solar::ConfigError& e) {
        g_last_error = e.what();
        return SOLAR_ERR_USAGE;
    } catch (const solar::DivergenceError& e) {
        g_last_error = e.what();
        return SOLAR_ERR_DIVERGED;
    } catch (const solar::IoError& e) {
        g_last_error = e.what();
        return SOLAR_ERR_IO;
    } catch (const solar::DataError& e) {
        g_last_error = e.what();
        return SOLAR_ERR_DATA;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SOLAR_ERR_INTERNAL;
    }
}

json parse_json(const char* text, const char* what) {
    if (text == nullptr) throw solar::ConfigError(std::string(what) + " must not be null");
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw solar::ConfigError(std::string(what) + " parse failure: " + e.what());
    }
}

solar::ShotGroups groups_from_json(const json& j, int num_classes) {
    if (!j.is_object()) throw solar::ConfigError("groups must be an object");
    solar::ShotGroups groups;
    groups.many = j.value("many", std::vector<int>{});
    groups.medium = j.value("medium", std::vector<int>{});
    groups.few = j.value("few", std::vector<int>{});
    groups.validate(num_classes);
    return groups;
}

}  // namespace

extern "C" {

const char* solar_version(void) { return "0.1.0"; }

const char* solar_last_error(void) { return g_last_error.c_str(); }

void solar_string_free(char* str) { delete[] str; }

solar_status solar_dataset_load(const char* path, solar_dataset** out) {
    return guarded([&] {
        if (path == nullptr || out == nullptr) throw solar::ConfigError("null argument");
        *out = new solar_dataset{solar::load_dataset(path)};
    });
}

solar_status solar_dataset_save(const solar_dataset* ds, const char* path) {
    return guarded([&] {
        if (ds == nullptr || path == nullptr) throw solar::ConfigError("null argument");
        solar::save_dataset(ds->ds, path);
    });
}

solar_status solar_dataset_generate(const char* gen_config_json, solar_dataset** out) {
    return guarded([&] {
        if (out == nullptr) throw solar::ConfigError("null argument");
        const auto cfg = solar::gen_config_from_json(parse_json(gen_config_json, "gen config"));
        *out = new solar_dataset{solar::generate_dataset(cfg)};
    });
}

solar_status solar_dataset_generate_test(const char* gen_config_json, size_t per_class,
                                         unsigned long long seed, solar_dataset** out) {
    return guarded([&] {
        if (out == nullptr) throw solar::ConfigError("null argument");
        const auto cfg = solar::gen_config_from_json(parse_json(gen_config_json, "gen config"));
        *out = new solar_dataset{
            solar::generate_test_set(cfg, static_cast<int>(per_class), seed)};
    });
}

void solar_dataset_free(solar_dataset* ds) { delete ds; }

size_t solar_dataset_num_samples(const solar_dataset* ds) { return ds ? ds->ds.size() : 0; }

size_t solar_dataset_num_classes(const solar_dataset* ds) {
    return ds ? static_cast<size_t>(ds->ds.num_classes) : 0;
}

size_t solar_dataset_num_features(const solar_dataset* ds) { return ds ? ds->ds.dim() : 0; }

solar_status solar_dataset_summary(const solar_dataset* ds, char** out_json) {
    return guarded([&] {
        if (ds == nullptr || out_json == nullptr) throw solar::ConfigError("null argument");
        const auto& d = ds->ds;
        double candidate_total = 0.0;
        for (const auto& mask : d.candidates) candidate_total += static_cast<double>(mask.count());
        json j;
        j["num_samples"] = d.size();
        j["num_classes"] = d.num_classes;
        j["dim"] = d.dim();
        j["mean_candidate_size"] = candidate_total / static_cast<double>(d.size());
        j["has_true_labels"] = d.true_labels.has_value();
        if (d.class_counts && !d.class_counts->empty() && d.class_counts->back() > 0) {
            j["achieved_gamma"] = static_cast<double>(d.class_counts->front()) /
                                  static_cast<double>(d.class_counts->back());
        } else {
            j["achieved_gamma"] = nullptr;
        }
        *out_json = copy_string(j.dump());
    });
}

solar_status solar_solve(const char* request_json, char** out_json) {
    return guarded([&] {
        if (out_json == nullptr) throw solar::ConfigError("null argument");
        const json req = parse_json(request_json, "solve request");

        const auto p_rows = req.at("P").get<std::vector<std::vector<double>>>();
        if (p_rows.empty()) throw solar::DataError("P must be non-empty");
        const std::size_t m = p_rows.size();
        const std::size_t num_classes = p_rows[0].size();
        solar::Matrix probs(m, num_classes);
        for (std::size_t i = 0; i < m; ++i) {
            if (p_rows[i].size() != num_classes) throw solar::DataError("ragged P matrix");
            for (std::size_t j = 0; j < num_classes; ++j) probs(i, j) = p_rows[i][j];
        }

        const auto cand = req.at("candidates").get<std::vector<std::vector<int>>>();
        if (cand.size() != m) throw solar::DataError("candidates row count mismatch");
        std::vector<solar::CandidateMask> masks;
        masks.reserve(m);
        for (const auto& row : cand) {
            masks.push_back(solar::CandidateMask::from_indices(num_classes, row));
        }

        solar::ClassPrior prior{req.at("r").get<std::vector<double>>()};
        prior.validate();
        solar::SinkhornConfig cfg;
        if (req.contains("config")) cfg = solar::sinkhorn_config_from_json(req.at("config"));

        const auto result =
            solar::refine_labels(solar::PredictionBatch{std::move(probs)}, masks, prior, cfg);

        json q_rows = json::array();
        for (std::size_t i = 0; i < m; ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < num_classes; ++j) {
                row.push_back(result.pseudo_labels.targets(i, j));
            }
            q_rows.push_back(std::move(row));
        }
        json out;
        out["Q"] = std::move(q_rows);
        out["diagnostics"] = json{{"iterations", result.iterations_used},
                                  {"relaxed", result.relaxed},
                                  {"row_marginal_error", result.row_marginal_error},
                                  {"column_marginal_error", result.column_marginal_error}};
        *out_json = copy_string(out.dump());
    });
}

solar_status solar_resolve_run_config(const char* run_config_json, char** out_json) {
    return guarded([&] {
        if (out_json == nullptr) throw solar::ConfigError("null argument");
        const auto run = solar::run_config_from_json(parse_json(run_config_json, "run config"));
        *out_json = copy_string(solar::run_config_to_json(run).dump(2));
    });
}

solar_status solar_train(const solar_dataset* train_data, const solar_dataset* eval_data,
                         const char* run_config_json, const char* metrics_jsonl_path,
                         solar_model** out_model) {
    return guarded([&] {
        if (train_data == nullptr || out_model == nullptr) {
            throw solar::ConfigError("null argument");
        }
        const auto run = solar::run_config_from_json(parse_json(run_config_json, "run config"));
        auto result =
            solar::train(train_data->ds, run, eval_data ? &eval_data->ds : nullptr);
        if (metrics_jsonl_path != nullptr) {
            solar::write_metrics_jsonl(result.history, metrics_jsonl_path);
        }
        *out_model = new solar_model{std::move(result.model), std::move(result.prior)};
    });
}

solar_status solar_model_save(const solar_model* model, const char* path) {
    return guarded([&] {
        if (model == nullptr || path == nullptr) throw solar::ConfigError("null argument");
        json j = solar::model_to_json(model->model);
        j["prior"] = model->prior.probs;
        std::ofstream out(path);
        if (!out) throw solar::IoError(std::string("cannot open file for writing: ") + path);
        out << j.dump() << '\n';
        if (!out) throw solar::IoError(std::string("write failure: ") + path);
    });
}

solar_status solar_model_load(const char* path, solar_model** out) {
    return guarded([&] {
        if (path == nullptr || out == nullptr) throw solar::ConfigError("null argument");
        std::ifstream in(path);
        if (!in) throw solar::IoError(std::string("cannot open model file: ") + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw solar::DataError(std::string("model parse failure: ") + e.what());
        }
        auto model = solar::model_from_json(j);
        solar::ClassPrior prior;
        if (j.contains("prior") && !j.at("prior").is_null()) {
            prior.probs = j.at("prior").get<std::vector<double>>();
            prior.validate();
        } else {
            prior = solar::ClassPrior::uniform(model.config().num_classes);
        }
        *out = new solar_model{std::move(model), std::move(prior)};
    });
}

void solar_model_free(solar_model* model) { delete model; }

solar_status solar_model_prior(const solar_model* model, char** out_json) {
    return guarded([&] {
        if (model == nullptr || out_json == nullptr) throw solar::ConfigError("null argument");
        *out_json = copy_string(json(model->prior.probs).dump());
    });
}

solar_status solar_evaluate(const solar_model* model, const solar_dataset* test_data,
                            const char* eval_config_json, char** out_json) {
    return guarded([&] {
        if (model == nullptr || test_data == nullptr || out_json == nullptr) {
            throw solar::ConfigError("null argument");
        }
        double zeta = 0.0;
        const int num_classes = test_data->ds.num_classes;
        solar::ShotGroups groups = solar::ShotGroups::thirds(num_classes);
        if (eval_config_json != nullptr) {
            const json cfg = parse_json(eval_config_json, "eval config");
            zeta = cfg.value("zeta", 0.0);
            if (cfg.contains("groups")) groups = groups_from_json(cfg.at("groups"), num_classes);
        }
        const auto acc =
            solar::evaluate(model->model, test_data->ds, groups, zeta, &model->prior);

        const auto preds =
            solar::predict_labels(model->model, test_data->ds.features, zeta, &model->prior);
        std::vector<char> in_few(static_cast<std::size_t>(num_classes), 0);
        for (int j : groups.few) in_few[static_cast<std::size_t>(j)] = 1;
        long long few_predictions = 0;
        for (int y : preds) few_predictions += in_few[static_cast<std::size_t>(y)];

        json out;
        out["overall"] = acc.overall;
        out["many"] = acc.many ? json(*acc.many) : json(nullptr);
        out["medium"] = acc.medium ? json(*acc.medium) : json(nullptr);
        out["few"] = acc.few ? json(*acc.few) : json(nullptr);
        out["num_samples"] = test_data->ds.size();
        out["zeta"] = zeta;
        out["few_prediction_count"] = few_predictions;
        *out_json = copy_string(out.dump());
    });
}

solar_status solar_report(const char* metrics_jsonl_path, const char* out_path,
                          const char* format) {
    return guarded([&] {
        if (metrics_jsonl_path == nullptr || out_path == nullptr || format == nullptr) {
            throw solar::ConfigError("null argument");
        }
        const std::string fmt(format);
        solar::ReportFormat rf;
        if (fmt == "csv") {
            rf = solar::ReportFormat::kCsv;
        } else if (fmt == "json") {
            rf = solar::ReportFormat::kJson;
        } else {
            throw solar::ConfigError("unknown report format: " + fmt);
        }
        solar::write_report_from_file(metrics_jsonl_path, out_path, rf);
    });
}

}  // extern "C"
