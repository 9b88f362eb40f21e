#include "solar/config_json.hpp"

namespace solar {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "linear") return Architecture::kSoftmaxLinear;
    if (s == "mlp") return Architecture::kOneHiddenLayer;
    throw ConfigError("unknown architecture: " + s);
}

std::string architecture_to_string(Architecture a) {
    return a == Architecture::kSoftmaxLinear ? "linear" : "mlp";
}

SelectionMode selection_mode_from_string(const std::string& s) {
    if (s == "classwise") return SelectionMode::kClasswise;
    if (s == "global") return SelectionMode::kGlobal;
    if (s == "none") return SelectionMode::kNone;
    throw ConfigError("unknown selection mode: " + s);
}

std::string selection_mode_to_string(SelectionMode m) {
    switch (m) {
        case SelectionMode::kClasswise: return "classwise";
        case SelectionMode::kGlobal: return "global";
        default: return "none";
    }
}

}  // namespace

SinkhornConfig sinkhorn_config_from_json(const json& j) {
    SinkhornConfig cfg;
    read(j, "lambda", cfg.lambda);
    read(j, "max_iters", cfg.max_iters);
    read(j, "tol", cfg.tol);
    read(j, "relax_epsilon", cfg.relax_epsilon);
    read(j, "divergence_guard", cfg.divergence_guard);
    read(j, "prob_floor", cfg.prob_floor);
    cfg.validate();
    return cfg;
}

json sinkhorn_config_to_json(const SinkhornConfig& cfg) {
    return json{{"lambda", cfg.lambda},
                {"max_iters", cfg.max_iters},
                {"tol", cfg.tol},
                {"relax_epsilon", cfg.relax_epsilon},
                {"divergence_guard", cfg.divergence_guard},
                {"prob_floor", cfg.prob_floor}};
}

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig run;
    try {
        if (j.contains("seed") && !j.at("seed").is_null()) {
            run.seed = j.at("seed").get<std::uint64_t>();
            run.seed_set = true;
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            TrainConfig& cfg = run.train;
            read(t, "epochs", cfg.epochs);
            read(t, "batch_size", cfg.batch_size);
            read(t, "learning_rate", cfg.learning_rate);
            read(t, "momentum", cfg.momentum);
            read(t, "eta_end", cfg.eta_end);
            read(t, "eta_ramp_epochs", cfg.eta_ramp_epochs);
            read(t, "mixup_concentration", cfg.mixup_concentration);
            read(t, "noise_sigma_weak", cfg.noise_sigma_weak);
            read(t, "noise_sigma_strong", cfg.noise_sigma_strong);
            read(t, "queue_multiplier", cfg.queue_multiplier);
            read(t, "hidden_width", cfg.hidden_width);
            read(t, "use_cr", cfg.use_cr);
            read(t, "use_mixup", cfg.use_mixup);
            read(t, "ce_on_weak_view", cfg.ce_on_weak_view);
            if (t.contains("architecture")) {
                cfg.architecture = architecture_from_string(t.at("architecture").get<std::string>());
            }
            if (t.contains("baseline")) {
                const auto s = t.at("baseline").get<std::string>();
                if (s == "proden") {
                    cfg.mode = TrainMode::kProden;
                } else if (s == "solar") {
                    cfg.mode = TrainMode::kSolar;
                } else {
                    throw ConfigError("unknown baseline: " + s);
                }
            }
        }
        if (j.contains("sinkhorn")) run.sinkhorn = sinkhorn_config_from_json(j.at("sinkhorn"));
        if (j.contains("selection")) {
            const json& s = j.at("selection");
            SelectionConfig& cfg = run.selection;
            read(s, "rho_start", cfg.rho_start);
            read(s, "rho_end", cfg.rho_end);
            read(s, "rho_ramp_epochs", cfg.rho_ramp_epochs);
            read(s, "tau", cfg.tau);
            if (s.contains("mode")) {
                cfg.mode = selection_mode_from_string(s.at("mode").get<std::string>());
            }
        }
        if (j.contains("prior")) {
            const json& p = j.at("prior");
            PriorConfig& cfg = run.prior;
            if (p.contains("init")) {
                const auto s = p.at("init").get<std::string>();
                if (s == "uniform") {
                    cfg.init = PriorInit::kUniform;
                } else if (s == "candidate_count") {
                    cfg.init = PriorInit::kCandidateCount;
                } else {
                    throw ConfigError("unknown prior init: " + s);
                }
            }
            read(p, "mu_pre", cfg.mu_pre);
            read(p, "mu_main", cfg.mu_main);
            read(p, "pre_estimate_epochs", cfg.pre_estimate_epochs);
            read(p, "on_the_fly", cfg.on_the_fly);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config parse failure: ") + e.what());
    }
    run.validate();
    return run;
}

json run_config_to_json(const RunConfig& run) {
    json j;
    j["seed"] = run.seed;
    j["train"] = json{{"epochs", run.train.epochs},
                      {"batch_size", run.train.batch_size},
                      {"learning_rate", run.train.learning_rate},
                      {"momentum", run.train.momentum},
                      {"eta_end", run.train.eta_end},
                      {"eta_ramp_epochs", run.train.eta_ramp_epochs},
                      {"mixup_concentration", run.train.mixup_concentration},
                      {"noise_sigma_weak", run.train.noise_sigma_weak},
                      {"noise_sigma_strong", run.train.noise_sigma_strong},
                      {"queue_multiplier", run.train.queue_multiplier},
                      {"architecture", architecture_to_string(run.train.architecture)},
                      {"hidden_width", run.train.hidden_width},
                      {"use_cr", run.train.use_cr},
                      {"use_mixup", run.train.use_mixup},
                      {"ce_on_weak_view", run.train.ce_on_weak_view},
                      {"baseline", run.train.mode == TrainMode::kProden ? "proden" : "solar"}};
    j["sinkhorn"] = sinkhorn_config_to_json(run.sinkhorn);
    j["selection"] = json{{"rho_start", run.selection.rho_start},
                          {"rho_end", run.selection.rho_end},
                          {"rho_ramp_epochs", run.selection.rho_ramp_epochs},
                          {"tau", run.selection.tau},
                          {"mode", selection_mode_to_string(run.selection.mode)}};
    j["prior"] = json{{"init", run.prior.init == PriorInit::kUniform ? "uniform" : "candidate_count"},
                      {"mu_pre", run.prior.mu_pre},
                      {"mu_main", run.prior.mu_main},
                      {"pre_estimate_epochs", run.prior.pre_estimate_epochs},
                      {"on_the_fly", run.prior.on_the_fly}};
    return j;
}

GenConfig gen_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("gen config must be a JSON object");
    GenConfig cfg;
    try {
        read(j, "num_classes", cfg.num_classes);
        read(j, "dim", cfg.dim);
        read(j, "n_head", cfg.n_head);
        read(j, "imbalance_ratio", cfg.imbalance_ratio);
        read(j, "separation", cfg.separation);
        read(j, "phi", cfg.phi);
        read(j, "seed", cfg.seed);
        if (j.contains("flip")) {
            const auto mode = j.at("flip").get<std::string>();
            if (mode == "uniform") {
                cfg.flip_mode = FlipMode::kUniform;
            } else if (mode == "banded") {
                cfg.flip_mode = FlipMode::kMatrix;
                cfg.flip_matrix = banded_flip_matrix(cfg.num_classes);
            } else if (mode == "matrix") {
                cfg.flip_mode = FlipMode::kMatrix;
                const auto rows = j.at("flip_matrix").get<std::vector<std::vector<double>>>();
                Matrix flip(rows.size(), rows.empty() ? 0 : rows[0].size());
                for (std::size_t y = 0; y < rows.size(); ++y) {
                    if (rows[y].size() != flip.cols()) throw ConfigError("ragged flip matrix");
                    for (std::size_t c = 0; c < flip.cols(); ++c) flip(y, c) = rows[y][c];
                }
                cfg.flip_matrix = std::move(flip);
            } else {
                throw ConfigError("unknown flip mode: " + mode);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("gen config parse failure: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json gen_config_to_json(const GenConfig& cfg) {
    json j{{"num_classes", cfg.num_classes}, {"dim", cfg.dim},
           {"n_head", cfg.n_head},           {"imbalance_ratio", cfg.imbalance_ratio},
           {"separation", cfg.separation},   {"phi", cfg.phi},
           {"seed", cfg.seed}};
    if (cfg.flip_mode == FlipMode::kUniform) {
        j["flip"] = "uniform";
    } else {
        j["flip"] = "matrix";
        json rows = json::array();
        for (std::size_t y = 0; y < cfg.flip_matrix.rows(); ++y) {
            json row = json::array();
            for (std::size_t c = 0; c < cfg.flip_matrix.cols(); ++c) {
                row.push_back(cfg.flip_matrix(y, c));
            }
            rows.push_back(std::move(row));
        }
        j["flip_matrix"] = std::move(rows);
    }
    return j;
}

}  // namespace solar
