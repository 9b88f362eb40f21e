// Command-line front end for the solar pipeline. Talks to the core library
// exclusively through the C API in solar/solar.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "solar/solar.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

int exit_code(solar_status status) {
    switch (status) {
        case SOLAR_OK: return kExitOk;
        case SOLAR_ERR_USAGE: return kExitUsage;
        case SOLAR_ERR_DATA: return kExitData;
        case SOLAR_ERR_IO: return kExitData;
        case SOLAR_ERR_DIVERGED: return kExitDiverged;
        default: return kExitInternal;
    }
}

int fail(solar_status status) {
    std::cerr << "error: " << solar_last_error() << "\n";
    return exit_code(status);
}

// All CLI-facing numbers use 6 significant digits.
std::string num6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string num6(const json& v) {
    if (v.is_null()) return "n/a";
    return num6(v.get<double>());
}

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { solar_string_free(ptr); }
    std::string str() const { return ptr ? ptr : ""; }
};

struct DatasetHandle {
    solar_dataset* ptr = nullptr;
    ~DatasetHandle() { solar_dataset_free(ptr); }
};

struct ModelHandle {
    solar_model* ptr = nullptr;
    ~ModelHandle() { solar_model_free(ptr); }
};

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << text;
}

// ---- gen-data ---------------------------------------------------------

struct GenArgs {
    int classes = 10;
    int dim = 16;
    int n_head = 1000;
    double gamma = 1.0;
    double phi = 0.3;
    double separation = 4.0;
    std::string flip = "uniform";
    std::optional<std::uint64_t> seed;
    std::string out;
    int test_per_class = 0;
    std::string test_out;
};

int run_gen_data(const GenArgs& args) {
    json cfg;
    cfg["num_classes"] = args.classes;
    cfg["dim"] = args.dim;
    cfg["n_head"] = args.n_head;
    cfg["imbalance_ratio"] = args.gamma;
    cfg["separation"] = args.separation;
    cfg["seed"] = *args.seed;

    if (args.flip == "banded") {
        cfg["flip"] = "banded";
    } else if (args.flip.rfind("uniform", 0) == 0) {
        cfg["flip"] = "uniform";
        const auto colon = args.flip.find(':');
        cfg["phi"] = colon == std::string::npos ? args.phi : std::stod(args.flip.substr(colon + 1));
    } else if (args.flip.rfind("matrix:", 0) == 0) {
        cfg["flip"] = "matrix";
        cfg["flip_matrix"] = load_json_file(args.flip.substr(7));
    } else {
        std::cerr << "error: unknown --flip selector: " << args.flip << "\n";
        return kExitUsage;
    }

    const std::string cfg_text = cfg.dump();
    DatasetHandle ds;
    if (auto st = solar_dataset_generate(cfg_text.c_str(), &ds.ptr); st != SOLAR_OK) return fail(st);
    if (auto st = solar_dataset_save(ds.ptr, args.out.c_str()); st != SOLAR_OK) return fail(st);

    OwnedString summary;
    if (auto st = solar_dataset_summary(ds.ptr, &summary.ptr); st != SOLAR_OK) return fail(st);
    const json s = json::parse(summary.str());
    std::cout << "wrote " << args.out << ": n=" << s["num_samples"].get<std::size_t>()
              << " L=" << s["num_classes"].get<int>() << " d=" << s["dim"].get<std::size_t>()
              << " gamma=" << num6(s["achieved_gamma"])
              << " mean_candidates=" << num6(s["mean_candidate_size"]) << "\n";

    if (args.test_per_class > 0) {
        if (args.test_out.empty()) {
            std::cerr << "error: --test-per-class requires --test-out\n";
            return kExitUsage;
        }
        DatasetHandle test;
        if (auto st = solar_dataset_generate_test(cfg_text.c_str(),
                                                  static_cast<size_t>(args.test_per_class),
                                                  *args.seed + 1, &test.ptr);
            st != SOLAR_OK) {
            return fail(st);
        }
        if (auto st = solar_dataset_save(test.ptr, args.test_out.c_str()); st != SOLAR_OK) {
            return fail(st);
        }
        std::cout << "wrote " << args.test_out << ": "
                  << solar_dataset_num_samples(test.ptr) << " balanced test samples\n";
    }
    return kExitOk;
}

// ---- train ------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string test_data;
    std::string out_dir = "solar_run";
    std::string config_path;
    std::optional<std::uint64_t> seed;

    std::optional<int> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> lr;
    std::optional<double> momentum;
    std::optional<double> eta_end;
    std::optional<int> eta_ramp_epochs;
    std::optional<double> mixup_concentration;
    std::optional<double> lambda;
    std::optional<int> max_iters;
    std::optional<double> rho_start;
    std::optional<double> rho_end;
    std::optional<int> rho_ramp_epochs;
    std::optional<double> tau;
    std::optional<std::size_t> queue_multiplier;
    std::optional<double> mu_pre;
    std::optional<double> mu_main;
    std::optional<int> pre_estimate_epochs;
    std::optional<double> noise_weak;
    std::optional<double> noise_strong;
    std::optional<std::size_t> hidden_width;
    std::string architecture;
    std::string prior_init;
    std::string baseline;
    bool no_cr = false;
    bool no_mixup = false;
    bool no_selection = false;
    bool global_selection = false;
    bool on_the_fly_prior = false;
    bool ce_on_clean = false;
};

template <typename T>
void set_if(json& obj, const char* key, const std::optional<T>& v) {
    if (v) obj[key] = *v;
}

int run_train(const TrainArgs& args) {
    json cfg = json::object();
    if (!args.config_path.empty()) cfg = load_json_file(args.config_path);

    if (args.seed) {
        cfg["seed"] = *args.seed;
    } else if (!cfg.contains("seed")) {
        if (const char* env = std::getenv("SOLAR_SEED")) {
            cfg["seed"] = std::strtoull(env, nullptr, 10);
        }
    }

    json& train = cfg["train"];
    set_if(train, "epochs", args.epochs);
    set_if(train, "batch_size", args.batch_size);
    set_if(train, "learning_rate", args.lr);
    set_if(train, "momentum", args.momentum);
    set_if(train, "eta_end", args.eta_end);
    set_if(train, "eta_ramp_epochs", args.eta_ramp_epochs);
    set_if(train, "mixup_concentration", args.mixup_concentration);
    set_if(train, "queue_multiplier", args.queue_multiplier);
    set_if(train, "noise_sigma_weak", args.noise_weak);
    set_if(train, "noise_sigma_strong", args.noise_strong);
    set_if(train, "hidden_width", args.hidden_width);
    if (!args.architecture.empty()) train["architecture"] = args.architecture;
    if (!args.baseline.empty()) train["baseline"] = args.baseline;
    if (args.no_cr) train["use_cr"] = false;
    if (args.no_mixup) train["use_mixup"] = false;
    if (args.ce_on_clean) train["ce_on_weak_view"] = false;

    json& sinkhorn = cfg["sinkhorn"];
    set_if(sinkhorn, "lambda", args.lambda);
    set_if(sinkhorn, "max_iters", args.max_iters);

    json& selection = cfg["selection"];
    set_if(selection, "rho_start", args.rho_start);
    set_if(selection, "rho_end", args.rho_end);
    set_if(selection, "rho_ramp_epochs", args.rho_ramp_epochs);
    set_if(selection, "tau", args.tau);
    if (args.no_selection) selection["mode"] = "none";
    if (args.global_selection) selection["mode"] = "global";

    json& prior = cfg["prior"];
    set_if(prior, "mu_pre", args.mu_pre);
    set_if(prior, "mu_main", args.mu_main);
    set_if(prior, "pre_estimate_epochs", args.pre_estimate_epochs);
    if (args.on_the_fly_prior) prior["on_the_fly"] = true;
    if (!args.prior_init.empty()) prior["init"] = args.prior_init;

    if (!cfg.contains("seed")) {
        std::cerr << "error: a seed is mandatory (--seed, config file, or SOLAR_SEED)\n";
        return kExitUsage;
    }

    DatasetHandle ds;
    if (auto st = solar_dataset_load(args.data.c_str(), &ds.ptr); st != SOLAR_OK) return fail(st);
    DatasetHandle test;
    if (!args.test_data.empty()) {
        if (auto st = solar_dataset_load(args.test_data.c_str(), &test.ptr); st != SOLAR_OK) {
            return fail(st);
        }
    }

    std::filesystem::create_directories(args.out_dir);
    const std::string metrics_path = args.out_dir + "/metrics.jsonl";

    const std::string cfg_text = cfg.dump();

    // Echo the effective configuration (defaults resolved) next to the outputs.
    OwnedString resolved;
    if (auto st = solar_resolve_run_config(cfg_text.c_str(), &resolved.ptr); st != SOLAR_OK) {
        return fail(st);
    }
    write_text_file(args.out_dir + "/config.json", resolved.str() + "\n");

    ModelHandle model;
    if (auto st = solar_train(ds.ptr, test.ptr, cfg_text.c_str(), metrics_path.c_str(), &model.ptr);
        st != SOLAR_OK) {
        return fail(st);
    }

    if (auto st = solar_model_save(model.ptr, (args.out_dir + "/model.json").c_str());
        st != SOLAR_OK) {
        return fail(st);
    }
    OwnedString prior_json;
    if (auto st = solar_model_prior(model.ptr, &prior_json.ptr); st != SOLAR_OK) return fail(st);
    write_text_file(args.out_dir + "/prior.json", prior_json.str() + "\n");

    std::cout << "training complete; outputs in " << args.out_dir << "\n";
    if (test.ptr != nullptr) {
        OwnedString eval_out;
        if (auto st = solar_evaluate(model.ptr, test.ptr, nullptr, &eval_out.ptr); st != SOLAR_OK) {
            return fail(st);
        }
        const json e = json::parse(eval_out.str());
        std::cout << "test accuracy: overall=" << num6(e["overall"]) << " many=" << num6(e["many"])
                  << " medium=" << num6(e["medium"]) << " few=" << num6(e["few"]) << "\n";
    }
    return kExitOk;
}

// ---- eval -------------------------------------------------------------

int run_eval(const std::string& model_path, const std::string& data_path, double zeta,
             const std::string& out_path) {
    ModelHandle model;
    if (auto st = solar_model_load(model_path.c_str(), &model.ptr); st != SOLAR_OK) return fail(st);
    DatasetHandle ds;
    if (auto st = solar_dataset_load(data_path.c_str(), &ds.ptr); st != SOLAR_OK) return fail(st);

    const json cfg{{"zeta", zeta}};
    const std::string cfg_text = cfg.dump();
    OwnedString out;
    if (auto st = solar_evaluate(model.ptr, ds.ptr, cfg_text.c_str(), &out.ptr); st != SOLAR_OK) {
        return fail(st);
    }
    const json e = json::parse(out.str());
    std::cout << "overall=" << num6(e["overall"]) << " many=" << num6(e["many"])
              << " medium=" << num6(e["medium"]) << " few=" << num6(e["few"])
              << " zeta=" << num6(e["zeta"]) << "\n";
    if (!out_path.empty()) write_text_file(out_path, out.str() + "\n");
    return kExitOk;
}

// ---- solve ------------------------------------------------------------

int run_solve(const std::string& input_path, const std::string& out_path) {
    std::ifstream in(input_path);
    if (!in) {
        std::cerr << "error: cannot open file: " << input_path << "\n";
        return kExitData;
    }
    std::string request((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    OwnedString out;
    if (auto st = solar_solve(request.c_str(), &out.ptr); st != SOLAR_OK) return fail(st);
    if (out_path.empty()) {
        std::cout << out.str() << "\n";
    } else {
        write_text_file(out_path, out.str() + "\n");
        const json d = json::parse(out.str())["diagnostics"];
        std::cout << "solved: iterations=" << d["iterations"].get<int>()
                  << " relaxed=" << (d["relaxed"].get<bool>() ? "true" : "false")
                  << " column_error=" << num6(d["column_marginal_error"]) << "\n";
    }
    return kExitOk;
}

// ---- report -----------------------------------------------------------

int run_report(const std::string& metrics_path, const std::string& format,
               const std::string& out_path) {
    if (auto st = solar_report(metrics_path.c_str(), out_path.c_str(), format.c_str());
        st != SOLAR_OK) {
        return fail(st);
    }
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"solar: long-tailed partial-label learning pipeline"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic partial-label dataset");
    gen_cmd->add_option("--classes", gen.classes, "number of classes L");
    gen_cmd->add_option("--dim", gen.dim, "feature dimension");
    gen_cmd->add_option("--n-head", gen.n_head, "largest class size n_1");
    gen_cmd->add_option("--gamma", gen.gamma, "imbalance ratio n_1/n_L");
    gen_cmd->add_option("--phi", gen.phi, "uniform flipping probability");
    gen_cmd->add_option("--separation", gen.separation, "center distance in blob-std units");
    gen_cmd->add_option("--flip", gen.flip, "uniform[:phi] | banded | matrix:<file>");
    gen_cmd->add_option("--seed", gen.seed, "generator seed")->required();
    gen_cmd->add_option("--out", gen.out, "output dataset path")->required();
    gen_cmd->add_option("--test-per-class", gen.test_per_class, "balanced test samples per class");
    gen_cmd->add_option("--test-out", gen.test_out, "output path for the test set");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "run the full training pipeline");
    train_cmd->add_option("--data", train.data, "training dataset path")->required();
    train_cmd->add_option("--test-data", train.test_data, "labeled evaluation dataset path");
    train_cmd->add_option("--out-dir", train.out_dir, "output directory");
    train_cmd->add_option("--config", train.config_path, "run config JSON file");
    train_cmd->add_option("--seed", train.seed, "run seed (fallback: config file, SOLAR_SEED)");
    train_cmd->add_option("--epochs", train.epochs, "main-stage epochs");
    train_cmd->add_option("--batch-size", train.batch_size, "mini-batch size");
    train_cmd->add_option("--lr", train.lr, "initial learning rate");
    train_cmd->add_option("--momentum", train.momentum, "SGD momentum");
    train_cmd->add_option("--eta-end", train.eta_end, "final eta of the ramp");
    train_cmd->add_option("--eta-ramp-epochs", train.eta_ramp_epochs, "epochs of the eta ramp");
    train_cmd->add_option("--mixup-concentration", train.mixup_concentration,
                          "Beta concentration for mixup");
    train_cmd->add_option("--lambda", train.lambda, "transport smoothing exponent");
    train_cmd->add_option("--max-iters", train.max_iters, "scaling iteration cap");
    train_cmd->add_option("--rho-start", train.rho_start, "small-loss ratio at epoch 0");
    train_cmd->add_option("--rho-end", train.rho_end, "small-loss ratio after the ramp");
    train_cmd->add_option("--rho-ramp-epochs", train.rho_ramp_epochs, "epochs of the rho ramp");
    train_cmd->add_option("--tau", train.tau, "high-confidence threshold");
    train_cmd->add_option("--queue-multiplier", train.queue_multiplier,
                          "queue capacity in batches");
    train_cmd->add_option("--mu-pre", train.mu_pre, "prior moving-average mu, pre-stage");
    train_cmd->add_option("--mu-main", train.mu_main, "prior moving-average mu, main stage");
    train_cmd->add_option("--pre-estimate-epochs", train.pre_estimate_epochs,
                          "pre-estimation epochs (0 disables)");
    train_cmd->add_option("--noise-weak", train.noise_weak, "weak-view noise sigma");
    train_cmd->add_option("--noise-strong", train.noise_strong, "strong-view noise sigma");
    train_cmd->add_option("--architecture", train.architecture, "linear | mlp");
    train_cmd->add_option("--hidden-width", train.hidden_width, "hidden width for mlp");
    train_cmd->add_option("--prior-init", train.prior_init, "uniform | candidate_count");
    train_cmd->add_option("--baseline", train.baseline, "proden | solar");
    train_cmd->add_flag("--no-cr", train.no_cr, "disable consistency regularization");
    train_cmd->add_flag("--no-mixup", train.no_mixup, "disable mixup");
    train_cmd->add_flag("--no-selection", train.no_selection, "treat every sample as reliable");
    train_cmd->add_flag("--global-selection", train.global_selection,
                        "batch-wide small-loss selection");
    train_cmd->add_flag("--on-the-fly-prior", train.on_the_fly_prior,
                        "accumulate the prior from batch statistics");
    train_cmd->add_flag("--ce-on-clean", train.ce_on_clean, "CE term sees clean features");

    std::string eval_model, eval_data, eval_out;
    double eval_zeta = 0.0;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model");
    eval_cmd->add_option("--model", eval_model, "model file")->required();
    eval_cmd->add_option("--data", eval_data, "labeled dataset path")->required();
    eval_cmd->add_option("--logit-adjust", eval_zeta, "logit adjustment temperature zeta");
    eval_cmd->add_option("--out", eval_out, "write metrics JSON here");

    std::string solve_in, solve_out;
    auto* solve_cmd = app.add_subcommand("solve", "standalone pseudo-label solve");
    solve_cmd->add_option("--input", solve_in, "request JSON file {P, candidates, r, config}")
        ->required();
    solve_cmd->add_option("--out", solve_out, "write the response here (default: stdout)");

    std::string report_metrics, report_format = "csv", report_out;
    auto* report_cmd = app.add_subcommand("report", "tabulate a metrics stream");
    report_cmd->add_option("--metrics", report_metrics, "metrics.jsonl path")->required();
    report_cmd->add_option("--format", report_format, "csv | json");
    report_cmd->add_option("--out", report_out, "output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) return run_gen_data(gen);
        if (train_cmd->parsed()) return run_train(train);
        if (eval_cmd->parsed()) return run_eval(eval_model, eval_data, eval_zeta, eval_out);
        if (solve_cmd->parsed()) return run_solve(solve_in, solve_out);
        if (report_cmd->parsed()) return run_report(report_metrics, report_format, report_out);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
