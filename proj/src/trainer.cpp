#include "solar/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace solar {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> per_feature_std(const Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.row(i);
        for (std::size_t a = 0; a < d; ++a) mean[a] += row[a];
    }
    for (double& v : mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.row(i);
        for (std::size_t a = 0; a < d; ++a) {
            const double dev = row[a] - mean[a];
            var[a] += dev * dev;
        }
    }
    std::vector<double> sd(d);
    for (std::size_t a = 0; a < d; ++a) sd[a] = std::sqrt(var[a] / static_cast<double>(n));
    return sd;
}

Matrix gather_rows(const Matrix& x, const std::vector<int>& rows) {
    Matrix out(rows.size(), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = x.row(static_cast<std::size_t>(rows[i]));
        std::copy(src, src + x.cols(), out.row(i));
    }
    return out;
}

Matrix add_noise(const Matrix& x, const std::vector<double>& feature_std, double sigma,
                 std::mt19937_64& rng) {
    if (sigma <= 0.0) return x;
    Matrix out = x;
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* row = out.row(i);
        for (std::size_t a = 0; a < out.cols(); ++a) row[a] += sigma * feature_std[a] * unit(rng);
    }
    return out;
}

struct StageOptions {
    int epochs = 0;
    double mu = 0.0;
    std::uint64_t seed = 0;
    const PLLDataset* eval_set = nullptr;
    bool record_metrics = false;
};

TrainResult train_stage(const PLLDataset& ds, const RunConfig& run, const ClassPrior& start_prior,
                        const StageOptions& stage) {
    const TrainConfig& cfg = run.train;
    const std::size_t n = ds.size();
    const auto num_classes = static_cast<std::size_t>(ds.num_classes);
    const std::size_t batch = std::min(cfg.batch_size, n);
    const bool refinery = cfg.mode == TrainMode::kSolar;

    std::mt19937_64 rng(stage.seed);
    ModelConfig model_cfg{cfg.architecture, ds.dim(), num_classes, cfg.hidden_width};
    ClassifierModel model(model_cfg, rng());
    SgdState sgd;
    PredictionQueue queue(cfg.queue_multiplier * batch, num_classes);
    PriorEstimatorState estimator{start_prior, stage.mu};

    const auto feature_std = per_feature_std(ds.features);
    const ClassPrior true_prior = ds.true_labels || ds.class_counts
                                      ? empirical_label_distribution(ds)
                                      : ClassPrior{};

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result{std::move(model), estimator.prior, {}};

    for (int epoch = 0; epoch < stage.epochs; ++epoch) {
        const double lr = cosine_lr(cfg.learning_rate, epoch, stage.epochs);
        const double eta = refinery ? resolve_eta(cfg, epoch) : 0.0;
        const double rho = resolve_rho(run.selection, epoch);

        std::shuffle(order.begin(), order.end(), rng);
        PriorCounter counter(num_classes);

        LossBreakdown epoch_loss;
        double reliable_sum = 0.0;
        std::vector<long long> class_reliable(num_classes, 0);
        std::vector<long long> class_total(num_classes, 0);
        std::size_t sample_total = 0;
        std::size_t steps = 0;

        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(start + batch, n);
            const std::vector<int> batch_rows(order.begin() + static_cast<long>(start),
                                              order.begin() + static_cast<long>(end));
            const std::size_t m = batch_rows.size();

            Matrix x = gather_rows(ds.features, batch_rows);
            std::vector<CandidateMask> masks(m);
            for (std::size_t i = 0; i < m; ++i) {
                masks[i] = ds.candidates[static_cast<std::size_t>(batch_rows[i])];
            }

            Matrix x_weak = add_noise(x, feature_std, cfg.noise_sigma_weak, rng);
            Matrix x_strong = add_noise(x, feature_std, cfg.noise_sigma_strong, rng);
            PredictionBatch p_weak = result.model.forward(x_weak);

            StepInputs inputs;
            inputs.eta = eta;
            inputs.use_cr = cfg.use_cr && refinery;
            inputs.use_mixup = cfg.use_mixup && refinery;
            inputs.rn_targets = renorm_targets(p_weak.probs, masks);
            inputs.x_weak = std::move(x_weak);

            if (refinery) {
                RefineryResult refined =
                    refine_with_queue(p_weak, masks, queue, estimator.prior, run.sinkhorn);
                SelectionResult selection = select_reliable(refined.pseudo_labels, p_weak, masks,
                                                            estimator.prior, run.selection, epoch);
                for (std::size_t i = 0; i < m; ++i) {
                    if (selection.reliable[i]) {
                        inputs.reliable_rows.push_back(static_cast<int>(i));
                    } else {
                        inputs.unreliable_rows.push_back(static_cast<int>(i));
                    }
                }
                reliable_sum += static_cast<double>(selection.reliable_count());
                for (std::size_t j = 0; j < num_classes; ++j) {
                    class_reliable[j] += selection.per_class_counts[j];
                    class_total[j] += selection.per_class_totals[j];
                }
                inputs.pseudo_targets = std::move(refined.pseudo_labels.targets);
                if (inputs.use_mixup && inputs.reliable_rows.size() >= 2) {
                    Matrix x_rel = gather_rows(inputs.x_weak, inputs.reliable_rows);
                    Matrix q_rel = gather_rows(inputs.pseudo_targets, inputs.reliable_rows);
                    auto [xm, qm] = mixup_pairs(x_rel, q_rel, cfg.mixup_concentration, rng);
                    inputs.x_mix = std::move(xm);
                    inputs.q_mix = std::move(qm);
                }
            } else {
                // Renormalized-loss arm: every sample is an "unreliable" one.
                inputs.pseudo_targets = Matrix(m, num_classes, 0.0);
                for (std::size_t i = 0; i < m; ++i) {
                    inputs.unreliable_rows.push_back(static_cast<int>(i));
                }
            }

            inputs.x_ce = cfg.ce_on_weak_view ? inputs.x_weak : x;
            inputs.x_strong = std::move(x_strong);

            std::vector<double> grad;
            const LossBreakdown losses = step_loss_and_grad(result.model, inputs, &grad);
            sgd_step(result.model, grad, lr, cfg.momentum, sgd);

            if (run.prior.on_the_fly) counter.accumulate(p_weak, masks);

            epoch_loss.ce += losses.ce;
            epoch_loss.cr += losses.cr;
            epoch_loss.mix += losses.mix;
            epoch_loss.rn += losses.rn;
            epoch_loss.total += losses.total;
            sample_total += m;
            ++steps;
        }

        // Empirical class prior over the whole dataset, moving-average blend.
        const ClassPrior z =
            run.prior.on_the_fly
                ? counter.finish()
                : empirical_prior(result.model.forward(ds.features), ds.candidates);
        estimator.prior = update_prior(estimator.prior, z, estimator.mu);

        if (stage.record_metrics) {
            EpochMetrics m;
            m.epoch = epoch;
            m.lr = lr;
            m.eta = eta;
            m.rho = rho;
            const double inv_steps = 1.0 / static_cast<double>(steps);
            m.loss_ce = epoch_loss.ce * inv_steps;
            m.loss_cr = epoch_loss.cr * inv_steps;
            m.loss_mix = epoch_loss.mix * inv_steps;
            m.loss_rn = epoch_loss.rn * inv_steps;
            m.loss_total = epoch_loss.total * inv_steps;
            m.reliable_fraction = reliable_sum / static_cast<double>(sample_total);
            m.reliable_per_class.resize(num_classes);
            for (std::size_t j = 0; j < num_classes; ++j) {
                m.reliable_per_class[j] =
                    class_total[j] > 0 ? static_cast<double>(class_reliable[j]) /
                                             static_cast<double>(class_total[j])
                                       : 0.0;
            }
            m.prior = estimator.prior.probs;
            if (!true_prior.probs.empty()) {
                m.prior_tv = prior_tv_distance(estimator.prior, true_prior);
            }
            if (stage.eval_set) {
                m.test_accuracy = evaluate(result.model, *stage.eval_set,
                                           ShotGroups::thirds(ds.num_classes));
            }
            result.history.push_back(std::move(m));
        }
    }

    result.prior = std::move(estimator.prior);
    return result;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (eta_end < 0.0 || eta_end > 0.9) throw ConfigError("eta_end must be in [0, 0.9]");
    if (eta_ramp_epochs < 0) throw ConfigError("eta_ramp_epochs must be >= 0");
    if (!(mixup_concentration > 0.0)) throw ConfigError("mixup_concentration must be > 0");
    if (noise_sigma_weak < 0.0 || noise_sigma_strong < 0.0) {
        throw ConfigError("noise sigmas must be >= 0");
    }
    if (queue_multiplier < 1) throw ConfigError("queue_multiplier must be >= 1");
    if (architecture == Architecture::kOneHiddenLayer && hidden_width < 1) {
        throw ConfigError("hidden_width must be >= 1");
    }
}

void RunConfig::validate() const {
    if (!seed_set) throw ConfigError("seed is mandatory");
    train.validate();
    sinkhorn.validate();
    selection.validate();
    prior.validate();
}

double cosine_lr(double lr0, int epoch, int total_epochs) {
    if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
    return 0.5 * lr0 * (1.0 + std::cos(kPi * static_cast<double>(epoch) /
                                       static_cast<double>(total_epochs)));
}

double resolve_eta(const TrainConfig& cfg, int epoch) {
    if (cfg.eta_ramp_epochs == 0 || epoch >= cfg.eta_ramp_epochs) return cfg.eta_end;
    if (epoch <= 0) return 0.0;
    return cfg.eta_end * static_cast<double>(epoch) / static_cast<double>(cfg.eta_ramp_epochs);
}

LossBreakdown step_loss(const ClassifierModel& model, const StepInputs& inputs) {
    return step_loss_and_grad(model, inputs, nullptr);
}

LossBreakdown step_loss_and_grad(const ClassifierModel& model, const StepInputs& inputs,
                                 std::vector<double>* grad) {
    LossBreakdown out;
    if (grad) grad->assign(model.num_params(), 0.0);

    auto accumulate = [&](const Matrix& x, const Matrix& dlogits) {
        if (!grad) return;
        const std::vector<double> g = model.backward(x, dlogits);
        for (std::size_t k = 0; k < g.size(); ++k) (*grad)[k] += g[k];
    };

    const double eta = inputs.eta;
    if (eta > 0.0 && !inputs.reliable_rows.empty()) {
        const PredictionBatch p_ce = model.forward(inputs.x_ce);
        out.ce = ce_mean(p_ce.probs, inputs.pseudo_targets, inputs.reliable_rows);
        if (grad) {
            Matrix dlogits(p_ce.size(), p_ce.num_classes(), 0.0);
            add_ce_grad(p_ce.probs, inputs.pseudo_targets, inputs.reliable_rows, eta, dlogits);
            accumulate(inputs.x_ce, dlogits);
        }
        if (inputs.use_cr) {
            const PredictionBatch p_strong = model.forward(inputs.x_strong);
            out.cr = ce_mean(p_strong.probs, inputs.pseudo_targets, inputs.reliable_rows);
            if (grad) {
                Matrix dlogits(p_strong.size(), p_strong.num_classes(), 0.0);
                add_ce_grad(p_strong.probs, inputs.pseudo_targets, inputs.reliable_rows, eta,
                            dlogits);
                accumulate(inputs.x_strong, dlogits);
            }
        }
        if (inputs.use_mixup && inputs.x_mix.rows() > 0) {
            const PredictionBatch p_mix = model.forward(inputs.x_mix);
            std::vector<int> mix_rows(inputs.x_mix.rows());
            std::iota(mix_rows.begin(), mix_rows.end(), 0);
            out.mix = ce_mean(p_mix.probs, inputs.q_mix, mix_rows);
            if (grad) {
                Matrix dlogits(p_mix.size(), p_mix.num_classes(), 0.0);
                add_ce_grad(p_mix.probs, inputs.q_mix, mix_rows, eta, dlogits);
                accumulate(inputs.x_mix, dlogits);
            }
        }
    }
    if (eta < 1.0 && !inputs.unreliable_rows.empty()) {
        const PredictionBatch p_weak = model.forward(inputs.x_weak);
        out.rn = ce_mean(p_weak.probs, inputs.rn_targets, inputs.unreliable_rows);
        if (grad) {
            Matrix dlogits(p_weak.size(), p_weak.num_classes(), 0.0);
            add_ce_grad(p_weak.probs, inputs.rn_targets, inputs.unreliable_rows, 1.0 - eta,
                        dlogits);
            accumulate(inputs.x_weak, dlogits);
        }
    }
    out.total = composite_loss(out.ce, out.cr, out.mix, out.rn, eta);
    return out;
}

TrainResult train(const PLLDataset& ds, const RunConfig& run, const PLLDataset* eval_set) {
    ds.validate();
    run.validate();

    std::mt19937_64 master(run.seed);
    const std::uint64_t pre_seed = master();
    const std::uint64_t main_seed = master();

    ClassPrior prior = init_prior(run.prior.init, ds);
    const bool refinery = run.train.mode == TrainMode::kSolar;
    if (refinery && run.prior.pre_estimate_epochs > 0) {
        StageOptions pre;
        pre.epochs = run.prior.pre_estimate_epochs;
        pre.mu = run.prior.mu_pre;
        pre.seed = pre_seed;
        prior = train_stage(ds, run, prior, pre).prior;
    }

    StageOptions main_stage;
    main_stage.epochs = run.train.epochs;
    main_stage.mu = run.prior.mu_main;
    main_stage.seed = main_seed;
    main_stage.eval_set = eval_set;
    main_stage.record_metrics = true;
    return train_stage(ds, run, prior, main_stage);
}

ClassPrior run_pre_estimation(const PLLDataset& ds, const RunConfig& run, int epochs) {
    ds.validate();
    run.validate();
    if (epochs < 1) throw ConfigError("pre-estimation epochs must be >= 1");
    std::mt19937_64 master(run.seed);
    StageOptions pre;
    pre.epochs = epochs;
    pre.mu = run.prior.mu_pre;
    pre.seed = master();
    return train_stage(ds, run, init_prior(run.prior.init, ds), pre).prior;
}

}  // namespace solar
