#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "solar/datagen.hpp"
#include "solar/eval.hpp"
#include "solar/trainer.hpp"
#include "support/generators.hpp"

using namespace solar;
using namespace solar::testsupport;

namespace {

RunConfig tiny_run_config(std::uint64_t seed) {
    RunConfig run;
    run.seed = seed;
    run.seed_set = true;
    run.train.epochs = 8;
    run.train.batch_size = 64;
    run.train.learning_rate = 0.2;
    run.train.eta_ramp_epochs = 4;
    run.train.queue_multiplier = 2;
    run.prior.pre_estimate_epochs = 2;
    run.selection.rho_ramp_epochs = 4;
    return run;
}

}  // namespace

TEST_CASE("shipped defaults") {
    const TrainConfig train;
    CHECK(train.epochs == 200);
    CHECK(train.batch_size == 256);
    CHECK(train.learning_rate == 0.01);
    CHECK(train.momentum == 0.9);
    CHECK(train.eta_end == 0.9);
    CHECK(train.eta_ramp_epochs == 50);
    CHECK(train.mixup_concentration == 4.0);
    CHECK(train.queue_multiplier == 64);
    CHECK(train.use_cr);
    CHECK(train.use_mixup);
    CHECK(train.ce_on_weak_view);

    const SinkhornConfig sinkhorn;
    CHECK(sinkhorn.lambda == 3.0);
    CHECK(sinkhorn.max_iters == 50);
    CHECK(sinkhorn.tol == 1e-4);
    CHECK(sinkhorn.relax_epsilon == 1e-5);
    CHECK(sinkhorn.divergence_guard == 10);

    const SelectionConfig selection;
    CHECK(selection.rho_start == 0.2);
    CHECK(selection.rho_end == 0.5);
    CHECK(selection.rho_ramp_epochs == 50);
    CHECK(selection.tau == 0.99);

    const PriorConfig prior;
    CHECK(prior.init == PriorInit::kUniform);
    CHECK(prior.mu_pre == 0.1);
    CHECK(prior.mu_main == 0.01);
    CHECK(prior.pre_estimate_epochs == 20);
    CHECK_FALSE(prior.on_the_fly);
}

TEST_CASE("cosine learning-rate schedule") {
    const double lr0 = 0.01;
    CHECK(cosine_lr(lr0, 0, 200) == doctest::Approx(lr0));
    for (int t = 0; t < 200; ++t) {
        const double expected = 0.5 * lr0 * (1.0 + std::cos(M_PI * t / 200.0));
        CHECK(cosine_lr(lr0, t, 200) == doctest::Approx(expected));
        CHECK(cosine_lr(lr0, t, 200) >= 0.0);
    }
}

TEST_CASE("eta ramp") {
    TrainConfig cfg;
    cfg.eta_end = 0.9;
    cfg.eta_ramp_epochs = 50;
    CHECK(resolve_eta(cfg, 0) == doctest::Approx(0.0));
    CHECK(resolve_eta(cfg, 25) == doctest::Approx(0.45));
    CHECK(resolve_eta(cfg, 50) == doctest::Approx(0.9));
    CHECK(resolve_eta(cfg, 400) == doctest::Approx(0.9));
}

TEST_CASE("composite gradients match central finite differences") {
    std::mt19937_64 rng(101);
    for (const auto arch : {Architecture::kSoftmaxLinear, Architecture::kOneHiddenLayer}) {
        for (const double eta : {0.0, 0.6, 0.9}) {
            ModelConfig mc{arch, 4, 3, 6};
            ClassifierModel model(mc, rng());
            const StepInputs inputs = make_random_step_inputs(rng, 5, 3, 4, eta);

            std::vector<double> analytic;
            step_loss_and_grad(model, inputs, &analytic);
            const auto numeric = finite_difference_grad(
                model, [&] { return step_loss(model, inputs).total; }, 1e-6);

            double max_rel = 0.0;
            for (std::size_t k = 0; k < analytic.size(); ++k) {
                const double denom = std::max({std::abs(analytic[k]), std::abs(numeric[k]), 1e-8});
                max_rel = std::max(max_rel, std::abs(analytic[k] - numeric[k]) / denom);
            }
            CHECK(max_rel < 1e-5);
        }
    }
}

TEST_CASE("loss decomposition recomposes from independent terms") {
    std::mt19937_64 rng(103);
    ModelConfig mc{Architecture::kSoftmaxLinear, 4, 3, 0};
    ClassifierModel model(mc, 5);
    const StepInputs inputs = make_random_step_inputs(rng, 6, 3, 4, 0.6);
    const LossBreakdown losses = step_loss(model, inputs);

    const double ce = ce_mean(model.forward(inputs.x_ce).probs, inputs.pseudo_targets,
                              inputs.reliable_rows);
    const double cr = ce_mean(model.forward(inputs.x_strong).probs, inputs.pseudo_targets,
                              inputs.reliable_rows);
    std::vector<int> mix_rows(inputs.x_mix.rows());
    std::iota(mix_rows.begin(), mix_rows.end(), 0);
    const double mix = ce_mean(model.forward(inputs.x_mix).probs, inputs.q_mix, mix_rows);
    const double rn = ce_mean(model.forward(inputs.x_weak).probs, inputs.rn_targets,
                              inputs.unreliable_rows);

    CHECK(losses.ce == doctest::Approx(ce).epsilon(1e-12));
    CHECK(losses.cr == doctest::Approx(cr).epsilon(1e-12));
    CHECK(losses.mix == doctest::Approx(mix).epsilon(1e-12));
    CHECK(losses.rn == doctest::Approx(rn).epsilon(1e-12));
    CHECK(losses.total ==
          doctest::Approx(composite_loss(ce, cr, mix, rn, 0.6)).epsilon(1e-12));
}

TEST_CASE("eta endpoints of the composite loss") {
    std::mt19937_64 rng(107);
    ModelConfig mc{Architecture::kSoftmaxLinear, 4, 3, 0};
    ClassifierModel model(mc, 7);

    StepInputs at_zero = make_random_step_inputs(rng, 6, 3, 4, 0.0);
    const LossBreakdown zero = step_loss(model, at_zero);
    CHECK(zero.total == doctest::Approx(zero.rn));

    StepInputs no_reliable = make_random_step_inputs(rng, 6, 3, 4, 0.9);
    no_reliable.unreliable_rows.insert(no_reliable.unreliable_rows.end(),
                                       no_reliable.reliable_rows.begin(),
                                       no_reliable.reliable_rows.end());
    std::sort(no_reliable.unreliable_rows.begin(), no_reliable.unreliable_rows.end());
    no_reliable.reliable_rows.clear();
    const LossBreakdown empty_side = step_loss(model, no_reliable);
    CHECK(empty_side.ce == 0.0);
    CHECK(empty_side.cr == 0.0);
    CHECK(empty_side.mix == 0.0);
    CHECK(empty_side.total == doctest::Approx(0.1 * empty_side.rn));
}

TEST_CASE("fixed seeds give byte-identical metrics") {
    GenConfig gen;
    gen.num_classes = 4;
    gen.dim = 6;
    gen.n_head = 60;
    gen.imbalance_ratio = 3.0;
    gen.phi = 0.3;
    gen.separation = 3.0;
    gen.seed = 11;
    const PLLDataset ds = generate_dataset(gen);

    const RunConfig run = tiny_run_config(31);
    const TrainResult a = train(ds, run);
    const TrainResult b = train(ds, run);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(metrics_to_json(a.history[e]).dump() == metrics_to_json(b.history[e]).dump());
    }
    CHECK(a.model.params() == b.model.params());
    CHECK(a.prior.probs == b.prior.probs);

    const TrainResult c = train(ds, tiny_run_config(32));
    CHECK(c.model.params() != a.model.params());
}

TEST_CASE("singleton candidates reduce to supervised training") {
    GenConfig gen;
    gen.num_classes = 3;
    gen.dim = 4;
    gen.n_head = 120;
    gen.imbalance_ratio = 1.0;
    gen.phi = 0.0;  // singleton masks: the degenerate supervised case
    gen.separation = 5.0;
    gen.seed = 13;
    const PLLDataset ds = generate_dataset(gen);
    const PLLDataset test = generate_test_set(gen, 80, 999);

    RunConfig solar_run = tiny_run_config(41);
    solar_run.train.epochs = 25;
    const TrainResult refined = train(ds, solar_run, &test);

    RunConfig supervised_run = solar_run;
    supervised_run.train.mode = TrainMode::kProden;
    const TrainResult supervised = train(ds, supervised_run, &test);

    const auto groups = ShotGroups::thirds(3);
    const double acc_solar = evaluate(refined.model, test, groups).overall;
    const double acc_sup = evaluate(supervised.model, test, groups).overall;
    CHECK(acc_solar >= acc_sup - 0.01);
    CHECK(acc_sup > 0.9);  // separation 5 is an easy problem
}

TEST_CASE("on-the-fly prior counting trains and stays on the simplex") {
    GenConfig gen;
    gen.num_classes = 4;
    gen.dim = 6;
    gen.n_head = 80;
    gen.imbalance_ratio = 4.0;
    gen.phi = 0.3;
    gen.seed = 19;
    const PLLDataset ds = generate_dataset(gen);

    RunConfig run = tiny_run_config(9);
    run.prior.on_the_fly = true;
    const TrainResult result = train(ds, run);
    CHECK_NOTHROW(result.prior.validate());
    REQUIRE(!result.history.empty());
    CHECK(result.history.back().reliable_per_class.size() == 4);

    const TrainResult again = train(ds, run);
    CHECK(again.prior.probs == result.prior.probs);
}

TEST_CASE("the hidden-layer architecture trains end to end") {
    GenConfig gen;
    gen.num_classes = 3;
    gen.dim = 4;
    gen.n_head = 80;
    gen.imbalance_ratio = 2.0;
    gen.phi = 0.3;
    gen.separation = 4.0;
    gen.seed = 29;
    const PLLDataset ds = generate_dataset(gen);
    const PLLDataset test = generate_test_set(gen, 50, 4321);

    RunConfig run = tiny_run_config(71);
    run.train.architecture = Architecture::kOneHiddenLayer;
    run.train.hidden_width = 16;
    run.train.epochs = 20;
    run.train.learning_rate = 0.1;
    const TrainResult result = train(ds, run, &test);
    CHECK(result.model.config().architecture == Architecture::kOneHiddenLayer);
    CHECK(result.history.back().test_accuracy->overall > 0.6);

    const TrainResult again = train(ds, run, &test);
    CHECK(again.model.params() == result.model.params());
}

TEST_CASE("run config validation") {
    RunConfig run;
    CHECK_THROWS_WITH_AS(run.validate(), "seed is mandatory", ConfigError);
    run.seed_set = true;
    CHECK_NOTHROW(run.validate());
    run.train.momentum = 1.5;
    CHECK_THROWS_AS(run.validate(), ConfigError);
}

TEST_CASE("pre-estimation requires at least one epoch") {
    GenConfig gen;
    gen.num_classes = 3;
    gen.dim = 4;
    gen.n_head = 30;
    gen.seed = 3;
    const PLLDataset ds = generate_dataset(gen);
    RunConfig run = tiny_run_config(5);
    CHECK_THROWS_AS(run_pre_estimation(ds, run, 0), ConfigError);
    const ClassPrior prior = run_pre_estimation(ds, run, 1);
    CHECK_NOTHROW(prior.validate());
}

TEST_CASE("pre-estimation beats the uniform initialization on tilted data") {
    GenConfig gen;
    gen.num_classes = 5;
    gen.dim = 8;
    gen.n_head = 300;
    gen.imbalance_ratio = 10.0;
    gen.phi = 0.3;
    gen.separation = 3.0;
    gen.seed = 23;
    const PLLDataset ds = generate_dataset(gen);

    RunConfig run = tiny_run_config(61);
    run.train.batch_size = 128;
    const ClassPrior estimated = run_pre_estimation(ds, run, 15);

    const ClassPrior truth = empirical_label_distribution(ds);
    const double tv_estimated = prior_tv_distance(estimated, truth);
    const double tv_uniform = prior_tv_distance(ClassPrior::uniform(5), truth);
    CHECK(tv_estimated < tv_uniform);
}
