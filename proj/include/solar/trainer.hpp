#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "solar/metrics.hpp"
#include "solar/model.hpp"
#include "solar/prior.hpp"
#include "solar/selection.hpp"
#include "solar/sinkhorn.hpp"
#include "solar/types.hpp"

namespace solar {

enum class TrainMode {
    kSolar,   // full pipeline
    kProden,  // renormalized loss only: refinery off, eta pinned to 0
};

struct TrainConfig {
    int epochs = 200;
    std::size_t batch_size = 256;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double eta_end = 0.9;
    int eta_ramp_epochs = 50;
    double mixup_concentration = 4.0;
    double noise_sigma_weak = 0.01;    // in units of per-feature std
    double noise_sigma_strong = 0.1;
    std::size_t queue_multiplier = 64;
    Architecture architecture = Architecture::kSoftmaxLinear;
    std::size_t hidden_width = 64;
    bool use_cr = true;
    bool use_mixup = true;
    bool ce_on_weak_view = true;  // false: the CE term sees clean features
    TrainMode mode = TrainMode::kSolar;

    void validate() const;
};

struct RunConfig {
    std::uint64_t seed = 0;
    bool seed_set = false;  // the seed is mandatory; parsers flag it
    TrainConfig train;
    SinkhornConfig sinkhorn;
    SelectionConfig selection;
    PriorConfig prior;

    void validate() const;
};

// lr(t) = 0.5 lr0 (1 + cos(pi t / T)).
double cosine_lr(double lr0, int epoch, int total_epochs);

// Linear ramp from 0 to eta_end over eta_ramp_epochs.
double resolve_eta(const TrainConfig& cfg, int epoch);

// Everything a gradient step needs, with every target snapshotted so the
// loss is a pure function of the parameters.
struct StepInputs {
    Matrix x_ce;      // view for the CE term
    Matrix x_weak;    // view for the renormalized term
    Matrix x_strong;  // view for the consistency term
    Matrix x_mix;     // empty when mixup is skipped
    Matrix pseudo_targets;  // refined Q, constant
    Matrix rn_targets;      // candidate-renormalized targets, constant
    Matrix q_mix;
    std::vector<int> reliable_rows;
    std::vector<int> unreliable_rows;
    double eta = 0.0;
    bool use_cr = true;
    bool use_mixup = true;
};

struct LossBreakdown {
    double ce = 0.0;
    double cr = 0.0;
    double mix = 0.0;
    double rn = 0.0;
    double total = 0.0;
};

LossBreakdown step_loss(const ClassifierModel& model, const StepInputs& inputs);
LossBreakdown step_loss_and_grad(const ClassifierModel& model, const StepInputs& inputs,
                                 std::vector<double>* grad);

struct TrainResult {
    ClassifierModel model;
    ClassPrior prior;
    std::vector<EpochMetrics> history;
};

// Algorithm: per step, refine the weak-view predictions through the
// queue-accelerated transport solve, select reliable samples class-wise,
// and descend the composite loss; per epoch, refresh the class prior by the
// moving-average rule. Runs the pre-estimation stage first when configured
// (skipped in kProden mode, which never consumes the prior). Deterministic
// for a fixed seed.
TrainResult train(const PLLDataset& ds, const RunConfig& run, const PLLDataset* eval_set = nullptr);

// The pre-estimation stage alone: trains a throwaway model for the given
// number of epochs and returns only the final prior.
ClassPrior run_pre_estimation(const PLLDataset& ds, const RunConfig& run, int epochs);

}  // namespace solar
