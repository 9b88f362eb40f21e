#pragma once

#include <vector>

#include "solar/types.hpp"

namespace solar {

enum class PriorInit { kUniform, kCandidateCount };

struct PriorConfig {
    PriorInit init = PriorInit::kUniform;
    double mu_pre = 0.1;           // moving-average weight during pre-estimation
    double mu_main = 0.01;         // moving-average weight afterwards
    int pre_estimate_epochs = 20;  // 0 disables the pre-estimation stage
    bool on_the_fly = false;       // count batch argmaxes instead of a full end-of-epoch pass

    void validate() const;
};

// Moving-average estimator state owned by the training loop; mu is the
// weight on the previous estimate and switches between the stage values of
// PriorConfig.
struct PriorEstimatorState {
    ClassPrior prior;
    double mu = 0.01;
};

// z_j = (1/n) #{ i : j = argmax over candidates of p_ij }, ties to the
// lowest class index.
ClassPrior empirical_prior(const PredictionBatch& predictions,
                           const std::vector<CandidateMask>& masks);

// r <- mu r + (1 - mu) z.
ClassPrior update_prior(const ClassPrior& prior, const ClassPrior& estimate, double mu);

ClassPrior init_prior(PriorInit mode, const PLLDataset& ds);

// Batch-accumulation counterpart of empirical_prior for a single epoch pass.
class PriorCounter {
public:
    explicit PriorCounter(std::size_t num_classes) : counts_(num_classes, 0) {}

    void accumulate(const PredictionBatch& predictions, const std::vector<CandidateMask>& masks);
    ClassPrior finish() const;
    void reset();

private:
    std::vector<long long> counts_;
    long long total_ = 0;
};

}  // namespace solar
