#pragma once

#include <cstdint>
#include <vector>

#include "solar/types.hpp"

namespace solar {

enum class SelectionMode {
    kClasswise,  // per-slice small-loss quota plus high confidence
    kGlobal,     // batch-wide small-loss quota plus high confidence
    kNone,       // everything treated as reliable
};

struct SelectionConfig {
    double rho_start = 0.2;
    double rho_end = 0.5;
    int rho_ramp_epochs = 50;
    double tau = 0.99;
    SelectionMode mode = SelectionMode::kClasswise;

    void validate() const;
};

struct SelectionResult {
    std::vector<std::uint8_t> reliable;         // union of both rules
    std::vector<std::uint8_t> small_loss;       // rule (i)
    std::vector<std::uint8_t> high_confidence;  // rule (ii)
    std::vector<int> per_class_counts;          // reliable samples per argmax slice
    std::vector<int> per_class_totals;          // slice sizes |B_j|

    std::size_t reliable_count() const;
};

// Linear ramp: rho_start at epoch 0, rho_end at rho_ramp_epochs, constant after.
double resolve_rho(const SelectionConfig& cfg, int epoch);

// Slices B_j indexed by the argmax of the refined pseudo-labels restricted
// to the candidate set; disjoint cover of the batch, ties to lowest index.
std::vector<std::vector<int>> partition_by_argmax(const PseudoLabelBatch& pseudo_labels,
                                                  const std::vector<CandidateMask>& masks);

// l_i = -sum_j q_ij log(p_ij), with p clamped at the floor before the log.
std::vector<double> instance_losses(const PseudoLabelBatch& pseudo_labels,
                                    const PredictionBatch& predictions,
                                    double prob_floor = 1e-12);

// Smallest-loss k = min(ceil(r_j rho |B|), |B_j|) members of the slice;
// loss ties broken by sample index.
std::vector<int> select_small_loss(const std::vector<int>& slice,
                                   const std::vector<double>& losses, double prior_j,
                                   double rho, std::size_t batch_size);

// Rule (ii): q_i . p_i > tau, strictly.
std::vector<std::uint8_t> select_high_confidence(const PseudoLabelBatch& pseudo_labels,
                                                 const PredictionBatch& predictions, double tau);

SelectionResult select_reliable(const PseudoLabelBatch& pseudo_labels,
                                const PredictionBatch& predictions,
                                const std::vector<CandidateMask>& masks, const ClassPrior& prior,
                                const SelectionConfig& cfg, int epoch);

}  // namespace solar
