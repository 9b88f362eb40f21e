#pragma once

#include <optional>
#include <vector>

#include "solar/model.hpp"
#include "solar/types.hpp"

namespace solar {

// Many/medium/few partition of the class indices. Classes follow the
// size-sorted convention (index 0 is the largest class).
struct ShotGroups {
    std::vector<int> many;
    std::vector<int> medium;
    std::vector<int> few;

    // floor(L/3) head classes, floor(L/3) tail classes, remainder medium.
    static ShotGroups thirds(int num_classes);

    void validate(int num_classes) const;  // disjoint, covering
};

struct GroupAccuracy {
    double overall = 0.0;
    std::optional<double> many;
    std::optional<double> medium;
    std::optional<double> few;
};

// argmax_j logits_j - zeta log(r_j), ties to the lowest index. zeta = 0 is
// the plain argmax.
int logit_adjust_predict(const double* logits, std::size_t num_classes, const ClassPrior& prior,
                         double zeta);

std::vector<int> predict_labels(const ClassifierModel& model, const Matrix& features,
                                double zeta = 0.0, const ClassPrior* prior = nullptr);

// Per-group accuracy on a labeled dataset; groups with no test samples are
// reported as absent rather than zero.
GroupAccuracy evaluate(const ClassifierModel& model, const PLLDataset& test_set,
                       const ShotGroups& groups, double zeta = 0.0,
                       const ClassPrior* prior = nullptr);

// 0.5 * sum_j |a_j - b_j|.
double prior_tv_distance(const ClassPrior& a, const ClassPrior& b);

// Empirical distribution of the hidden true labels (falls back to
// class_counts). Evaluation-side only.
ClassPrior empirical_label_distribution(const PLLDataset& ds);

}  // namespace solar
