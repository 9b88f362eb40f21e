#include "solar/eval.hpp"

#include <algorithm>
#include <cmath>

namespace solar {

ShotGroups ShotGroups::thirds(int num_classes) {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    const int k = num_classes / 3;
    ShotGroups g;
    for (int j = 0; j < k; ++j) g.many.push_back(j);
    for (int j = k; j < num_classes - k; ++j) g.medium.push_back(j);
    for (int j = num_classes - k; j < num_classes; ++j) g.few.push_back(j);
    return g;
}

void ShotGroups::validate(int num_classes) const {
    std::vector<int> seen(static_cast<std::size_t>(num_classes), 0);
    auto mark = [&](const std::vector<int>& group) {
        for (int j : group) {
            if (j < 0 || j >= num_classes) throw ConfigError("shot group index out of range");
            if (seen[static_cast<std::size_t>(j)]++) throw ConfigError("shot groups overlap");
        }
    };
    mark(many);
    mark(medium);
    mark(few);
    for (int s : seen) {
        if (!s) throw ConfigError("shot groups do not cover all classes");
    }
}

int logit_adjust_predict(const double* logits, std::size_t num_classes, const ClassPrior& prior,
                         double zeta) {
    if (prior.size() != num_classes) throw DataError("prior length does not match class count");
    int best = 0;
    double best_score = logits[0] - zeta * std::log(std::max(prior.probs[0], 1e-12));
    for (std::size_t j = 1; j < num_classes; ++j) {
        const double score = logits[j] - zeta * std::log(std::max(prior.probs[j], 1e-12));
        if (score > best_score) {
            best = static_cast<int>(j);
            best_score = score;
        }
    }
    return best;
}

std::vector<int> predict_labels(const ClassifierModel& model, const Matrix& features, double zeta,
                                const ClassPrior* prior) {
    const Matrix scores = model.logits(features);
    const std::size_t num_classes = scores.cols();
    if (zeta != 0.0 && prior == nullptr) throw ConfigError("logit adjustment requires a class prior");
    const ClassPrior flat = ClassPrior::uniform(num_classes);
    const ClassPrior& r = prior ? *prior : flat;
    std::vector<int> labels(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        labels[i] = logit_adjust_predict(scores.row(i), num_classes, r, zeta);
    }
    return labels;
}

GroupAccuracy evaluate(const ClassifierModel& model, const PLLDataset& test_set,
                       const ShotGroups& groups, double zeta, const ClassPrior* prior) {
    if (!test_set.true_labels) throw DataError("evaluation requires true labels");
    groups.validate(test_set.num_classes);
    const auto preds = predict_labels(model, test_set.features, zeta, prior);
    const auto& truth = *test_set.true_labels;

    std::vector<int> group_of(static_cast<std::size_t>(test_set.num_classes), 0);
    for (int j : groups.many) group_of[static_cast<std::size_t>(j)] = 0;
    for (int j : groups.medium) group_of[static_cast<std::size_t>(j)] = 1;
    for (int j : groups.few) group_of[static_cast<std::size_t>(j)] = 2;

    long long correct[3] = {0, 0, 0};
    long long total[3] = {0, 0, 0};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int g = group_of[static_cast<std::size_t>(truth[i])];
        ++total[g];
        if (preds[i] == truth[i]) ++correct[g];
    }

    GroupAccuracy acc;
    const long long all_total = total[0] + total[1] + total[2];
    const long long all_correct = correct[0] + correct[1] + correct[2];
    acc.overall = static_cast<double>(all_correct) / static_cast<double>(all_total);
    auto ratio = [&](int g) -> std::optional<double> {
        if (total[g] == 0) return std::nullopt;
        return static_cast<double>(correct[g]) / static_cast<double>(total[g]);
    };
    acc.many = ratio(0);
    acc.medium = ratio(1);
    acc.few = ratio(2);
    return acc;
}

double prior_tv_distance(const ClassPrior& a, const ClassPrior& b) {
    if (a.size() != b.size()) throw DataError("prior length mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) acc += std::abs(a.probs[j] - b.probs[j]);
    return 0.5 * acc;
}

ClassPrior empirical_label_distribution(const PLLDataset& ds) {
    const auto num_classes = static_cast<std::size_t>(ds.num_classes);
    std::vector<double> probs(num_classes, 0.0);
    if (ds.true_labels) {
        for (int y : *ds.true_labels) probs[static_cast<std::size_t>(y)] += 1.0;
        for (double& v : probs) v /= static_cast<double>(ds.true_labels->size());
    } else if (ds.class_counts) {
        double total = 0.0;
        for (int c : *ds.class_counts) total += c;
        for (std::size_t j = 0; j < num_classes; ++j) probs[j] = (*ds.class_counts)[j] / total;
    } else {
        throw DataError("dataset carries neither true labels nor class counts");
    }
    return ClassPrior{std::move(probs)};
}

}  // namespace solar
