#include "solar/prior.hpp"

namespace solar {

namespace {

// Argmax of the row restricted to the candidate set, lowest index on ties.
std::size_t candidate_argmax(const double* row, const CandidateMask& mask) {
    std::size_t best = mask.size();
    double best_value = 0.0;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (!mask.contains(j)) continue;
        if (best == mask.size() || row[j] > best_value) {
            best = j;
            best_value = row[j];
        }
    }
    if (best == mask.size()) throw DataError("empty candidate set");
    return best;
}

}  // namespace

void PriorConfig::validate() const {
    if (mu_pre < 0.0 || mu_pre > 1.0) throw ConfigError("mu_pre must be in [0, 1]");
    if (mu_main < 0.0 || mu_main > 1.0) throw ConfigError("mu_main must be in [0, 1]");
    if (pre_estimate_epochs < 0) throw ConfigError("pre_estimate_epochs must be >= 0");
}

ClassPrior empirical_prior(const PredictionBatch& predictions,
                           const std::vector<CandidateMask>& masks) {
    const std::size_t n = predictions.size();
    const std::size_t num_classes = predictions.num_classes();
    if (masks.size() != n) throw DataError("mask count does not match prediction rows");
    std::vector<double> z(num_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (masks[i].size() != num_classes) throw DataError("mask length does not match class count");
        z[candidate_argmax(predictions.probs.row(i), masks[i])] += 1.0;
    }
    for (double& v : z) v /= static_cast<double>(n);
    return ClassPrior{std::move(z)};
}

ClassPrior update_prior(const ClassPrior& prior, const ClassPrior& estimate, double mu) {
    prior.validate();
    estimate.validate();
    if (prior.size() != estimate.size()) throw DataError("prior length mismatch");
    if (mu < 0.0 || mu > 1.0) throw ConfigError("mu must be in [0, 1]");
    std::vector<double> out(prior.size());
    for (std::size_t j = 0; j < prior.size(); ++j) {
        out[j] = mu * prior.probs[j] + (1.0 - mu) * estimate.probs[j];
    }
    return ClassPrior{std::move(out)};
}

ClassPrior init_prior(PriorInit mode, const PLLDataset& ds) {
    const auto num_classes = static_cast<std::size_t>(ds.num_classes);
    if (mode == PriorInit::kUniform) return ClassPrior::uniform(num_classes);
    std::vector<double> counts(num_classes, 0.0);
    double total = 0.0;
    for (const auto& mask : ds.candidates) {
        for (std::size_t j = 0; j < num_classes; ++j) {
            if (mask.contains(j)) {
                counts[j] += 1.0;
                total += 1.0;
            }
        }
    }
    for (double& v : counts) v /= total;
    return ClassPrior{std::move(counts)};
}

void PriorCounter::accumulate(const PredictionBatch& predictions,
                              const std::vector<CandidateMask>& masks) {
    if (masks.size() != predictions.size()) throw DataError("mask count does not match prediction rows");
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        counts_[candidate_argmax(predictions.probs.row(i), masks[i])] += 1;
        ++total_;
    }
}

ClassPrior PriorCounter::finish() const {
    if (total_ == 0) throw DataError("no samples accumulated");
    std::vector<double> z(counts_.size());
    for (std::size_t j = 0; j < counts_.size(); ++j) {
        z[j] = static_cast<double>(counts_[j]) / static_cast<double>(total_);
    }
    return ClassPrior{std::move(z)};
}

void PriorCounter::reset() {
    counts_.assign(counts_.size(), 0);
    total_ = 0;
}

}  // namespace solar
