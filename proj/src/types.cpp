#include "solar/types.hpp"

#include <cmath>

namespace solar {

namespace {

std::string row_msg(const std::string& what, std::size_t row) {
    return what + " at row " + std::to_string(row);
}

}  // namespace

CandidateMask CandidateMask::from_indices(std::size_t num_classes, const std::vector<int>& indices) {
    CandidateMask mask(num_classes);
    for (int j : indices) {
        if (j < 0 || static_cast<std::size_t>(j) >= num_classes) {
            throw DataError("candidate index " + std::to_string(j) + " outside [0, " +
                            std::to_string(num_classes) + ")");
        }
        mask.set(static_cast<std::size_t>(j));
    }
    return mask;
}

CandidateMask CandidateMask::singleton(std::size_t num_classes, int label) {
    return from_indices(num_classes, {label});
}

CandidateMask CandidateMask::full(std::size_t num_classes) {
    CandidateMask mask(num_classes);
    for (std::size_t j = 0; j < num_classes; ++j) mask.set(j);
    return mask;
}

std::size_t CandidateMask::count() const {
    std::size_t c = 0;
    for (auto b : bits_) c += b;
    return c;
}

std::vector<int> CandidateMask::indices() const {
    std::vector<int> out;
    out.reserve(count());
    for (std::size_t j = 0; j < bits_.size(); ++j) {
        if (bits_[j]) out.push_back(static_cast<int>(j));
    }
    return out;
}

void CandidateMask::validate() const {
    if (count() == 0) throw DataError("empty candidate set");
}

void PLLDataset::validate() const {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (n == 0) throw DataError("empty dataset");
    if (num_classes < 2) throw DataError("num_classes must be >= 2");
    if (d == 0) throw DataError("feature dimension must be >= 1");
    const auto L = static_cast<std::size_t>(num_classes);
    if (candidates.size() != n) {
        throw DataError("candidate mask count " + std::to_string(candidates.size()) +
                        " does not match sample count " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (candidates[i].size() != L) throw DataError(row_msg("mask length mismatch", i));
        if (candidates[i].count() == 0) throw DataError(row_msg("empty candidate set", i));
    }
    for (double v : features.data()) {
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
    if (true_labels) {
        if (true_labels->size() != n) throw DataError("true label count does not match sample count");
        for (std::size_t i = 0; i < n; ++i) {
            const int y = (*true_labels)[i];
            if (y < 0 || y >= num_classes) throw DataError(row_msg("true label out of range", i));
            if (!candidates[i].contains(static_cast<std::size_t>(y))) {
                throw DataError(row_msg("true label not in candidates", i));
            }
        }
    }
    if (class_counts) {
        if (class_counts->size() != L) throw DataError("class_counts length does not match num_classes");
        long long total = 0;
        for (std::size_t j = 0; j < L; ++j) {
            const int c = (*class_counts)[j];
            if (c < 0) throw DataError("negative class count");
            if (j > 0 && c > (*class_counts)[j - 1]) {
                throw DataError("class_counts must be non-increasing");
            }
            total += c;
        }
        if (total != static_cast<long long>(n)) throw DataError("class_counts do not sum to sample count");
    }
}

ClassPrior ClassPrior::uniform(std::size_t num_classes) {
    return ClassPrior{std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes))};
}

void ClassPrior::validate() const {
    if (probs.empty()) throw DataError("empty class prior");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw DataError("class prior has a negative or non-finite entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw DataError("class prior does not sum to 1 (sum = " + std::to_string(sum) + ")");
    }
}

void PredictionBatch::validate() const {
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            const double p = probs(i, j);
            if (!(p > 0.0) || p > 1.0) {
                throw DataError(row_msg("prediction entry outside (0, 1]", i));
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw DataError(row_msg("prediction row does not sum to 1", i));
    }
}

void PseudoLabelBatch::validate(const std::vector<CandidateMask>& masks) const {
    if (masks.size() != targets.rows()) throw DataError("mask count does not match pseudo-label rows");
    for (std::size_t i = 0; i < targets.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < targets.cols(); ++j) {
            const double q = targets(i, j);
            if (!(q >= 0.0)) throw DataError(row_msg("negative pseudo-label entry", i));
            if (!masks[i].contains(j) && q != 0.0) {
                throw DataError(row_msg("pseudo-label mass outside candidate set", i));
            }
            sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-4) throw DataError(row_msg("pseudo-label row does not sum to 1", i));
    }
}

}  // namespace solar
