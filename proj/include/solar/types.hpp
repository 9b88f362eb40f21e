#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "solar/matrix.hpp"

namespace solar {

class Error : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad file contents or violated data invariants.
class DataError : public Error {
    using Error::Error;
};

// Invalid configuration or argument combination.
class ConfigError : public Error {
    using Error::Error;
};

class IoError : public Error {
    using Error::Error;
};

// Numerical divergence that survived every recovery path.
class DivergenceError : public Error {
    using Error::Error;
};

// Per-sample candidate label set, stored as a dense boolean vector of
// length L. Dense storage keeps membership O(1) inside the solver loops.
class CandidateMask {
public:
    CandidateMask() = default;
    explicit CandidateMask(std::size_t num_classes) : bits_(num_classes, 0) {}

    static CandidateMask from_indices(std::size_t num_classes, const std::vector<int>& indices);
    static CandidateMask singleton(std::size_t num_classes, int label);
    static CandidateMask full(std::size_t num_classes);

    bool contains(std::size_t j) const { return bits_[j] != 0; }
    void set(std::size_t j) { bits_[j] = 1; }

    std::size_t size() const { return bits_.size(); }
    std::size_t count() const;
    std::vector<int> indices() const;

    // Candidate sets are never empty: the true label is always a member.
    void validate() const;

    bool operator==(const CandidateMask&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

// Training dataset: features, candidate sets, and evaluation-only truth.
// True labels are deliberately kept in a field that only evaluation code
// reads; training paths receive features and masks.
struct PLLDataset {
    Matrix features;                                // n x d
    std::vector<CandidateMask> candidates;          // n masks of length L
    std::optional<std::vector<int>> true_labels;    // evaluation only
    int num_classes = 0;
    std::optional<std::vector<int>> class_counts;   // n_j, non-increasing

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }

    void validate() const;
};

// Length-L probability vector over classes.
struct ClassPrior {
    std::vector<double> probs;

    static ClassPrior uniform(std::size_t num_classes);

    std::size_t size() const { return probs.size(); }
    void validate() const;

    bool operator==(const ClassPrior&) const = default;
};

// Row-stochastic classifier outputs over a batch (optionally batch + queue
// rows).
struct PredictionBatch {
    Matrix probs;  // m x L

    std::size_t size() const { return probs.rows(); }
    std::size_t num_classes() const { return probs.cols(); }

    void validate() const;
};

// Refined row-stochastic targets, zero outside candidate sets.
struct PseudoLabelBatch {
    Matrix targets;  // m x L

    std::size_t size() const { return targets.rows(); }
    std::size_t num_classes() const { return targets.cols(); }

    void validate(const std::vector<CandidateMask>& masks) const;
};

}  // namespace solar
