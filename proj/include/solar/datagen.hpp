#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "solar/types.hpp"

namespace solar {

enum class FlipMode { kUniform, kMatrix };

struct GenConfig {
    int num_classes = 10;         // L
    int dim = 16;                 // d
    int n_head = 1000;            // n_1
    double imbalance_ratio = 1.0; // gamma = n_1 / n_L
    double separation = 4.0;      // center distance in blob-std units
    FlipMode flip_mode = FlipMode::kUniform;
    double phi = 0.3;             // uniform flipping probability
    Matrix flip_matrix;           // used when flip_mode == kMatrix
    std::uint64_t seed = 1;

    void validate() const;
};

// n_j = round(n_1 * gamma^(-(j-1)/(L-1))): geometric size profile hitting
// the requested head/tail ratio up to rounding.
std::vector<int> class_sizes(int num_classes, int n_head, double gamma);

// Deterministic center placement: scaled orthogonal axes, pairwise distance
// exactly `separation` blob standard deviations. Requires dim >= num_classes.
Matrix class_centers(int num_classes, int dim, double separation);

// Isotropic unit-variance Gaussian blobs around the centers; rows grouped by
// class, labels returned alongside.
std::pair<Matrix, std::vector<int>> gen_features(const std::vector<int>& sizes, int dim,
                                                 double separation, std::uint64_t seed);

// True label always included; every other label independently with
// probability phi.
std::vector<CandidateMask> flip_candidates_uniform(const std::vector<int>& true_labels,
                                                   int num_classes, double phi,
                                                   std::uint64_t seed);

// Label j enters the candidate set of a class-y sample with probability
// flip_matrix(y, j); the diagonal must be 1.
std::vector<CandidateMask> flip_candidates_matrix(const std::vector<int>& true_labels,
                                                  const Matrix& flip_matrix, std::uint64_t seed);

// Wrap-around band next to the diagonal: 0.5, 0.4, 0.3, 0.2, 0.1.
Matrix banded_flip_matrix(int num_classes);

PLLDataset generate_dataset(const GenConfig& cfg);

// Balanced labeled set from the same blob centers, with singleton candidate
// masks; meant for evaluation.
PLLDataset generate_test_set(const GenConfig& cfg, int per_class, std::uint64_t seed);

}  // namespace solar
