#include "solar/datagen.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace solar {

void GenConfig::validate() const {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (n_head < 1) throw ConfigError("n_head must be >= 1");
    if (!(imbalance_ratio >= 1.0)) throw ConfigError("imbalance_ratio must be >= 1");
    if (separation < 0.0) throw ConfigError("separation must be >= 0");
    if (flip_mode == FlipMode::kUniform) {
        if (phi < 0.0 || phi >= 1.0) throw ConfigError("phi must be in [0, 1)");
    } else {
        if (flip_matrix.rows() != static_cast<std::size_t>(num_classes) ||
            flip_matrix.cols() != static_cast<std::size_t>(num_classes)) {
            throw ConfigError("flip matrix must be L x L");
        }
        for (std::size_t y = 0; y < flip_matrix.rows(); ++y) {
            for (std::size_t j = 0; j < flip_matrix.cols(); ++j) {
                const double p = flip_matrix(y, j);
                if (y == j) {
                    if (p != 1.0) throw ConfigError("flip matrix diagonal must be 1");
                } else if (p < 0.0 || p >= 1.0) {
                    throw ConfigError("flip matrix off-diagonal entries must be in [0, 1)");
                }
            }
        }
    }
}

std::vector<int> class_sizes(int num_classes, int n_head, double gamma) {
    if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
    if (!(gamma >= 1.0)) throw ConfigError("gamma must be >= 1");
    if (num_classes == 1) {
        if (gamma > 1.0) throw ConfigError("imbalance requires at least two classes");
        return {n_head};
    }
    std::vector<int> sizes(static_cast<std::size_t>(num_classes));
    for (int j = 0; j < num_classes; ++j) {
        const double exponent = -static_cast<double>(j) / static_cast<double>(num_classes - 1);
        const double value = n_head * std::pow(gamma, exponent);
        sizes[static_cast<std::size_t>(j)] = std::max(1, static_cast<int>(std::lround(value)));
    }
    return sizes;
}

Matrix class_centers(int num_classes, int dim, double separation) {
    if (dim < num_classes) {
        throw ConfigError("feature dimension too small to place " + std::to_string(num_classes) +
                          " separated centers");
    }
    // Distance between e_a and e_b scaled by s/sqrt(2) is exactly s.
    Matrix centers(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(dim), 0.0);
    const double scale = separation / std::sqrt(2.0);
    for (int c = 0; c < num_classes; ++c) {
        centers(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) = scale;
    }
    return centers;
}

std::pair<Matrix, std::vector<int>> gen_features(const std::vector<int>& sizes, int dim,
                                                 double separation, std::uint64_t seed) {
    const int num_classes = static_cast<int>(sizes.size());
    const Matrix centers = class_centers(num_classes, dim, separation);
    const std::size_t n = static_cast<std::size_t>(
        std::accumulate(sizes.begin(), sizes.end(), 0LL));
    Matrix features(n, static_cast<std::size_t>(dim));
    std::vector<int> labels(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t row = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (int k = 0; k < sizes[static_cast<std::size_t>(c)]; ++k, ++row) {
            double* x = features.row(row);
            const double* mu = centers.row(static_cast<std::size_t>(c));
            for (int a = 0; a < dim; ++a) x[a] = mu[a] + noise(rng);
            labels[row] = c;
        }
    }
    return {std::move(features), std::move(labels)};
}

std::vector<CandidateMask> flip_candidates_uniform(const std::vector<int>& true_labels,
                                                   int num_classes, double phi,
                                                   std::uint64_t seed) {
    if (phi < 0.0 || phi >= 1.0) throw ConfigError("phi must be in [0, 1)");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto L = static_cast<std::size_t>(num_classes);
    std::vector<CandidateMask> masks;
    masks.reserve(true_labels.size());
    for (int y : true_labels) {
        CandidateMask mask(L);
        mask.set(static_cast<std::size_t>(y));
        for (std::size_t j = 0; j < L; ++j) {
            if (static_cast<int>(j) == y) continue;
            if (unit(rng) < phi) mask.set(j);
        }
        masks.push_back(std::move(mask));
    }
    return masks;
}

std::vector<CandidateMask> flip_candidates_matrix(const std::vector<int>& true_labels,
                                                  const Matrix& flip_matrix, std::uint64_t seed) {
    const std::size_t L = flip_matrix.rows();
    if (flip_matrix.cols() != L) throw ConfigError("flip matrix must be square");
    for (std::size_t j = 0; j < L; ++j) {
        if (flip_matrix(j, j) != 1.0) throw ConfigError("flip matrix diagonal must be 1");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<CandidateMask> masks;
    masks.reserve(true_labels.size());
    for (int y : true_labels) {
        const double* row = flip_matrix.row(static_cast<std::size_t>(y));
        CandidateMask mask(L);
        mask.set(static_cast<std::size_t>(y));
        for (std::size_t j = 0; j < L; ++j) {
            if (static_cast<int>(j) == y) continue;
            if (unit(rng) < row[j]) mask.set(j);
        }
        masks.push_back(std::move(mask));
    }
    return masks;
}

Matrix banded_flip_matrix(int num_classes) {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    const auto L = static_cast<std::size_t>(num_classes);
    static constexpr double kBand[] = {0.5, 0.4, 0.3, 0.2, 0.1};
    Matrix flip(L, L, 0.0);
    for (std::size_t y = 0; y < L; ++y) {
        flip(y, y) = 1.0;
        for (std::size_t k = 0; k < 5 && k + 1 < L; ++k) {
            flip(y, (y + k + 1) % L) = kBand[k];
        }
    }
    return flip;
}

PLLDataset generate_dataset(const GenConfig& cfg) {
    cfg.validate();
    const auto sizes = class_sizes(cfg.num_classes, cfg.n_head, cfg.imbalance_ratio);
    auto [features, labels] = gen_features(sizes, cfg.dim, cfg.separation, cfg.seed);
    // Independent streams for features and masks keep the flips unchanged
    // when only the geometry settings move.
    const std::uint64_t flip_seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
    PLLDataset ds;
    ds.num_classes = cfg.num_classes;
    ds.candidates = cfg.flip_mode == FlipMode::kUniform
                        ? flip_candidates_uniform(labels, cfg.num_classes, cfg.phi, flip_seed)
                        : flip_candidates_matrix(labels, cfg.flip_matrix, flip_seed);
    ds.features = std::move(features);
    ds.true_labels = std::move(labels);
    ds.class_counts = sizes;
    ds.validate();
    return ds;
}

PLLDataset generate_test_set(const GenConfig& cfg, int per_class, std::uint64_t seed) {
    cfg.validate();
    if (per_class < 1) throw ConfigError("per_class must be >= 1");
    const std::vector<int> sizes(static_cast<std::size_t>(cfg.num_classes), per_class);
    auto [features, labels] = gen_features(sizes, cfg.dim, cfg.separation, seed);
    PLLDataset ds;
    ds.num_classes = cfg.num_classes;
    ds.features = std::move(features);
    ds.candidates.reserve(labels.size());
    for (int y : labels) {
        ds.candidates.push_back(CandidateMask::singleton(static_cast<std::size_t>(cfg.num_classes), y));
    }
    ds.true_labels = std::move(labels);
    ds.class_counts = sizes;
    ds.validate();
    return ds;
}

}  // namespace solar
