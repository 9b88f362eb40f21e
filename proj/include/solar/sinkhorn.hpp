#pragma once

#include <cstdint>
#include <vector>

#include "solar/types.hpp"

namespace solar {

struct SinkhornConfig {
    double lambda = 3.0;        // cost smoothing exponent on p_ij
    int max_iters = 50;
    double tol = 1e-4;          // inf-norm tolerance on both marginals
    double relax_epsilon = 1e-5;  // value placed on zero entries when relaxing
    int divergence_guard = 10;  // non-decreasing violation streak before declaring divergence
    double prob_floor = 1e-12;  // clamp on p before exponentiation

    void validate() const;
};

enum class SolveStatus { kConverged, kDiverged };

struct SinkhornSolution {
    std::vector<double> alpha;  // length m; Q = diag(alpha) M diag(beta)
    std::vector<double> beta;   // length L
    SolveStatus status = SolveStatus::kDiverged;
    int iterations = 0;
    double row_marginal_error = 0.0;  // inf-norm of |Q 1 - c|
    double col_marginal_error = 0.0;  // inf-norm of |Q^T 1 - r|
};

struct RefineryResult {
    PseudoLabelBatch pseudo_labels;
    double column_marginal_error = 0.0;
    double row_marginal_error = 0.0;
    int iterations_used = 0;
    bool relaxed = false;  // the epsilon fallback was triggered
};

// M with m_ij = clamp(p_ij)^lambda inside candidate sets, exactly 0 outside.
Matrix build_scaled_mask(const PredictionBatch& predictions,
                         const std::vector<CandidateMask>& masks, double lambda,
                         double prob_floor = 1e-12);

// Alternating scaling iteration: beta starts at all-ones, then
// alpha <- c ./ (M beta), beta <- r ./ (M^T alpha) each round. Converged
// means both marginal violations of diag(alpha) M diag(beta) fell below
// cfg.tol; anything else (guard-detected stall, non-finite scalings, or an
// exhausted iteration cap above tol) reports diverged so the caller can take
// the relaxation path. Throws DataError when some row of M is entirely zero.
SinkhornSolution sinkhorn_solve(const Matrix& scaled_mask, const ClassPrior& prior,
                                const std::vector<double>& row_marginals,
                                const SinkhornConfig& cfg);

// Full refinement with uniform row marginals: build M, solve, and on
// divergence re-solve with relax_epsilon on the zero entries, zero the
// non-candidate entries back out, and renormalize rows. Pseudo-label rows
// always sum to 1 and are exactly 0 off-candidate.
RefineryResult refine_labels(const PredictionBatch& predictions,
                             const std::vector<CandidateMask>& masks, const ClassPrior& prior,
                             const SinkhornConfig& cfg);

// FIFO buffer of past prediction rows used to widen the marginal constraints
// beyond a single mini-batch. Single-writer: owned by one training loop.
class PredictionQueue {
public:
    PredictionQueue(std::size_t capacity, std::size_t num_classes);

    std::size_t size() const { return count_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t num_classes() const { return num_classes_; }

    void push(const double* probs_row, const CandidateMask& mask);
    void clear();

    // Oldest-first copy of the stored rows.
    void snapshot(Matrix& probs_out, std::vector<CandidateMask>& masks_out) const;

private:
    std::size_t capacity_ = 0;
    std::size_t num_classes_ = 0;
    std::size_t head_ = 0;   // index of the oldest entry
    std::size_t count_ = 0;
    std::vector<double> probs_;             // capacity x L ring storage
    std::vector<CandidateMask> masks_;
};

// Joint solve over queue rows + the current batch; returns pseudo-labels for
// the batch rows only, then pushes the batch predictions into the queue.
RefineryResult refine_with_queue(const PredictionBatch& batch,
                                 const std::vector<CandidateMask>& batch_masks,
                                 PredictionQueue& queue, const ClassPrior& prior,
                                 const SinkhornConfig& cfg);

}  // namespace solar
