#include "solar/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace solar {

namespace {

// y = M x
void matvec(const Matrix& m, const std::vector<double>& x, std::vector<double>& y) {
    y.assign(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

// y = M^T x
void matvec_t(const Matrix& m, const std::vector<double>& x, std::vector<double>& y) {
    y.assign(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < m.cols(); ++j) y[j] += row[j] * xi;
    }
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

struct CoreResult {
    PseudoLabelBatch pseudo_labels;  // all solved rows, renormalized
    double column_marginal_error = 0.0;
    double row_marginal_error = 0.0;
    int iterations_used = 0;
    bool relaxed = false;
};

// Shared path behind refine_labels / refine_with_queue: solves every row of
// `predictions` against a uniform row marginal.
CoreResult refine_core(const Matrix& probs, const std::vector<CandidateMask>& masks,
                       const ClassPrior& prior, const SinkhornConfig& cfg) {
    const std::size_t m = probs.rows();
    const std::size_t num_classes = probs.cols();
    if (masks.size() != m) throw DataError("mask count does not match prediction rows");
    const std::vector<double> c(m, 1.0 / static_cast<double>(m));

    PredictionBatch view{probs};
    Matrix scaled = build_scaled_mask(view, masks, cfg.lambda, cfg.prob_floor);

    SinkhornSolution sol = sinkhorn_solve(scaled, prior, c, cfg);
    bool relaxed = false;
    if (sol.status == SolveStatus::kDiverged) {
        // Relaxation: treat every zero entry as a candidate with a very
        // large cost, re-solve, then map the mass back into the candidate
        // sets. The relaxed solution is kept even when it stops above the
        // tolerance; only non-finite scalings are unrecoverable.
        for (double& v : scaled.data()) {
            if (v == 0.0) v = cfg.relax_epsilon;
        }
        sol = sinkhorn_solve(scaled, prior, c, cfg);
        relaxed = true;
        if (!all_finite(sol.alpha) || !all_finite(sol.beta)) {
            throw DivergenceError("infeasible prior");
        }
    }

    Matrix q(m, num_classes);
    const double scale = static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* srow = scaled.row(i);
        double* qrow = q.row(i);
        double row_sum = 0.0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            double v = (relaxed && !masks[i].contains(j))
                           ? 0.0
                           : scale * sol.alpha[i] * srow[j] * sol.beta[j];
            qrow[j] = v;
            row_sum += v;
        }
        if (!(row_sum > 0.0) || !std::isfinite(row_sum)) {
            throw DivergenceError("infeasible prior");
        }
        for (std::size_t j = 0; j < num_classes; ++j) qrow[j] /= row_sum;
    }

    CoreResult out;
    out.pseudo_labels = PseudoLabelBatch{std::move(q)};
    out.column_marginal_error = sol.col_marginal_error;
    out.row_marginal_error = sol.row_marginal_error;
    out.iterations_used = sol.iterations;
    out.relaxed = relaxed;
    return out;
}

}  // namespace

void SinkhornConfig::validate() const {
    if (!(lambda > 0.0)) throw ConfigError("sinkhorn lambda must be > 0");
    if (max_iters < 1) throw ConfigError("sinkhorn max_iters must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("sinkhorn tol must be > 0");
    if (!(relax_epsilon > 0.0)) throw ConfigError("sinkhorn relax_epsilon must be > 0");
    if (divergence_guard < 1) throw ConfigError("sinkhorn divergence_guard must be >= 1");
    if (!(prob_floor > 0.0)) throw ConfigError("sinkhorn prob_floor must be > 0");
}

Matrix build_scaled_mask(const PredictionBatch& predictions,
                         const std::vector<CandidateMask>& masks, double lambda,
                         double prob_floor) {
    const Matrix& p = predictions.probs;
    if (masks.size() != p.rows()) throw DataError("mask count does not match prediction rows");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
    Matrix scaled(p.rows(), p.cols());
    // Integer exponents cover the default lambda = 3 without pow() in the
    // training hot loop.
    const int int_lambda = static_cast<int>(lambda);
    const bool integral = lambda == static_cast<double>(int_lambda) && int_lambda <= 8;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        if (masks[i].size() != p.cols()) throw DataError("mask length does not match class count");
        const double* prow = p.row(i);
        double* srow = scaled.row(i);
        for (std::size_t j = 0; j < p.cols(); ++j) {
            if (!masks[i].contains(j)) {
                srow[j] = 0.0;
                continue;
            }
            const double base = std::max(prow[j], prob_floor);
            if (integral) {
                double acc = 1.0;
                for (int k = 0; k < int_lambda; ++k) acc *= base;
                srow[j] = acc;
            } else {
                srow[j] = std::pow(base, lambda);
            }
        }
    }
    return scaled;
}

SinkhornSolution sinkhorn_solve(const Matrix& scaled_mask, const ClassPrior& prior,
                                const std::vector<double>& row_marginals,
                                const SinkhornConfig& cfg) {
    cfg.validate();
    prior.validate();
    const std::size_t m = scaled_mask.rows();
    const std::size_t num_classes = scaled_mask.cols();
    if (prior.size() != num_classes) throw DataError("prior length does not match class count");
    if (row_marginals.size() != m) throw DataError("row marginal length does not match row count");
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = scaled_mask.row(i);
        bool any = false;
        for (std::size_t j = 0; j < num_classes; ++j) {
            if (row[j] < 0.0) throw DataError("scaled mask has a negative entry");
            any = any || row[j] > 0.0;
        }
        if (!any) throw DataError("zero candidate mass at row " + std::to_string(i));
    }

    SinkhornSolution sol;
    sol.alpha.assign(m, 1.0);
    sol.beta.assign(num_classes, 1.0);

    std::vector<double> m_beta;   // M beta
    std::vector<double> mt_alpha; // M^T alpha
    matvec(scaled_mask, sol.beta, m_beta);

    double prev_violation = std::numeric_limits<double>::infinity();
    int stall_streak = 0;

    for (int t = 1; t <= cfg.max_iters; ++t) {
        for (std::size_t i = 0; i < m; ++i) sol.alpha[i] = row_marginals[i] / m_beta[i];
        matvec_t(scaled_mask, sol.alpha, mt_alpha);
        for (std::size_t j = 0; j < num_classes; ++j) sol.beta[j] = prior.probs[j] / mt_alpha[j];
        matvec(scaled_mask, sol.beta, m_beta);

        sol.iterations = t;
        double row_err = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            row_err = std::max(row_err, std::abs(sol.alpha[i] * m_beta[i] - row_marginals[i]));
        }
        double col_err = 0.0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            col_err = std::max(col_err, std::abs(sol.beta[j] * mt_alpha[j] - prior.probs[j]));
        }
        sol.row_marginal_error = row_err;
        sol.col_marginal_error = col_err;
        const double violation = std::max(row_err, col_err);

        if (!std::isfinite(violation) || !all_finite(sol.alpha) || !all_finite(sol.beta)) {
            sol.status = SolveStatus::kDiverged;
            return sol;
        }
        if (violation <= cfg.tol) {
            sol.status = SolveStatus::kConverged;
            return sol;
        }
        if (violation >= prev_violation) {
            if (++stall_streak >= cfg.divergence_guard) {
                sol.status = SolveStatus::kDiverged;
                return sol;
            }
        } else {
            stall_streak = 0;
        }
        prev_violation = violation;
    }

    // Iteration cap reached above tolerance: report diverged so the caller
    // relaxes rather than trusting marginals the solve never certified.
    sol.status = SolveStatus::kDiverged;
    return sol;
}

RefineryResult refine_labels(const PredictionBatch& predictions,
                             const std::vector<CandidateMask>& masks, const ClassPrior& prior,
                             const SinkhornConfig& cfg) {
    CoreResult core = refine_core(predictions.probs, masks, prior, cfg);
    RefineryResult out;
    out.pseudo_labels = std::move(core.pseudo_labels);
    out.column_marginal_error = core.column_marginal_error;
    out.row_marginal_error = core.row_marginal_error;
    out.iterations_used = core.iterations_used;
    out.relaxed = core.relaxed;
    return out;
}

PredictionQueue::PredictionQueue(std::size_t capacity, std::size_t num_classes)
    : capacity_(capacity),
      num_classes_(num_classes),
      probs_(capacity * num_classes, 0.0),
      masks_(capacity, CandidateMask(num_classes)) {}

void PredictionQueue::push(const double* probs_row, const CandidateMask& mask) {
    if (capacity_ == 0) return;
    const std::size_t slot = (head_ + count_) % capacity_;
    std::copy(probs_row, probs_row + num_classes_, probs_.begin() + slot * num_classes_);
    masks_[slot] = mask;
    if (count_ < capacity_) {
        ++count_;
    } else {
        head_ = (head_ + 1) % capacity_;
    }
}

void PredictionQueue::clear() {
    head_ = 0;
    count_ = 0;
}

void PredictionQueue::snapshot(Matrix& probs_out, std::vector<CandidateMask>& masks_out) const {
    probs_out = Matrix(count_, num_classes_);
    masks_out.resize(count_);
    for (std::size_t k = 0; k < count_; ++k) {
        const std::size_t slot = (head_ + k) % capacity_;
        std::copy(probs_.begin() + slot * num_classes_, probs_.begin() + (slot + 1) * num_classes_,
                  probs_out.row(k));
        masks_out[k] = masks_[slot];
    }
}

RefineryResult refine_with_queue(const PredictionBatch& batch,
                                 const std::vector<CandidateMask>& batch_masks,
                                 PredictionQueue& queue, const ClassPrior& prior,
                                 const SinkhornConfig& cfg) {
    const std::size_t m = batch.size();
    const std::size_t num_classes = batch.num_classes();
    if (queue.num_classes() != num_classes) throw DataError("queue class count mismatch");

    Matrix joint;
    std::vector<CandidateMask> joint_masks;
    queue.snapshot(joint, joint_masks);
    const std::size_t offset = joint.rows();

    Matrix stacked(offset + m, num_classes);
    std::copy(joint.data().begin(), joint.data().end(), stacked.data().begin());
    std::copy(batch.probs.data().begin(), batch.probs.data().end(),
              stacked.data().begin() + offset * num_classes);
    joint_masks.insert(joint_masks.end(), batch_masks.begin(), batch_masks.end());

    CoreResult core = refine_core(stacked, joint_masks, prior, cfg);

    Matrix q(m, num_classes);
    std::copy(core.pseudo_labels.targets.data().begin() + offset * num_classes,
              core.pseudo_labels.targets.data().end(), q.data().begin());

    for (std::size_t i = 0; i < m; ++i) queue.push(batch.probs.row(i), batch_masks[i]);

    RefineryResult out;
    out.pseudo_labels = PseudoLabelBatch{std::move(q)};
    out.column_marginal_error = core.column_marginal_error;
    out.row_marginal_error = core.row_marginal_error;
    out.iterations_used = core.iterations_used;
    out.relaxed = core.relaxed;
    return out;
}

}  // namespace solar
