#include "solar/selection.hpp"

#include <algorithm>
#include <cmath>

namespace solar {

void SelectionConfig::validate() const {
    if (rho_start < 0.0 || rho_start > 1.0) throw ConfigError("rho_start must be in [0, 1]");
    if (rho_end < 0.0 || rho_end > 1.0) throw ConfigError("rho_end must be in [0, 1]");
    if (rho_ramp_epochs < 0) throw ConfigError("rho_ramp_epochs must be >= 0");
    if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must be in [0, 1]");
}

std::size_t SelectionResult::reliable_count() const {
    std::size_t c = 0;
    for (auto b : reliable) c += b;
    return c;
}

double resolve_rho(const SelectionConfig& cfg, int epoch) {
    if (cfg.rho_ramp_epochs == 0 || epoch >= cfg.rho_ramp_epochs) return cfg.rho_end;
    if (epoch <= 0) return cfg.rho_start;
    const double t = static_cast<double>(epoch) / static_cast<double>(cfg.rho_ramp_epochs);
    return cfg.rho_start + t * (cfg.rho_end - cfg.rho_start);
}

std::vector<std::vector<int>> partition_by_argmax(const PseudoLabelBatch& pseudo_labels,
                                                  const std::vector<CandidateMask>& masks) {
    const Matrix& q = pseudo_labels.targets;
    if (masks.size() != q.rows()) throw DataError("mask count does not match pseudo-label rows");
    std::vector<std::vector<int>> slices(q.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const double* row = q.row(i);
        std::size_t best = q.cols();
        double best_value = 0.0;
        for (std::size_t j = 0; j < q.cols(); ++j) {
            if (!masks[i].contains(j)) continue;
            if (best == q.cols() || row[j] > best_value) {
                best = j;
                best_value = row[j];
            }
        }
        if (best == q.cols()) throw DataError("empty candidate set at row " + std::to_string(i));
        slices[best].push_back(static_cast<int>(i));
    }
    return slices;
}

std::vector<double> instance_losses(const PseudoLabelBatch& pseudo_labels,
                                    const PredictionBatch& predictions, double prob_floor) {
    const Matrix& q = pseudo_labels.targets;
    const Matrix& p = predictions.probs;
    if (q.rows() != p.rows() || q.cols() != p.cols()) throw DataError("pseudo-label / prediction shape mismatch");
    std::vector<double> losses(q.rows(), 0.0);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const double* qrow = q.row(i);
        const double* prow = p.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < q.cols(); ++j) {
            if (qrow[j] != 0.0) acc -= qrow[j] * std::log(std::max(prow[j], prob_floor));
        }
        losses[i] = acc;
    }
    return losses;
}

std::vector<int> select_small_loss(const std::vector<int>& slice, const std::vector<double>& losses,
                                   double prior_j, double rho, std::size_t batch_size) {
    if (slice.empty()) return {};
    const double quota = prior_j * rho * static_cast<double>(batch_size);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(quota)), slice.size());
    if (k == 0) return {};
    std::vector<int> order = slice;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (losses[a] != losses[b]) return losses[a] < losses[b];
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::uint8_t> select_high_confidence(const PseudoLabelBatch& pseudo_labels,
                                                 const PredictionBatch& predictions, double tau) {
    const Matrix& q = pseudo_labels.targets;
    const Matrix& p = predictions.probs;
    if (q.rows() != p.rows() || q.cols() != p.cols()) throw DataError("pseudo-label / prediction shape mismatch");
    std::vector<std::uint8_t> out(q.rows(), 0);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const double* qrow = q.row(i);
        const double* prow = p.row(i);
        double score = 0.0;
        for (std::size_t j = 0; j < q.cols(); ++j) score += qrow[j] * prow[j];
        out[i] = score > tau ? 1 : 0;
    }
    return out;
}

SelectionResult select_reliable(const PseudoLabelBatch& pseudo_labels,
                                const PredictionBatch& predictions,
                                const std::vector<CandidateMask>& masks, const ClassPrior& prior,
                                const SelectionConfig& cfg, int epoch) {
    cfg.validate();
    const std::size_t m = pseudo_labels.size();
    const std::size_t num_classes = pseudo_labels.num_classes();
    if (prior.size() != num_classes) throw DataError("prior length does not match class count");

    SelectionResult result;
    result.reliable.assign(m, 0);
    result.small_loss.assign(m, 0);
    result.high_confidence.assign(m, 0);
    result.per_class_counts.assign(num_classes, 0);
    result.per_class_totals.assign(num_classes, 0);

    const auto slices = partition_by_argmax(pseudo_labels, masks);
    for (std::size_t j = 0; j < num_classes; ++j) {
        result.per_class_totals[j] = static_cast<int>(slices[j].size());
    }

    if (cfg.mode == SelectionMode::kNone) {
        result.reliable.assign(m, 1);
        result.small_loss.assign(m, 1);
        for (std::size_t j = 0; j < num_classes; ++j) {
            result.per_class_counts[j] = static_cast<int>(slices[j].size());
        }
        return result;
    }

    const double rho = resolve_rho(cfg, epoch);
    const auto losses = instance_losses(pseudo_labels, predictions);

    if (cfg.mode == SelectionMode::kGlobal) {
        std::vector<int> all(m);
        for (std::size_t i = 0; i < m; ++i) all[i] = static_cast<int>(i);
        for (int i : select_small_loss(all, losses, 1.0, rho, m)) result.small_loss[i] = 1;
    } else {
        for (std::size_t j = 0; j < num_classes; ++j) {
            for (int i : select_small_loss(slices[j], losses, prior.probs[j], rho, m)) {
                result.small_loss[i] = 1;
            }
        }
    }

    result.high_confidence = select_high_confidence(pseudo_labels, predictions, cfg.tau);
    for (std::size_t i = 0; i < m; ++i) {
        result.reliable[i] = (result.small_loss[i] || result.high_confidence[i]) ? 1 : 0;
    }
    for (std::size_t j = 0; j < num_classes; ++j) {
        int count = 0;
        for (int i : slices[j]) count += result.reliable[i];
        result.per_class_counts[j] = count;
    }
    return result;
}

}  // namespace solar
