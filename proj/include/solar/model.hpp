#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "solar/types.hpp"

namespace solar {

enum class Architecture { kSoftmaxLinear, kOneHiddenLayer };

struct ModelConfig {
    Architecture architecture = Architecture::kSoftmaxLinear;
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::size_t hidden_width = 64;  // one-hidden-layer only

    void validate() const;
};

// Softmax classifier over feature vectors; either a linear map or one
// rectified hidden layer. Parameters live in a single flat vector so the
// optimizer and finite-difference checks can treat the model as a plain
// point in R^P.
class ClassifierModel {
public:
    ClassifierModel(const ModelConfig& cfg, std::uint64_t seed);
    ClassifierModel(const ModelConfig& cfg, std::vector<double> params);

    const ModelConfig& config() const { return cfg_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t num_params() const { return params_.size(); }

    Matrix logits(const Matrix& features) const;
    PredictionBatch forward(const Matrix& features) const;

    // Gradient of sum_i <dlogits_i, logits_i> with respect to the flat
    // parameter vector; dlogits carries whatever loss weights apply.
    std::vector<double> backward(const Matrix& features, const Matrix& dlogits) const;

private:
    ModelConfig cfg_;
    std::vector<double> params_;

    // flat layout offsets
    std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
    std::size_t layer1_out_ = 0;

    void init_layout();
    void init_weights(std::uint64_t seed);
    Matrix hidden_pre(const Matrix& features) const;
};

nlohmann::json model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(const nlohmann::json& j);

// Row-wise softmax with a positivity floor so downstream logs stay finite.
Matrix softmax_rows(const Matrix& logits, double prob_floor = 1e-12);

// ---- losses -----------------------------------------------------------

// Mean cross-entropy over the given rows, -sum_j t_ij log(p_ij).
double ce_mean(const Matrix& probs, const Matrix& targets, const std::vector<int>& rows,
               double prob_floor = 1e-12);

// dlogits += scale * (p - t) on the given rows (softmax + CE backward).
void add_ce_grad(const Matrix& probs, const Matrix& targets, const std::vector<int>& rows,
                 double scale, Matrix& dlogits);

// PRODEN-style targets: predictions renormalized over the candidate set,
// treated as constants by every gradient path.
Matrix renorm_targets(const Matrix& probs, const std::vector<CandidateMask>& masks,
                      double prob_floor = 1e-12);

// Mean CE against refined pseudo-labels over the whole batch.
double ce_loss(const PredictionBatch& predictions, const PseudoLabelBatch& pseudo_labels);

// Mean CE of the model's strong-view predictions against weak-view targets.
double consistency_loss(const ClassifierModel& model, const Matrix& strong_features,
                        const PseudoLabelBatch& pseudo_labels);

// Mean CE against the model's own candidate-renormalized predictions.
double renorm_pll_loss(const ClassifierModel& model, const Matrix& features,
                       const std::vector<CandidateMask>& masks);

// Mixup: convex feature/target interpolation. The plan carries one partner
// (drawn by random permutation) and one Beta(concentration, concentration)
// coefficient per row; apply_mixup forms sigma x_i + (1 - sigma) x_partner
// on features and targets alike.
struct MixupPlan {
    std::vector<std::size_t> partner;
    std::vector<double> sigma;
};

MixupPlan draw_mixup_plan(std::size_t rows, double concentration, std::mt19937_64& rng);
std::pair<Matrix, Matrix> apply_mixup(const Matrix& features, const Matrix& targets,
                                      const MixupPlan& plan);

// Fewer than two rows yields empty matrices (callers skip the term).
std::pair<Matrix, Matrix> mixup_pairs(const Matrix& features, const Matrix& targets,
                                      double concentration, std::mt19937_64& rng);

// eta (ce + cr + mix) + (1 - eta) rn.
double composite_loss(double ce, double cr, double mix, double rn, double eta);

// ---- optimizer --------------------------------------------------------

struct SgdState {
    std::vector<double> velocity;
};

// Classical momentum: v <- momentum v + g; w <- w - lr v.
// Throws DivergenceError on non-finite gradients.
void sgd_step(ClassifierModel& model, const std::vector<double>& grad, double lr, double momentum,
              SgdState& state);

}  // namespace solar
