#include "solar/model.hpp"

#include <algorithm>
#include <cmath>

namespace solar {

using nlohmann::json;

void ModelConfig::validate() const {
    if (input_dim == 0) throw ConfigError("model input_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("model num_classes must be >= 2");
    if (architecture == Architecture::kOneHiddenLayer && hidden_width == 0) {
        throw ConfigError("hidden_width must be >= 1");
    }
}

ClassifierModel::ClassifierModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    init_layout();
    init_weights(seed);
}

ClassifierModel::ClassifierModel(const ModelConfig& cfg, std::vector<double> params) : cfg_(cfg) {
    cfg_.validate();
    init_layout();
    if (params.size() != params_.size()) throw DataError("parameter vector length mismatch");
    params_ = std::move(params);
}

void ClassifierModel::init_layout() {
    const std::size_t d = cfg_.input_dim;
    const std::size_t out = cfg_.num_classes;
    if (cfg_.architecture == Architecture::kSoftmaxLinear) {
        layer1_out_ = out;
        w1_ = 0;
        b1_ = d * out;
        params_.assign(d * out + out, 0.0);
        w2_ = b2_ = params_.size();
    } else {
        const std::size_t h = cfg_.hidden_width;
        layer1_out_ = h;
        w1_ = 0;
        b1_ = d * h;
        w2_ = b1_ + h;
        b2_ = w2_ + h * out;
        params_.assign(b2_ + out, 0.0);
    }
}

void ClassifierModel::init_weights(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t d = cfg_.input_dim;
    auto fill_uniform = [&rng](double* begin, std::size_t count, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t k = 0; k < count; ++k) begin[k] = dist(rng);
    };
    // Symmetric uniform scaled by the layer's input width; biases start at 0.
    fill_uniform(params_.data() + w1_, d * layer1_out_, 1.0 / std::sqrt(static_cast<double>(d)));
    if (cfg_.architecture == Architecture::kOneHiddenLayer) {
        const std::size_t h = cfg_.hidden_width;
        fill_uniform(params_.data() + w2_, h * cfg_.num_classes,
                     1.0 / std::sqrt(static_cast<double>(h)));
    }
}

Matrix ClassifierModel::hidden_pre(const Matrix& features) const {
    const std::size_t m = features.rows();
    const std::size_t d = cfg_.input_dim;
    const std::size_t h = layer1_out_;
    Matrix pre(m, h);
    const double* w = params_.data() + w1_;
    const double* b = params_.data() + b1_;
    for (std::size_t i = 0; i < m; ++i) {
        const double* x = features.row(i);
        double* out = pre.row(i);
        for (std::size_t k = 0; k < h; ++k) out[k] = b[k];
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = x[a];
            const double* wrow = w + a * h;
            for (std::size_t k = 0; k < h; ++k) out[k] += xa * wrow[k];
        }
    }
    return pre;
}

Matrix ClassifierModel::logits(const Matrix& features) const {
    if (features.cols() != cfg_.input_dim) throw DataError("feature width does not match model input");
    Matrix pre = hidden_pre(features);
    if (cfg_.architecture == Architecture::kSoftmaxLinear) return pre;

    const std::size_t m = features.rows();
    const std::size_t h = cfg_.hidden_width;
    const std::size_t out_dim = cfg_.num_classes;
    Matrix out(m, out_dim);
    const double* w2 = params_.data() + w2_;
    const double* b2 = params_.data() + b2_;
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.row(i);
        const double* prow = pre.row(i);
        for (std::size_t j = 0; j < out_dim; ++j) orow[j] = b2[j];
        for (std::size_t k = 0; k < h; ++k) {
            const double act = std::max(prow[k], 0.0);
            if (act == 0.0) continue;
            const double* wrow = w2 + k * out_dim;
            for (std::size_t j = 0; j < out_dim; ++j) orow[j] += act * wrow[j];
        }
    }
    return out;
}

PredictionBatch ClassifierModel::forward(const Matrix& features) const {
    return PredictionBatch{softmax_rows(logits(features))};
}

std::vector<double> ClassifierModel::backward(const Matrix& features, const Matrix& dlogits) const {
    if (features.rows() != dlogits.rows()) throw DataError("feature / gradient row mismatch");
    const std::size_t m = features.rows();
    const std::size_t d = cfg_.input_dim;
    std::vector<double> grad(params_.size(), 0.0);

    if (cfg_.architecture == Architecture::kSoftmaxLinear) {
        const std::size_t out_dim = cfg_.num_classes;
        double* gw = grad.data() + w1_;
        double* gb = grad.data() + b1_;
        for (std::size_t i = 0; i < m; ++i) {
            const double* x = features.row(i);
            const double* g = dlogits.row(i);
            for (std::size_t a = 0; a < d; ++a) {
                const double xa = x[a];
                double* grow = gw + a * out_dim;
                for (std::size_t j = 0; j < out_dim; ++j) grow[j] += xa * g[j];
            }
            for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[j];
        }
        return grad;
    }

    const std::size_t h = cfg_.hidden_width;
    const std::size_t out_dim = cfg_.num_classes;
    Matrix pre = hidden_pre(features);
    const double* w2 = params_.data() + w2_;
    double* gw1 = grad.data() + w1_;
    double* gb1 = grad.data() + b1_;
    double* gw2 = grad.data() + w2_;
    double* gb2 = grad.data() + b2_;
    std::vector<double> dhidden(h);
    for (std::size_t i = 0; i < m; ++i) {
        const double* g = dlogits.row(i);
        const double* prow = pre.row(i);
        const double* x = features.row(i);
        for (std::size_t k = 0; k < h; ++k) {
            const double act = std::max(prow[k], 0.0);
            if (act > 0.0) {
                double* grow = gw2 + k * out_dim;
                double acc = 0.0;
                const double* wrow = w2 + k * out_dim;
                for (std::size_t j = 0; j < out_dim; ++j) {
                    grow[j] += act * g[j];
                    acc += wrow[j] * g[j];
                }
                dhidden[k] = acc;  // ReLU derivative 1
            } else {
                dhidden[k] = 0.0;
            }
        }
        for (std::size_t j = 0; j < out_dim; ++j) gb2[j] += g[j];
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = x[a];
            double* grow = gw1 + a * h;
            for (std::size_t k = 0; k < h; ++k) grow[k] += xa * dhidden[k];
        }
        for (std::size_t k = 0; k < h; ++k) gb1[k] += dhidden[k];
    }
    return grad;
}

json model_to_json(const ClassifierModel& model) {
    const auto& cfg = model.config();
    json j;
    j["format"] = "solar-model";
    j["version"] = 1;
    j["architecture"] = cfg.architecture == Architecture::kSoftmaxLinear ? "linear" : "mlp";
    j["input_dim"] = cfg.input_dim;
    j["num_classes"] = cfg.num_classes;
    j["hidden_width"] = cfg.hidden_width;
    j["params"] = model.params();
    return j;
}

ClassifierModel model_from_json(const json& j) {
    try {
        ModelConfig cfg;
        const std::string arch = j.at("architecture").get<std::string>();
        if (arch == "linear") {
            cfg.architecture = Architecture::kSoftmaxLinear;
        } else if (arch == "mlp") {
            cfg.architecture = Architecture::kOneHiddenLayer;
        } else {
            throw DataError("unknown architecture: " + arch);
        }
        cfg.input_dim = j.at("input_dim").get<std::size_t>();
        cfg.num_classes = j.at("num_classes").get<std::size_t>();
        cfg.hidden_width = j.value("hidden_width", std::size_t{64});
        return ClassifierModel(cfg, j.at("params").get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw DataError(std::string("model parse failure: ") + e.what());
    }
}

Matrix softmax_rows(const Matrix& logits, double prob_floor) {
    Matrix probs(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const double* lrow = logits.row(i);
        double* prow = probs.row(i);
        double max_logit = lrow[0];
        for (std::size_t j = 1; j < logits.cols(); ++j) max_logit = std::max(max_logit, lrow[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            prow[j] = std::exp(lrow[j] - max_logit);
            sum += prow[j];
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            prow[j] = std::max(prow[j] / sum, prob_floor);
        }
    }
    return probs;
}

double ce_mean(const Matrix& probs, const Matrix& targets, const std::vector<int>& rows,
               double prob_floor) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols()) {
        throw DataError("probability / target shape mismatch");
    }
    if (rows.empty()) return 0.0;
    double total = 0.0;
    for (int i : rows) {
        const double* prow = probs.row(static_cast<std::size_t>(i));
        const double* trow = targets.row(static_cast<std::size_t>(i));
        double acc = 0.0;
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            if (trow[j] != 0.0) acc -= trow[j] * std::log(std::max(prow[j], prob_floor));
        }
        total += acc;
    }
    return total / static_cast<double>(rows.size());
}

void add_ce_grad(const Matrix& probs, const Matrix& targets, const std::vector<int>& rows,
                 double scale, Matrix& dlogits) {
    if (rows.empty()) return;
    const double w = scale / static_cast<double>(rows.size());
    for (int i : rows) {
        const double* prow = probs.row(static_cast<std::size_t>(i));
        const double* trow = targets.row(static_cast<std::size_t>(i));
        double* grow = dlogits.row(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < probs.cols(); ++j) grow[j] += w * (prow[j] - trow[j]);
    }
}

Matrix renorm_targets(const Matrix& probs, const std::vector<CandidateMask>& masks,
                      double prob_floor) {
    if (masks.size() != probs.rows()) throw DataError("mask count does not match prediction rows");
    Matrix targets(probs.rows(), probs.cols(), 0.0);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const double* prow = probs.row(i);
        double* trow = targets.row(i);
        double mass = 0.0;
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            if (masks[i].contains(j)) {
                trow[j] = std::max(prow[j], prob_floor);
                mass += trow[j];
            }
        }
        for (std::size_t j = 0; j < probs.cols(); ++j) trow[j] /= mass;
    }
    return targets;
}

namespace {

std::vector<int> all_rows(std::size_t m) {
    std::vector<int> rows(m);
    for (std::size_t i = 0; i < m; ++i) rows[i] = static_cast<int>(i);
    return rows;
}

}  // namespace

double ce_loss(const PredictionBatch& predictions, const PseudoLabelBatch& pseudo_labels) {
    return ce_mean(predictions.probs, pseudo_labels.targets, all_rows(predictions.size()));
}

double consistency_loss(const ClassifierModel& model, const Matrix& strong_features,
                        const PseudoLabelBatch& pseudo_labels) {
    const PredictionBatch strong = model.forward(strong_features);
    return ce_mean(strong.probs, pseudo_labels.targets, all_rows(strong.size()));
}

double renorm_pll_loss(const ClassifierModel& model, const Matrix& features,
                       const std::vector<CandidateMask>& masks) {
    const PredictionBatch p = model.forward(features);
    const Matrix targets = renorm_targets(p.probs, masks);
    return ce_mean(p.probs, targets, all_rows(p.size()));
}

MixupPlan draw_mixup_plan(std::size_t rows, double concentration, std::mt19937_64& rng) {
    if (!(concentration > 0.0)) throw ConfigError("mixup concentration must be > 0");
    MixupPlan plan;
    plan.partner.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) plan.partner[i] = i;
    std::shuffle(plan.partner.begin(), plan.partner.end(), rng);
    plan.sigma.resize(rows);
    std::gamma_distribution<double> gamma(concentration, 1.0);
    for (std::size_t i = 0; i < rows; ++i) {
        const double a = gamma(rng);
        const double b = gamma(rng);
        plan.sigma[i] = a / (a + b);
    }
    return plan;
}

std::pair<Matrix, Matrix> apply_mixup(const Matrix& features, const Matrix& targets,
                                      const MixupPlan& plan) {
    const std::size_t m = features.rows();
    if (targets.rows() != m) throw DataError("feature / target row mismatch");
    if (plan.partner.size() != m || plan.sigma.size() != m) throw DataError("mixup plan size mismatch");
    Matrix x_mix(m, features.cols());
    Matrix t_mix(m, targets.cols());
    for (std::size_t i = 0; i < m; ++i) {
        const double sigma = plan.sigma[i];
        const std::size_t k = plan.partner[i];
        const double* xi = features.row(i);
        const double* xk = features.row(k);
        double* xo = x_mix.row(i);
        for (std::size_t c = 0; c < features.cols(); ++c) {
            xo[c] = sigma * xi[c] + (1.0 - sigma) * xk[c];
        }
        const double* ti = targets.row(i);
        const double* tk = targets.row(k);
        double* to = t_mix.row(i);
        for (std::size_t c = 0; c < targets.cols(); ++c) {
            to[c] = sigma * ti[c] + (1.0 - sigma) * tk[c];
        }
    }
    return {std::move(x_mix), std::move(t_mix)};
}

std::pair<Matrix, Matrix> mixup_pairs(const Matrix& features, const Matrix& targets,
                                      double concentration, std::mt19937_64& rng) {
    if (features.rows() != targets.rows()) throw DataError("feature / target row mismatch");
    if (features.rows() < 2) return {Matrix(), Matrix()};
    return apply_mixup(features, targets, draw_mixup_plan(features.rows(), concentration, rng));
}

double composite_loss(double ce, double cr, double mix, double rn, double eta) {
    return eta * (ce + cr + mix) + (1.0 - eta) * rn;
}

void sgd_step(ClassifierModel& model, const std::vector<double>& grad, double lr, double momentum,
              SgdState& state) {
    auto& params = model.params();
    if (grad.size() != params.size()) throw DataError("gradient length mismatch");
    if (state.velocity.size() != params.size()) state.velocity.assign(params.size(), 0.0);
    for (double g : grad) {
        if (!std::isfinite(g)) throw DivergenceError("training diverged");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        state.velocity[k] = momentum * state.velocity[k] + grad[k];
        params[k] -= lr * state.velocity[k];
    }
}

}  // namespace solar
