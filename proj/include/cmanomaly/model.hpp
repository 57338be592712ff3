#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cmanomaly/error.hpp"
#include "cmanomaly/interactions.hpp"
#include "cmanomaly/matrix.hpp"
#include "cmanomaly/mlp.hpp"
#include "cmanomaly/preprocess.hpp"
#include "cmanomaly/rng.hpp"

namespace cmanomaly {

struct ModelOptions {
    bool ablate_cm = false;           // replace interactions with per-metric time averages
    bool pooled_interactions = false; // sum h_f and h_t to scalars (input width 2)
    bool relu_output = false;         // apply ReLU to the final layer too
    bool l2_loss = false;             // unsquared Euclidean distance instead of mean squared error

    bool operator==(const ModelOptions&) const = default;
};

// A trained forecaster: interaction layer plus MLP head, with the normalization fitted on
// the training split so detection reproduces the training-time scaling.
struct ForecastModel {
    std::size_t omega = 0;
    std::size_t m = 0;
    ModelOptions options;
    CollabMachineParams cm; // empty vectors when ablated
    MlpParams mlp;
    NormalizationParams normalizer; // empty when the model was built on pre-scaled data

    std::size_t input_width() const {
        if (options.ablate_cm) return m;
        if (options.pooled_interactions) return 2;
        return omega + m;
    }
};

inline ForecastModel make_model(std::size_t omega, std::size_t m,
                                const std::vector<std::size_t>& hidden_widths,
                                const ModelOptions& options, Rng& rng) {
    if (omega == 0) throw InputError("model: window size must be positive");
    if (m == 0) throw InputError("model: need at least one metric");
    if (options.ablate_cm && options.pooled_interactions)
        throw InputError("model: ablation removes the interaction layer, pooling has nothing to act on");
    ForecastModel model;
    model.omega = omega;
    model.m = m;
    model.options = options;
    if (!options.ablate_cm) init_collab_params(model.cm, m, omega, rng);
    std::vector<std::size_t> widths;
    widths.push_back(model.input_width());
    widths.insert(widths.end(), hidden_widths.begin(), hidden_widths.end());
    widths.push_back(m);
    init_mlp(model.mlp, widths, rng);
    return model;
}

struct ModelCache {
    std::vector<double> input; // what the MLP saw
    MlpCache mlp;
};

struct ModelGrads {
    CmGrads cm;
    MlpGrads mlp;

    void resize_like(const ForecastModel& model) {
        if (!model.options.ablate_cm) cm.resize_like(model.cm);
        mlp.resize_like(model.mlp);
    }

    void clear() {
        cm.clear();
        mlp.clear();
    }

    void add(const ModelGrads& o) {
        cm.add(o.cm);
        mlp.add(o.mlp);
    }
};

namespace detail {

inline void check_window_shape(const ForecastModel& model, const Matrix& X) {
    if (X.rows() != model.omega || X.cols() != model.m)
        throw InputError("model: window is " + std::to_string(X.rows()) + "x" +
                         std::to_string(X.cols()) + ", model expects " +
                         std::to_string(model.omega) + "x" + std::to_string(model.m));
}

} // namespace detail

// The vector handed to the MLP: interaction outputs, or column means when ablated.
inline std::vector<double> compute_model_input(const ForecastModel& model, const Matrix& X,
                                               KernelKind kind = KernelKind::fast) {
    detail::check_window_shape(model, X);
    if (model.options.ablate_cm) {
        std::vector<double> avg(model.m, 0.0);
        for (std::size_t r = 0; r < model.omega; ++r) {
            const double* row = X.row(r);
            for (std::size_t k = 0; k < model.m; ++k) avg[k] += row[k];
        }
        for (auto& v : avg) v /= static_cast<double>(model.omega);
        return avg;
    }
    return interaction_forward(X, model.cm, model.options.pooled_interactions, kind).concat;
}

inline std::vector<double> model_forward(const ForecastModel& model, const Matrix& X,
                                         ModelCache* cache = nullptr,
                                         KernelKind kind = KernelKind::fast) {
    std::vector<double> input = compute_model_input(model, X, kind);
    if (cache) {
        cache->input = input;
        return mlp_forward(model.mlp, input, model.options.relu_output, &cache->mlp);
    }
    return mlp_forward(model.mlp, input, model.options.relu_output);
}

inline double loss_mse(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty())
        throw InputError("loss: prediction and target lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

inline double loss_l2(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty())
        throw InputError("loss: prediction and target lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline double window_loss(const ForecastModel& model, std::span<const double> pred,
                          std::span<const double> target) {
    return model.options.l2_loss ? loss_l2(pred, target) : loss_mse(pred, target);
}

// Forward, loss, and backward for one window. Gradients are added into `grads` so a batch
// can be accumulated; divide by the batch size afterwards. `grad_x` (optional) receives
// d(loss)/dX for this window alone.
inline double accumulate_window_gradient(const ForecastModel& model, const Matrix& X,
                                         std::span<const double> target, ModelGrads& grads,
                                         KernelKind kind = KernelKind::fast,
                                         Matrix* grad_x = nullptr) {
    if (target.size() != model.m)
        throw InputError("model: target has length " + std::to_string(target.size()) +
                         ", model predicts " + std::to_string(model.m));
    ModelCache cache;
    std::vector<double> pred = model_forward(model, X, &cache, kind);
    double loss = window_loss(model, pred, target);

    std::vector<double> dpred(model.m);
    if (model.options.l2_loss) {
        // d‖d‖/dd = d/‖d‖; flat zero at the non-differentiable origin.
        if (loss > 0.0)
            for (std::size_t k = 0; k < model.m; ++k) dpred[k] = (pred[k] - target[k]) / loss;
    } else {
        double scale = 2.0 / static_cast<double>(model.m);
        for (std::size_t k = 0; k < model.m; ++k) dpred[k] = scale * (pred[k] - target[k]);
    }

    const bool need_input_grad = !model.options.ablate_cm || grad_x != nullptr;
    std::vector<double> grad_input;
    mlp_backward(model.mlp, cache.mlp, dpred, model.options.relu_output, grads.mlp,
                 need_input_grad ? &grad_input : nullptr);

    if (model.options.ablate_cm) {
        if (grad_x) {
            if (grad_x->rows() != model.omega || grad_x->cols() != model.m)
                *grad_x = Matrix(model.omega, model.m);
            double inv = 1.0 / static_cast<double>(model.omega);
            for (std::size_t r = 0; r < model.omega; ++r)
                for (std::size_t k = 0; k < model.m; ++k)
                    (*grad_x)(r, k) = grad_input[k] * inv;
        }
    } else {
        interaction_backward(X, model.cm, grad_input, model.options.pooled_interactions,
                             grads.cm, grad_x, kind);
    }
    return loss;
}

// Stable flat order over every trainable scalar: interaction block first (bias, w, v per
// axis), then each MLP layer's W row-major followed by its b. Optimizer steps,
// serialization, and finite-difference checks all walk this order.
inline std::size_t param_count(std::size_t omega, std::size_t m,
                               const std::vector<std::size_t>& widths, bool ablated) {
    std::size_t n = ablated ? 0 : 2 + 2 * m + 2 * omega;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        n += widths[l] * widths[l + 1] + widths[l + 1];
    return n;
}

inline std::size_t param_count(const ForecastModel& model) {
    return param_count(model.omega, model.m, model.mlp.widths, model.options.ablate_cm);
}

namespace detail {

template <typename Cm, typename Mlp, typename Fn>
void visit_param_slots(bool ablated, Cm& cm, Mlp& mlp, Fn&& fn) {
    if (!ablated) {
        fn(&cm.feat_bias);
        for (auto& x : cm.feat_w) fn(&x);
        for (auto& x : cm.feat_v) fn(&x);
        fn(&cm.time_bias);
        for (auto& x : cm.time_w) fn(&x);
        for (auto& x : cm.time_v) fn(&x);
    }
    for (auto& layer : mlp.layers) {
        for (std::size_t i = 0; i < layer.W.size(); ++i) fn(&layer.W.data()[i]);
        for (auto& x : layer.b) fn(&x);
    }
}

} // namespace detail

inline std::vector<double*> param_pointers(ForecastModel& model) {
    std::vector<double*> out;
    out.reserve(param_count(model));
    detail::visit_param_slots(model.options.ablate_cm, model.cm, model.mlp,
                              [&](double* p) { out.push_back(p); });
    return out;
}

inline std::vector<const double*> grad_pointers(const ForecastModel& model, const ModelGrads& grads) {
    std::vector<const double*> out;
    out.reserve(param_count(model));
    detail::visit_param_slots(model.options.ablate_cm, grads.cm, grads.mlp,
                              [&](const double* p) { out.push_back(p); });
    return out;
}

inline std::vector<double*> grad_pointers(const ForecastModel& model, ModelGrads& grads) {
    std::vector<double*> out;
    out.reserve(param_count(model));
    detail::visit_param_slots(model.options.ablate_cm, grads.cm, grads.mlp,
                              [&](double* p) { out.push_back(p); });
    return out;
}

// Human-readable name per flat index, for diagnostics when a gradient goes non-finite.
inline std::vector<std::string> param_labels(const ForecastModel& model) {
    std::vector<std::string> out;
    out.reserve(param_count(model));
    if (!model.options.ablate_cm) {
        out.push_back("cm.feat_bias");
        for (std::size_t i = 0; i < model.cm.feat_w.size(); ++i)
            out.push_back("cm.feat_w[" + std::to_string(i) + "]");
        for (std::size_t i = 0; i < model.cm.feat_v.size(); ++i)
            out.push_back("cm.feat_v[" + std::to_string(i) + "]");
        out.push_back("cm.time_bias");
        for (std::size_t i = 0; i < model.cm.time_w.size(); ++i)
            out.push_back("cm.time_w[" + std::to_string(i) + "]");
        for (std::size_t i = 0; i < model.cm.time_v.size(); ++i)
            out.push_back("cm.time_v[" + std::to_string(i) + "]");
    }
    for (std::size_t l = 0; l < model.mlp.layers.size(); ++l) {
        const MlpLayer& layer = model.mlp.layers[l];
        for (std::size_t i = 0; i < layer.W.rows(); ++i)
            for (std::size_t j = 0; j < layer.W.cols(); ++j)
                out.push_back("mlp.layer" + std::to_string(l) + ".W[" + std::to_string(i) + "," +
                              std::to_string(j) + "]");
        for (std::size_t j = 0; j < layer.b.size(); ++j)
            out.push_back("mlp.layer" + std::to_string(l) + ".b[" + std::to_string(j) + "]");
    }
    return out;
}

} // namespace cmanomaly
