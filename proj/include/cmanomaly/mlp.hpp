#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cmanomaly/error.hpp"
#include "cmanomaly/matrix.hpp"
#include "cmanomaly/rng.hpp"

namespace cmanomaly {

// One affine layer, row-vector convention: y = x W + b with W shaped d_in x d_out.
struct MlpLayer {
    Matrix W;
    std::vector<double> b;
};

struct MlpParams {
    std::vector<MlpLayer> layers;
    std::vector<std::size_t> widths; // d_0 .. d_L

    std::size_t input_width() const { return widths.empty() ? 0 : widths.front(); }
    std::size_t output_width() const { return widths.empty() ? 0 : widths.back(); }
};

// Forward intermediates needed by the backward pass: acts[l] is the input to layer l
// (acts[0] is the network input), pre[l] is the affine output of layer l before any
// activation. acts has L+1 entries, the last being the network output.
struct MlpCache {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> pre;
};

struct MlpGrads {
    std::vector<MlpLayer> layers; // same shapes as the params

    void resize_like(const MlpParams& p) {
        layers.resize(p.layers.size());
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            layers[l].W = Matrix(p.layers[l].W.rows(), p.layers[l].W.cols());
            layers[l].b.assign(p.layers[l].b.size(), 0.0);
        }
    }

    void clear() {
        for (auto& l : layers) {
            l.W.fill(0.0);
            l.b.assign(l.b.size(), 0.0);
        }
    }

    void add(const MlpGrads& o) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            for (std::size_t i = 0; i < layers[l].W.size(); ++i)
                layers[l].W.data()[i] += o.layers[l].W.data()[i];
            for (std::size_t i = 0; i < layers[l].b.size(); ++i)
                layers[l].b[i] += o.layers[l].b[i];
        }
    }
};

// Glorot-uniform weights, zero biases.
inline void init_mlp(MlpParams& p, const std::vector<std::size_t>& widths, Rng& rng) {
    if (widths.size() < 2) throw InputError("mlp: need at least input and output widths");
    for (std::size_t w : widths)
        if (w == 0) throw InputError("mlp: zero layer width");
    p.widths = widths;
    p.layers.clear();
    p.layers.resize(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        std::size_t din = widths[l], dout = widths[l + 1];
        double bound = std::sqrt(6.0 / static_cast<double>(din + dout));
        p.layers[l].W = Matrix(din, dout);
        for (std::size_t i = 0; i < p.layers[l].W.size(); ++i)
            p.layers[l].W.data()[i] = rng.uniform(-bound, bound);
        p.layers[l].b.assign(dout, 0.0);
    }
}

inline double relu(double z) { return z > 0.0 ? z : 0.0; }
inline double relu_grad(double z) { return z > 0.0 ? 1.0 : 0.0; }

// Hidden layers apply ReLU; the final layer is affine unless relu_output is set.
inline std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> input,
                                       bool relu_output = false, MlpCache* cache = nullptr) {
    if (p.layers.empty()) throw InputError("mlp_forward: uninitialized network");
    if (input.size() != p.input_width())
        throw InputError("mlp_forward: input has length " + std::to_string(input.size()) +
                         ", network expects " + std::to_string(p.input_width()));
    std::vector<double> x(input.begin(), input.end());
    if (cache) {
        cache->acts.assign(1, x);
        cache->pre.clear();
        cache->pre.reserve(p.layers.size());
    }
    const std::size_t L = p.layers.size();
    for (std::size_t l = 0; l < L; ++l) {
        const MlpLayer& layer = p.layers[l];
        const std::size_t din = layer.W.rows(), dout = layer.W.cols();
        std::vector<double> z = layer.b;
        for (std::size_t i = 0; i < din; ++i) {
            const double xi = x[i];
            const double* wrow = layer.W.row(i);
            for (std::size_t j = 0; j < dout; ++j) z[j] += xi * wrow[j];
        }
        if (cache) cache->pre.push_back(z);
        const bool activate = (l + 1 < L) || relu_output;
        if (activate)
            for (auto& v : z) v = relu(v);
        x = std::move(z);
        if (cache) cache->acts.push_back(x);
    }
    return x;
}

// Backprop from d(loss)/d(output). Adds into `grads`; writes d(loss)/d(input) into
// `grad_input` when given. delta flows backwards through W^T and the ReLU mask.
inline void mlp_backward(const MlpParams& p, const MlpCache& cache,
                         std::span<const double> upstream, bool relu_output, MlpGrads& grads,
                         std::vector<double>* grad_input = nullptr) {
    const std::size_t L = p.layers.size();
    if (cache.acts.size() != L + 1 || cache.pre.size() != L)
        throw InputError("mlp_backward: cache does not match network depth");
    if (upstream.size() != p.output_width())
        throw InputError("mlp_backward: upstream has length " + std::to_string(upstream.size()) +
                         ", network outputs " + std::to_string(p.output_width()));
    if (grads.layers.size() != L) grads.resize_like(p);

    std::vector<double> delta(upstream.begin(), upstream.end());
    for (std::size_t li = L; li-- > 0;) {
        const MlpLayer& layer = p.layers[li];
        const std::size_t din = layer.W.rows(), dout = layer.W.cols();
        const bool activated = (li + 1 < L) || relu_output;
        if (activated)
            for (std::size_t j = 0; j < dout; ++j) delta[j] *= relu_grad(cache.pre[li][j]);
        const std::vector<double>& a = cache.acts[li];
        MlpLayer& g = grads.layers[li];
        for (std::size_t j = 0; j < dout; ++j) g.b[j] += delta[j];
        for (std::size_t i = 0; i < din; ++i) {
            const double ai = a[i];
            double* grow = g.W.row(i);
            for (std::size_t j = 0; j < dout; ++j) grow[j] += ai * delta[j];
        }
        if (li > 0 || grad_input) {
            std::vector<double> prev(din, 0.0);
            for (std::size_t i = 0; i < din; ++i) {
                const double* wrow = layer.W.row(i);
                double acc = 0.0;
                for (std::size_t j = 0; j < dout; ++j) acc += wrow[j] * delta[j];
                prev[i] = acc;
            }
            if (li == 0 && grad_input) *grad_input = prev;
            delta = std::move(prev);
        }
    }
}

} // namespace cmanomaly
