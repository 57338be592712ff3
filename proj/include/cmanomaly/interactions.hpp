#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmanomaly/error.hpp"
#include "cmanomaly/matrix.hpp"
#include "cmanomaly/rng.hpp"

namespace cmanomaly {

// Trainable parameters of the collaborative machine. The feature axis carries one scalar
// weight per metric, the time axis one per window row; the product of two weights scores
// the importance of that pair's interaction.
struct CollabMachineParams {
    double feat_bias = 0.0;
    std::vector<double> feat_w; // m
    std::vector<double> feat_v; // m
    double time_bias = 0.0;
    std::vector<double> time_w; // omega
    std::vector<double> time_v; // omega
};

struct CmGrads {
    double feat_bias = 0.0;
    std::vector<double> feat_w;
    std::vector<double> feat_v;
    double time_bias = 0.0;
    std::vector<double> time_w;
    std::vector<double> time_v;

    void resize_like(const CollabMachineParams& p) {
        feat_w.assign(p.feat_w.size(), 0.0);
        feat_v.assign(p.feat_v.size(), 0.0);
        time_w.assign(p.time_w.size(), 0.0);
        time_v.assign(p.time_v.size(), 0.0);
        feat_bias = time_bias = 0.0;
    }

    void clear() {
        feat_bias = time_bias = 0.0;
        feat_w.assign(feat_w.size(), 0.0);
        feat_v.assign(feat_v.size(), 0.0);
        time_w.assign(time_w.size(), 0.0);
        time_v.assign(time_v.size(), 0.0);
    }

    void add(const CmGrads& o) {
        feat_bias += o.feat_bias;
        time_bias += o.time_bias;
        for (std::size_t i = 0; i < feat_w.size(); ++i) feat_w[i] += o.feat_w[i];
        for (std::size_t i = 0; i < feat_v.size(); ++i) feat_v[i] += o.feat_v[i];
        for (std::size_t i = 0; i < time_w.size(); ++i) time_w[i] += o.time_w[i];
        for (std::size_t i = 0; i < time_v.size(); ++i) time_v[i] += o.time_v[i];
    }
};

// h_f per window row, h_t per metric, and their concatenation (the model input).
// In pooled mode h_f and h_t are summed down to one value each.
struct InteractionOutput {
    std::vector<double> h_f;
    std::vector<double> h_t;
    std::vector<double> concat;
};

enum class KernelKind { fast, naive };

inline const char* kernel_name(KernelKind k) { return k == KernelKind::fast ? "fast" : "naive"; }

// Multiply/add tallies incremented by the kernels according to the loop iterations they
// actually execute. Pass nullptr to skip counting.
struct OpCounter {
    std::uint64_t mults = 0;
    std::uint64_t adds = 0;

    std::uint64_t total() const { return mults + adds; }
};

// Biases start at 0; pair weights start small enough that interactions stay O(1) on
// normalized inputs.
inline void init_collab_params(CollabMachineParams& p, std::size_t m, std::size_t omega, Rng& rng) {
    auto fill_uniform = [&rng](std::vector<double>& v, std::size_t n, double bound) {
        v.resize(n);
        for (auto& x : v) x = rng.uniform(-bound, bound);
    };
    p.feat_bias = 0.0;
    p.time_bias = 0.0;
    double fb = 1.0 / std::sqrt(static_cast<double>(m));
    double tb = 1.0 / std::sqrt(static_cast<double>(omega));
    fill_uniform(p.feat_w, m, fb);
    fill_uniform(p.feat_v, m, fb);
    fill_uniform(p.time_w, omega, tb);
    fill_uniform(p.time_v, omega, tb);
}

namespace detail {

inline void check_feat_shapes(const Matrix& X, const CollabMachineParams& p) {
    if (p.feat_w.size() != X.cols() || p.feat_v.size() != X.cols())
        throw InputError("feature interactions: window has " + std::to_string(X.cols()) +
                         " metrics, params have " + std::to_string(p.feat_w.size()));
}

inline void check_time_shapes(const Matrix& X, const CollabMachineParams& p) {
    if (p.time_w.size() != X.rows() || p.time_v.size() != X.rows())
        throw InputError("temporal interactions: window has " + std::to_string(X.rows()) +
                         " rows, params have " + std::to_string(p.time_w.size()));
}

} // namespace detail

// Reference form. Row r:
//   out[r] = b0 + sum_i w_i X[r,i] + sum_{i<j} X[r,i] X[r,j] v_i v_j
// with the pair sum evaluated by the explicit double loop.
inline std::vector<double> feature_interactions_naive(const Matrix& X, const CollabMachineParams& p,
                                                      OpCounter* c = nullptr) {
    detail::check_feat_shapes(X, p);
    const std::size_t omega = X.rows();
    const std::size_t m = X.cols();
    std::vector<double> out(omega);
    for (std::size_t r = 0; r < omega; ++r) {
        const double* x = X.row(r);
        double lin = 0.0;
        for (std::size_t i = 0; i < m; ++i) lin += p.feat_w[i] * x[i];
        double inter = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j)
                inter += x[i] * x[j] * p.feat_v[i] * p.feat_v[j];
        out[r] = p.feat_bias + lin + inter;
        if (c) {
            std::uint64_t pairs = static_cast<std::uint64_t>(m) * (m - 1) / 2;
            c->mults += m + 3 * pairs;
            c->adds += m + pairs + 2;
        }
    }
    return out;
}

// Reformulated pair sum, one pass over the m metrics per row:
//   sum_{i<j} X[r,i] X[r,j] v_i v_j = ((sum_i X[r,i] v_i)^2 - sum_i X[r,i]^2 v_i^2) / 2
inline std::vector<double> feature_interactions_fast(const Matrix& X, const CollabMachineParams& p,
                                                     OpCounter* c = nullptr) {
    detail::check_feat_shapes(X, p);
    const std::size_t omega = X.rows();
    const std::size_t m = X.cols();
    std::vector<double> out(omega);
    for (std::size_t r = 0; r < omega; ++r) {
        const double* x = X.row(r);
        double lin = 0.0, s = 0.0, q = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            lin += p.feat_w[i] * x[i];
            double t = x[i] * p.feat_v[i];
            s += t;
            q += t * t;
        }
        out[r] = p.feat_bias + lin + 0.5 * (s * s - q);
        if (c) {
            c->mults += 3 * static_cast<std::uint64_t>(m) + 2;
            c->adds += 3 * static_cast<std::uint64_t>(m) + 3;
        }
    }
    return out;
}

// Mirror of the feature form with rows and columns swapped. Metric k:
//   out[k] = b0^ + sum_i w^_i X[i,k] + sum_{i<j} X[i,k] X[j,k] v^_i v^_j
inline std::vector<double> temporal_interactions_naive(const Matrix& X, const CollabMachineParams& p,
                                                       OpCounter* c = nullptr) {
    detail::check_time_shapes(X, p);
    const std::size_t omega = X.rows();
    const std::size_t m = X.cols();
    std::vector<double> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        double lin = 0.0;
        for (std::size_t i = 0; i < omega; ++i) lin += p.time_w[i] * X(i, k);
        double inter = 0.0;
        for (std::size_t i = 0; i < omega; ++i)
            for (std::size_t j = i + 1; j < omega; ++j)
                inter += X(i, k) * X(j, k) * p.time_v[i] * p.time_v[j];
        out[k] = p.time_bias + lin + inter;
        if (c) {
            std::uint64_t pairs = static_cast<std::uint64_t>(omega) * (omega - 1) / 2;
            c->mults += omega + 3 * pairs;
            c->adds += omega + pairs + 2;
        }
    }
    return out;
}

inline std::vector<double> temporal_interactions_fast(const Matrix& X, const CollabMachineParams& p,
                                                      OpCounter* c = nullptr) {
    detail::check_time_shapes(X, p);
    const std::size_t omega = X.rows();
    const std::size_t m = X.cols();
    std::vector<double> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        double lin = 0.0, s = 0.0, q = 0.0;
        for (std::size_t i = 0; i < omega; ++i) {
            double xv = X(i, k);
            lin += p.time_w[i] * xv;
            double t = xv * p.time_v[i];
            s += t;
            q += t * t;
        }
        out[k] = p.time_bias + lin + 0.5 * (s * s - q);
        if (c) {
            c->mults += 3 * static_cast<std::uint64_t>(omega) + 2;
            c->adds += 3 * static_cast<std::uint64_t>(omega) + 3;
        }
    }
    return out;
}

inline std::vector<double> feature_interactions(const Matrix& X, const CollabMachineParams& p,
                                                KernelKind kind, OpCounter* c = nullptr) {
    return kind == KernelKind::fast ? feature_interactions_fast(X, p, c)
                                    : feature_interactions_naive(X, p, c);
}

inline std::vector<double> temporal_interactions(const Matrix& X, const CollabMachineParams& p,
                                                 KernelKind kind, OpCounter* c = nullptr) {
    return kind == KernelKind::fast ? temporal_interactions_fast(X, p, c)
                                    : temporal_interactions_naive(X, p, c);
}

// h_f followed by h_t. Pooled mode sums each vector down to a scalar, so concat has
// length 2 instead of omega + m.
inline InteractionOutput interaction_forward(const Matrix& X, const CollabMachineParams& p,
                                             bool pooled = false, KernelKind kind = KernelKind::fast) {
    InteractionOutput out;
    out.h_f = feature_interactions(X, p, kind);
    out.h_t = temporal_interactions(X, p, kind);
    if (pooled) {
        double f = 0.0, t = 0.0;
        for (double v : out.h_f) f += v;
        for (double v : out.h_t) t += v;
        out.h_f.assign(1, f);
        out.h_t.assign(1, t);
    }
    out.concat = out.h_f;
    out.concat.insert(out.concat.end(), out.h_t.begin(), out.h_t.end());
    return out;
}

// Exact partials of concat contracted with `upstream` (length omega+m, or 2 when pooled).
// Adds into `grads`; writes d(loss)/dX into `grad_x` when given (overwrites).
// With the fast kernel the row sums S_r = sum_i X[r,i] v_i are reused; the naive kernel
// recomputes every pair explicitly and costs O(m^2) per row.
inline void interaction_backward(const Matrix& X, const CollabMachineParams& p,
                                 std::span<const double> upstream, bool pooled, CmGrads& grads,
                                 Matrix* grad_x = nullptr, KernelKind kind = KernelKind::fast,
                                 OpCounter* c = nullptr) {
    detail::check_feat_shapes(X, p);
    detail::check_time_shapes(X, p);
    const std::size_t omega = X.rows();
    const std::size_t m = X.cols();
    const std::size_t expect = pooled ? 2 : omega + m;
    if (upstream.size() != expect)
        throw InputError("interaction_backward: upstream has length " +
                         std::to_string(upstream.size()) + ", expected " + std::to_string(expect));
    if (grads.feat_w.size() != m || grads.time_w.size() != omega)
        grads.resize_like(p);
    if (grad_x) {
        if (grad_x->rows() != omega || grad_x->cols() != m)
            *grad_x = Matrix(omega, m);
        else
            grad_x->fill(0.0);
    }

    auto uf = [&](std::size_t r) { return pooled ? upstream[0] : upstream[r]; };
    auto ut = [&](std::size_t k) { return pooled ? upstream[1] : upstream[omega + k]; };

    // Feature axis: dh_f[r]/dv_i = X[r,i] (S_r - X[r,i] v_i),
    //               dh_f[r]/dX[r,i] = w_i + v_i (S_r - X[r,i] v_i).
    for (std::size_t r = 0; r < omega; ++r) {
        const double u = uf(r);
        const double* x = X.row(r);
        grads.feat_bias += u;
        if (kind == KernelKind::fast) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += x[i] * p.feat_v[i];
            for (std::size_t i = 0; i < m; ++i) {
                double rest = s - x[i] * p.feat_v[i]; // sum_{j != i} X[r,j] v_j
                grads.feat_w[i] += u * x[i];
                grads.feat_v[i] += u * x[i] * rest;
                if (grad_x) (*grad_x)(r, i) += u * (p.feat_w[i] + p.feat_v[i] * rest);
            }
            if (c) { c->mults += 6 * m; c->adds += 5 * m; }
        } else {
            for (std::size_t i = 0; i < m; ++i) {
                double rest = 0.0;
                for (std::size_t j = 0; j < m; ++j)
                    if (j != i) rest += x[j] * p.feat_v[j];
                grads.feat_w[i] += u * x[i];
                grads.feat_v[i] += u * x[i] * rest;
                if (grad_x) (*grad_x)(r, i) += u * (p.feat_w[i] + p.feat_v[i] * rest);
            }
            if (c) { c->mults += static_cast<std::uint64_t>(m) * (m - 1) + 5 * m; c->adds += static_cast<std::uint64_t>(m) * m + 4 * m; }
        }
    }

    // Temporal axis, the same with rows and columns swapped.
    for (std::size_t k = 0; k < m; ++k) {
        const double u = ut(k);
        grads.time_bias += u;
        if (kind == KernelKind::fast) {
            double s = 0.0;
            for (std::size_t i = 0; i < omega; ++i) s += X(i, k) * p.time_v[i];
            for (std::size_t i = 0; i < omega; ++i) {
                double xv = X(i, k);
                double rest = s - xv * p.time_v[i];
                grads.time_w[i] += u * xv;
                grads.time_v[i] += u * xv * rest;
                if (grad_x) (*grad_x)(i, k) += u * (p.time_w[i] + p.time_v[i] * rest);
            }
            if (c) { c->mults += 6 * omega; c->adds += 5 * omega; }
        } else {
            for (std::size_t i = 0; i < omega; ++i) {
                double xv = X(i, k);
                double rest = 0.0;
                for (std::size_t j = 0; j < omega; ++j)
                    if (j != i) rest += X(j, k) * p.time_v[j];
                grads.time_w[i] += u * xv;
                grads.time_v[i] += u * xv * rest;
                if (grad_x) (*grad_x)(i, k) += u * (p.time_w[i] + p.time_v[i] * rest);
            }
            if (c) { c->mults += static_cast<std::uint64_t>(omega) * (omega - 1) + 5 * omega; c->adds += static_cast<std::uint64_t>(omega) * omega + 4 * omega; }
        }
    }
}

} // namespace cmanomaly
