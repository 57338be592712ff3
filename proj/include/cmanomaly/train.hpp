#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "cmanomaly/adam.hpp"
#include "cmanomaly/error.hpp"
#include "cmanomaly/matrix.hpp"
#include "cmanomaly/model.hpp"
#include "cmanomaly/preprocess.hpp"
#include "cmanomaly/rng.hpp"

namespace cmanomaly {

struct TrainConfig {
    std::size_t omega = 32;
    std::size_t tau = 5;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 200;
    double loss_delta_stop = 1e-5;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_widths{128, 64};
    ModelOptions options;
    std::size_t threads = 1;
    KernelKind kernel = KernelKind::fast;
};

struct TrainResult {
    ForecastModel model;
    std::vector<double> loss_history; // one mean window loss per completed epoch
};

namespace detail {

// Batch gradients are reduced in fixed chunks whose partial sums are combined in chunk
// order, so the floating-point result is identical for any thread count.
inline constexpr std::size_t kGradChunk = 16;

struct ChunkPartial {
    ModelGrads grads;
    double loss_sum = 0.0;
    std::exception_ptr error;
};

} // namespace detail

// Owns the shuffled-batch Adam loop over a windowed training series. Exposed separately
// from train() so a single epoch can be stepped (and timed) in isolation.
class Trainer {
public:
    Trainer(const Matrix& train_values, const TrainConfig& cfg)
        : cfg_(cfg), rng_(cfg.seed) {
        if (cfg.batch_size == 0) throw InputError("train: batch size must be positive");
        if (cfg.threads == 0) throw InputError("train: thread count must be positive");
        NormalizationParams norm = fit_normalizer(train_values);
        Matrix scaled = normalize_values(norm, train_values);
        windows_ = make_windows(scaled, cfg.omega, cfg.tau);
        model_ = make_model(cfg.omega, train_values.cols(), cfg.hidden_widths, cfg.options, rng_);
        model_.normalizer = norm;
        adam_cfg_.learning_rate = cfg.learning_rate;
        adam_state_.reset(param_count(model_));
        params_ = param_pointers(model_);
        total_.resize_like(model_);
        flat_grads_.resize(params_.size());
        order_.resize(windows_.windows.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    // One pass over every window in a fresh shuffled order. Returns the mean window loss.
    double run_epoch() {
        ++epoch_;
        const std::size_t N = order_.size();
        rng_.shuffle(order_);
        double epoch_loss_sum = 0.0;
        for (std::size_t begin = 0; begin < N; begin += cfg_.batch_size) {
            const std::size_t end = std::min(N, begin + cfg_.batch_size);
            process_batch(begin, end);
            total_.clear();
            for (const auto& part : partials_) {
                total_.add(part.grads);
                epoch_loss_sum += part.loss_sum;
            }
            std::vector<double*> gptrs = grad_pointers(model_, total_);
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            for (std::size_t i = 0; i < gptrs.size(); ++i) flat_grads_[i] = *gptrs[i] * inv_batch;
            try {
                adam_step(adam_cfg_, adam_state_, params_, flat_grads_,
                          [&](std::size_t i) { return param_labels(model_)[i]; });
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch_));
            }
        }
        const double epoch_loss = epoch_loss_sum / static_cast<double>(N);
        if (!std::isfinite(epoch_loss))
            throw NumericError("train: loss diverged at epoch " + std::to_string(epoch_));
        return epoch_loss;
    }

    ForecastModel& model() { return model_; }
    const ForecastModel& model() const { return model_; }
    std::size_t window_count() const { return order_.size(); }
    std::size_t epochs_run() const { return epoch_; }

private:
    void process_batch(std::size_t begin, std::size_t end) {
        const std::size_t batch_n = end - begin;
        const std::size_t n_chunks = (batch_n + detail::kGradChunk - 1) / detail::kGradChunk;
        if (partials_.size() < n_chunks) partials_.resize(n_chunks);
        for (std::size_t cidx = 0; cidx < n_chunks; ++cidx) {
            if (partials_[cidx].grads.mlp.layers.empty())
                partials_[cidx].grads.resize_like(model_);
            else
                partials_[cidx].grads.clear();
            partials_[cidx].loss_sum = 0.0;
            partials_[cidx].error = nullptr;
        }

        auto run_chunk = [&](std::size_t cidx) {
            detail::ChunkPartial& part = partials_[cidx];
            try {
                const std::size_t lo = begin + cidx * detail::kGradChunk;
                const std::size_t hi = std::min(end, lo + detail::kGradChunk);
                for (std::size_t w = lo; w < hi; ++w) {
                    const std::size_t idx = order_[w];
                    part.loss_sum += accumulate_window_gradient(
                        model_, windows_.windows[idx], windows_.targets[idx], part.grads,
                        cfg_.kernel);
                }
            } catch (...) {
                part.error = std::current_exception();
            }
        };

        if (cfg_.threads <= 1 || n_chunks <= 1) {
            for (std::size_t cidx = 0; cidx < n_chunks; ++cidx) run_chunk(cidx);
        } else {
            const std::size_t workers = std::min(cfg_.threads, n_chunks);
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (std::size_t t = 0; t < workers; ++t)
                pool.emplace_back([&, t] {
                    for (std::size_t cidx = t; cidx < n_chunks; cidx += workers) run_chunk(cidx);
                });
            for (auto& th : pool) th.join();
        }
        for (std::size_t cidx = 0; cidx < n_chunks; ++cidx)
            if (partials_[cidx].error) std::rethrow_exception(partials_[cidx].error);
        partials_.resize(n_chunks);
    }

    TrainConfig cfg_;
    WindowSet windows_;
    ForecastModel model_;
    Rng rng_;
    AdamConfig adam_cfg_;
    AdamState adam_state_;
    std::vector<double*> params_;
    std::vector<std::size_t> order_;
    std::vector<detail::ChunkPartial> partials_;
    ModelGrads total_;
    std::vector<double> flat_grads_;
    std::size_t epoch_ = 0;
};

// Fit the normalizer on the given values, window them, and train the forecaster until the
// epoch loss moves by less than loss_delta_stop or max_epochs is reached.
inline TrainResult train(const Matrix& train_values, const TrainConfig& cfg) {
    if (cfg.max_epochs == 0) throw InputError("train: need at least one epoch");
    Trainer trainer(train_values, cfg);
    TrainResult result;
    double prev_loss = 0.0;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double loss = trainer.run_epoch();
        result.loss_history.push_back(loss);
        if (epoch > 0 && std::abs(loss - prev_loss) < cfg.loss_delta_stop) break;
        prev_loss = loss;
    }
    result.model = std::move(trainer.model());
    return result;
}

} // namespace cmanomaly
