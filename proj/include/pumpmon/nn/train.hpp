#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "pumpmon/errors.hpp"
#include "pumpmon/nn/adam.hpp"
#include "pumpmon/nn/kernels.hpp"
#include "pumpmon/nn/layers.hpp"
#include "pumpmon/nn/model.hpp"
#include "pumpmon/prng.hpp"

namespace pumpmon::nn {

// Scratch and cached activations for minibatch forward/backward passes.
// Buffers are sized once for the largest batch and reused; smaller batches
// use the leading rows. Also the entry point for gradient checks: tests
// drive forward_backward directly and read `grads`.
template <typename S>
class TrainContext {
public:
    explicit TrainContext(Model<S>& model) : model_(&model) {
        model.config.validate();
        params = collect_params(model);
        grads.init(params);
        const int depth = model.config.depth;
        windex_.resize(depth);
        bindex_.resize(depth);
        gindex_.resize(depth - 1);
        beindex_.resize(depth - 1);
        std::size_t idx = 0;
        for (int i = 0; i < depth; ++i) {
            windex_[i] = idx++;
            bindex_[i] = idx++;
            if (i < depth - 1) {
                gindex_[i] = idx++;
                beindex_[i] = idx++;
            }
        }
    }

    // x: n samples, sample-major (n, in_channels, input_length) contiguous.
    // Returns the batch MSE loss; fills `grads` when want_grads.
    double forward_backward(const S* x, int n, const double* targets, bool want_grads) {
        const ModelConfig& cfg = model_->config;
        if (!model_->training)
            throw UsageError("forward_backward: model is not in training mode");
        if (n < 2) throw UsageError("training batches need at least 2 samples");
        ensure_capacity(n);

        const int depth = cfg.depth;
        const int L = cfg.input_length;

        // forward
        for (int i = 0; i < depth; ++i) {
            auto& conv = model_->convs[static_cast<std::size_t>(i)];
            const int in_ch = conv.in_channels;
            const int out_ch = conv.out_channels;
            const S* src = i == 0 ? x : acts_[i - 1].data();
            const std::size_t in_stride = static_cast<std::size_t>(in_ch) * L;
            const std::size_t out_stride = static_cast<std::size_t>(out_ch) * L;
            for (int s = 0; s < n; ++s) {
                pads_[i].fill(s, src + s * in_stride, static_cast<std::size_t>(L));
                conv_fwd_rows<S, 32>(pads_[i].row(s, 0), in_ch, pads_[i].padlen,
                                     conv.weights.data(), conv.bias.data(),
                                     out_ch, conv.kernel,
                                     acts_[i].data() + s * out_stride, L);
            }
            if (i < depth - 1) {
                bn_train_forward_raw(acts_[i].data(), n, out_ch, L,
                                     model_->bns[static_cast<std::size_t>(i)],
                                     xhat_[i].data(), inv_std_[i].data());
                relu_inplace(acts_[i].data(), static_cast<std::size_t>(n) * out_stride);
            }
        }

        preds_.resize(static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s)
            preds_[s] = gap_row(acts_[depth - 1].data() + static_cast<std::size_t>(s) * L, L);
        std::vector<double> tg(targets, targets + n);
        const double loss = mse_loss(preds_, tg, want_grads ? &dpred_ : nullptr);
        if (!want_grads) return loss;

        // backward
        grads.zero();
        for (int s = 0; s < n; ++s) {
            const S gs = static_cast<S>(dpred_[s] / L);
            S* grow = g_.data() + static_cast<std::size_t>(s) * L;
            for (int t = 0; t < L; ++t) grow[t] = gs;
        }

        for (int i = depth - 1; i >= 0; --i) {
            auto& conv = model_->convs[static_cast<std::size_t>(i)];
            const int in_ch = conv.in_channels;
            const int out_ch = conv.out_channels;
            const int K = conv.kernel;
            const std::size_t out_stride = static_cast<std::size_t>(out_ch) * L;
            const std::size_t in_stride = static_cast<std::size_t>(in_ch) * L;

            if (i < depth - 1) {
                relu_backward_inplace(g_.data(), acts_[i].data(),
                                      static_cast<std::size_t>(n) * out_stride);
                bn_backward_raw(g_.data(), xhat_[i].data(), inv_std_[i].data(), n, out_ch, L,
                                model_->bns[static_cast<std::size_t>(i)],
                                grads[gindex_[i]], grads[beindex_[i]]);
            }

            for (int s = 0; s < n; ++s) {
                conv_gw_dispatch(pads_[i].row(s, 0), in_ch, pads_[i].padlen,
                                 g_.data() + s * out_stride, out_ch, K, L,
                                 grads[windex_[i]]);
                conv_gb_rows(g_.data() + s * out_stride, out_ch, L, grads[bindex_[i]]);
            }

            if (i > 0) {
                // grad wrt input: forward-convolve the padded output grads
                // with transposed, kernel-flipped weights
                wflip_.assign(static_cast<std::size_t>(in_ch) * out_ch * K, S(0));
                for (int o = 0; o < out_ch; ++o)
                    for (int c = 0; c < in_ch; ++c)
                        for (int k = 0; k < K; ++k)
                            wflip_[(static_cast<std::size_t>(c) * out_ch + o) * K + k] =
                                conv.w(o, c, K - 1 - k);
                for (int s = 0; s < n; ++s) {
                    gpads_[i].fill(s, g_.data() + s * out_stride, static_cast<std::size_t>(L));
                    conv_fwd_rows<S, 32>(gpads_[i].row(s, 0), out_ch, gpads_[i].padlen,
                                         wflip_.data(), zero_bias_.data(), in_ch, K,
                                         gnext_.data() + s * in_stride, L);
                }
                g_.swap(gnext_);
            }
        }
        return loss;
    }

    const std::vector<double>& predictions() const { return preds_; }

    ParamSet<S> params;
    GradSet<S> grads;

private:
    void ensure_capacity(int n) {
        if (n <= capacity_) return;
        const ModelConfig& cfg = model_->config;
        const int depth = cfg.depth;
        const int L = cfg.input_length;
        pads_.resize(static_cast<std::size_t>(depth));
        gpads_.resize(static_cast<std::size_t>(depth));
        acts_.resize(static_cast<std::size_t>(depth));
        xhat_.resize(static_cast<std::size_t>(depth - 1));
        inv_std_.resize(static_cast<std::size_t>(depth - 1));
        int max_ch = 1;
        for (int i = 0; i < depth; ++i) {
            const auto& conv = model_->convs[static_cast<std::size_t>(i)];
            max_ch = std::max(max_ch, conv.out_channels);
            pads_[i].configure(n, conv.in_channels, L, conv.kernel);
            if (i > 0) gpads_[i].configure(n, conv.out_channels, L, conv.kernel);
            acts_[i].assign(static_cast<std::size_t>(n) * conv.out_channels * L, S(0));
            if (i < depth - 1) {
                xhat_[i].assign(static_cast<std::size_t>(n) * conv.out_channels * L, S(0));
                inv_std_[i].assign(static_cast<std::size_t>(conv.out_channels), 0.0);
            }
        }
        g_.assign(static_cast<std::size_t>(n) * max_ch * L, S(0));
        gnext_.assign(static_cast<std::size_t>(n) * max_ch * L, S(0));
        zero_bias_.assign(static_cast<std::size_t>(max_ch), S(0));
        capacity_ = n;
    }

    Model<S>* model_;
    int capacity_ = 0;
    std::vector<PadBatch<S>> pads_, gpads_;
    std::vector<std::vector<S>> acts_, xhat_;
    std::vector<std::vector<double>> inv_std_;
    std::vector<S> g_, gnext_, wflip_, zero_bias_;
    std::vector<double> preds_, dpred_;
    std::vector<std::size_t> windex_, bindex_, gindex_, beindex_;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Full training run: He-uniform init, per-epoch Fisher-Yates shuffle,
// minibatch Adam on MSE. The PRNG stream is consumed in documented order
// (weight init, then one shuffle per epoch), so a (seed, data) pair pins
// the resulting model exactly. A trailing batch of one sample is folded
// into the previous batch (batchnorm needs at least two). Returns the model
// in inference mode.
template <typename S>
Model<S> train(const std::vector<Tensor<S>>& inputs, const std::vector<double>& targets,
               const ModelConfig& config, const TrainHyper& hyper,
               const EpochCallback& on_epoch = {}) {
    config.validate();
    hyper.validate();
    if (inputs.empty()) throw UsageError("train: no training samples");
    if (inputs.size() != targets.size())
        throw UsageError("train: input and target counts differ");
    if (inputs.size() < 2) throw UsageError("train: need at least 2 samples");
    for (const auto& in : inputs) {
        if (in.channels != config.in_channels() || in.length != config.input_length)
            throw StructuralError("train: sample shape does not match model config");
    }
    for (double t : targets)
        if (!std::isfinite(t)) throw UsageError("train: non-finite target label");

    const int n = static_cast<int>(inputs.size());
    const int L = config.input_length;
    const int in_ch = config.in_channels();

    // fixed batch partition: chunks of batch_size; a trailing single sample
    // joins the previous chunk. Batchnorm needs two samples per batch, so
    // the effective size is at least 2.
    const int eff_batch = std::max(hyper.batch_size, 2);
    std::vector<int> batch_sizes;
    for (int done = 0; done < n;) {
        const int take = std::min(eff_batch, n - done);
        batch_sizes.push_back(take);
        done += take;
    }
    if (batch_sizes.size() > 1 && batch_sizes.back() == 1) {
        batch_sizes.pop_back();
        batch_sizes.back() += 1;
    }
    const int max_batch = *std::max_element(batch_sizes.begin(), batch_sizes.end());

    Prng rng(hyper.seed);
    Model<S> model = make_model<S>(config);
    init_weights(model, rng);
    model.training = true;

    TrainContext<S> ctx(model);
    AdamState<S> adam;
    adam.init(ctx.params);

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<S> xbuf(static_cast<std::size_t>(max_batch) * in_ch * L);
    std::vector<double> ybuf(static_cast<std::size_t>(max_batch));
    const std::size_t sample_stride = static_cast<std::size_t>(in_ch) * L;

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        rng.shuffle(perm);
        double loss_sum = 0.0;
        int pos = 0;
        for (const int bs : batch_sizes) {
            for (int j = 0; j < bs; ++j) {
                const int src = perm[static_cast<std::size_t>(pos + j)];
                std::memcpy(xbuf.data() + j * sample_stride,
                            inputs[static_cast<std::size_t>(src)].values.data(),
                            sizeof(S) * sample_stride);
                ybuf[static_cast<std::size_t>(j)] = targets[static_cast<std::size_t>(src)];
            }
            const double loss = ctx.forward_backward(xbuf.data(), bs, ybuf.data(), true);
            if (!std::isfinite(loss))
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   " (non-finite loss)");
            adam_step(ctx.params, ctx.grads, adam, hyper);
            loss_sum += loss * bs;
            pos += bs;
        }
        if (on_epoch) on_epoch(epoch, loss_sum / n);
    }

    model.training = false;
    return model;
}

} // namespace pumpmon::nn
