#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pumpmon/errors.hpp"
#include "pumpmon/nn/kernels.hpp"
#include "pumpmon/nn/tensor.hpp"

namespace pumpmon::nn {

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.1;

// Conv1d, stride 1, zero padding (kernel-1)/2 on both sides so the output
// length equals the input length. Odd kernel sizes only.
template <typename S>
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    std::vector<S> weights; // [out][in][k]
    std::vector<S> bias;    // [out]

    ConvLayer() = default;
    ConvLayer(int in_ch, int out_ch, int k)
        : in_channels(validated(in_ch, out_ch, k)), out_channels(out_ch), kernel(k),
          weights(static_cast<std::size_t>(out_ch) * in_ch * k, S(0)),
          bias(static_cast<std::size_t>(out_ch), S(0)) {}

    // runs before the vectors above are sized
    static int validated(int in_ch, int out_ch, int k) {
        if (in_ch <= 0 || out_ch <= 0) throw UsageError("conv channels must be positive");
        if (k <= 0 || k % 2 == 0) throw UsageError("conv kernel size must be odd and positive");
        if (k > 31) throw UsageError("conv kernel size above 31 is not supported");
        return in_ch;
    }

    S& w(int o, int c, int k) {
        return weights[(static_cast<std::size_t>(o) * in_channels + c) * kernel + k];
    }
    S w(int o, int c, int k) const {
        return weights[(static_cast<std::size_t>(o) * in_channels + c) * kernel + k];
    }
};

template <typename S>
Tensor<S> conv1d_forward(const Tensor<S>& input, const ConvLayer<S>& layer,
                         std::uint64_t* mac_counter = nullptr) {
    if (input.channels != layer.in_channels)
        throw StructuralError("conv1d: input has " + std::to_string(input.channels) +
                              " channels, layer expects " + std::to_string(layer.in_channels));
    for (const S v : input.values)
        if (!std::isfinite(static_cast<double>(v)))
            throw NumericError("conv1d: non-finite input value");
    PadBatch<S> pad;
    pad.configure(1, input.channels, input.length, layer.kernel);
    pad.fill(0, input.values.data(), static_cast<std::size_t>(input.length));
    Tensor<S> out(layer.out_channels, input.length);
    if (mac_counter) {
        conv_fwd_rows<S, 32, true>(pad.row(0, 0), layer.in_channels, pad.padlen,
                                   layer.weights.data(), layer.bias.data(),
                                   layer.out_channels, layer.kernel,
                                   out.values.data(), input.length, mac_counter);
    } else {
        conv_fwd_rows<S, 32>(pad.row(0, 0), layer.in_channels, pad.padlen,
                             layer.weights.data(), layer.bias.data(),
                             layer.out_channels, layer.kernel,
                             out.values.data(), input.length);
    }
    return out;
}

template <typename S>
struct ConvGrads {
    Tensor<S> input;
    std::vector<S> weights;
    std::vector<S> bias;
};

// Backward through one conv layer given the cached forward input.
// grad_input[c][s] = sum_{o,k} w[o][c][k] * grad_out[o][s + P - k], realized
// as a forward convolution of the padded output grads with transposed,
// kernel-flipped weights (identical arithmetic to the training path).
template <typename S>
ConvGrads<S> conv1d_backward(const Tensor<S>& grad_out, const Tensor<S>& cached_input,
                             const ConvLayer<S>& layer) {
    if (cached_input.values.empty())
        throw UsageError("conv1d_backward: missing cached forward input");
    if (cached_input.channels != layer.in_channels || grad_out.channels != layer.out_channels ||
        grad_out.length != cached_input.length)
        throw StructuralError("conv1d_backward: shapes inconsistent with the forward pass");

    const int L = cached_input.length;
    const int K = layer.kernel;
    ConvGrads<S> g;
    g.weights.assign(layer.weights.size(), S(0));
    g.bias.assign(layer.bias.size(), S(0));

    PadBatch<S> pad;
    pad.configure(1, layer.in_channels, L, K);
    pad.fill(0, cached_input.values.data(), static_cast<std::size_t>(L));
    conv_gw_dispatch(pad.row(0, 0), layer.in_channels, pad.padlen,
                     grad_out.values.data(), layer.out_channels, K, L, g.weights.data());
    conv_gb_rows(grad_out.values.data(), layer.out_channels, L, g.bias.data());

    std::vector<S> wflip(layer.weights.size());
    for (int o = 0; o < layer.out_channels; ++o)
        for (int c = 0; c < layer.in_channels; ++c)
            for (int k = 0; k < K; ++k)
                wflip[(static_cast<std::size_t>(c) * layer.out_channels + o) * K + k] =
                    layer.w(o, c, K - 1 - k);
    std::vector<S> zero_bias(static_cast<std::size_t>(layer.in_channels), S(0));
    PadBatch<S> gpad;
    gpad.configure(1, layer.out_channels, L, K);
    gpad.fill(0, grad_out.values.data(), static_cast<std::size_t>(L));
    g.input = Tensor<S>(layer.in_channels, L);
    conv_fwd_rows<S, 32>(gpad.row(0, 0), layer.out_channels, gpad.padlen,
                         wflip.data(), zero_bias.data(), layer.in_channels, K,
                         g.input.values.data(), L);
    return g;
}

// Per-channel batch normalization. Training mode normalizes with biased
// batch statistics and maintains running estimates; inference mode uses the
// stored running estimates only.
template <typename S>
struct BatchNormLayer {
    int channels = 0;
    std::vector<S> gamma, beta, running_mean, running_var;

    BatchNormLayer() = default;
    explicit BatchNormLayer(int channels_)
        : channels(channels_),
          gamma(channels_, S(1)), beta(channels_, S(0)),
          running_mean(channels_, S(0)), running_var(channels_, S(1)) {
        if (channels_ <= 0) throw UsageError("batchnorm channels must be positive");
    }
};

template <typename S>
void batchnorm_infer_rows(const S* in, const BatchNormLayer<S>& layer, int L, S* out) {
    for (int c = 0; c < layer.channels; ++c) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(layer.running_var[c]) + kBnEpsilon);
        const S scale = static_cast<S>(static_cast<double>(layer.gamma[c]) * inv);
        const S mean = layer.running_mean[c];
        const S shift = layer.beta[c];
        const S* irow = in + static_cast<std::size_t>(c) * L;
        S* orow = out + static_cast<std::size_t>(c) * L;
        for (int t = 0; t < L; ++t) orow[t] = scale * (irow[t] - mean) + shift;
    }
}

template <typename S>
Tensor<S> batchnorm_infer(const Tensor<S>& input, const BatchNormLayer<S>& layer) {
    if (input.channels != layer.channels)
        throw StructuralError("batchnorm: channel mismatch");
    Tensor<S> out(input.channels, input.length);
    batchnorm_infer_rows(input.values.data(), layer, input.length, out.values.data());
    return out;
}

// Training-mode forward over n sample-major samples, in place. Statistics
// are accumulated in double, two-pass, in fixed (sample, time) order.
// Writes normalized values to xhat (same layout) and 1/sqrt(var+eps) to
// inv_std[channel]; both are needed by the backward pass. Requires n >= 2.
template <typename S>
void bn_train_forward_raw(S* x, int n, int C, int L, BatchNormLayer<S>& layer,
                          S* xhat, double* inv_std) {
    if (C != layer.channels) throw StructuralError("batchnorm: channel mismatch");
    if (n < 2) throw UsageError("batchnorm training requires a batch of at least 2 samples");
    const std::size_t stride = static_cast<std::size_t>(C) * L;
    const double count = static_cast<double>(n) * L;
    for (int c = 0; c < C; ++c) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const S* row = x + i * stride + static_cast<std::size_t>(c) * L;
            for (int t = 0; t < L; ++t) sum += static_cast<double>(row[t]);
        }
        const double mean = sum / count;
        double sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const S* row = x + i * stride + static_cast<std::size_t>(c) * L;
            for (int t = 0; t < L; ++t) {
                const double d = static_cast<double>(row[t]) - mean;
                sq += d * d;
            }
        }
        const double var = sq / count; // biased
        const double inv = 1.0 / std::sqrt(var + kBnEpsilon);
        inv_std[c] = inv;

        const S mean_s = static_cast<S>(mean);
        const S inv_s = static_cast<S>(inv);
        const S g = layer.gamma[c];
        const S b = layer.beta[c];
        for (int i = 0; i < n; ++i) {
            S* row = x + i * stride + static_cast<std::size_t>(c) * L;
            S* xh = xhat + i * stride + static_cast<std::size_t>(c) * L;
            for (int t = 0; t < L; ++t) {
                const S h = (row[t] - mean_s) * inv_s;
                xh[t] = h;
                row[t] = g * h + b;
            }
        }

        layer.running_mean[c] = static_cast<S>(
            (1.0 - kBnMomentum) * static_cast<double>(layer.running_mean[c]) + kBnMomentum * mean);
        layer.running_var[c] = static_cast<S>(
            (1.0 - kBnMomentum) * static_cast<double>(layer.running_var[c]) + kBnMomentum * var);
    }
}

// Backward through training-mode batchnorm. g holds grad wrt the layer
// output on entry and grad wrt the layer input on exit. Gamma/beta grads
// are accumulated (+=). Per-channel reductions run in double, fixed order.
template <typename S>
void bn_backward_raw(S* g, const S* xhat, const double* inv_std, int n, int C, int L,
                     const BatchNormLayer<S>& layer, S* grad_gamma, S* grad_beta) {
    const std::size_t stride = static_cast<std::size_t>(C) * L;
    const double count = static_cast<double>(n) * L;
    for (int c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < n; ++i) {
            const S* grow = g + i * stride + static_cast<std::size_t>(c) * L;
            const S* xh = xhat + i * stride + static_cast<std::size_t>(c) * L;
            for (int t = 0; t < L; ++t) {
                const double dy = static_cast<double>(grow[t]);
                sum_dy += dy;
                sum_dy_xhat += dy * static_cast<double>(xh[t]);
            }
        }
        grad_beta[c] += static_cast<S>(sum_dy);
        grad_gamma[c] += static_cast<S>(sum_dy_xhat);

        // dx = gamma * inv / N * (N*dy - sum_dy - xhat * sum_dy_xhat)
        const S a = static_cast<S>(static_cast<double>(layer.gamma[c]) * inv_std[c] / count);
        const S nf = static_cast<S>(count);
        const S s1 = static_cast<S>(sum_dy);
        const S s2 = static_cast<S>(sum_dy_xhat);
        for (int i = 0; i < n; ++i) {
            S* grow = g + i * stride + static_cast<std::size_t>(c) * L;
            const S* xh = xhat + i * stride + static_cast<std::size_t>(c) * L;
            for (int t = 0; t < L; ++t)
                grow[t] = a * (nf * grow[t] - s1 - xh[t] * s2);
        }
    }
}

// Batch wrappers used by unit tests and small callers.
template <typename S>
struct BnCache {
    Batch<S> xhat;
    std::vector<double> inv_std;
};

template <typename S>
void batchnorm_train_forward(Batch<S>& x, BatchNormLayer<S>& layer, BnCache<S>& cache) {
    cache.xhat.resize(x.n, x.channels, x.length);
    cache.inv_std.assign(static_cast<std::size_t>(x.channels), 0.0);
    bn_train_forward_raw(x.values.data(), x.n, x.channels, x.length, layer,
                         cache.xhat.values.data(), cache.inv_std.data());
}

template <typename S>
void batchnorm_backward(Batch<S>& g, const BnCache<S>& cache, const BatchNormLayer<S>& layer,
                        S* grad_gamma, S* grad_beta) {
    bn_backward_raw(g.values.data(), cache.xhat.values.data(), cache.inv_std.data(),
                    g.n, g.channels, g.length, layer, grad_gamma, grad_beta);
}

template <typename S>
void relu_inplace(S* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i)
        if (!(data[i] > S(0))) data[i] = S(0);
}

template <typename S>
Tensor<S> relu(const Tensor<S>& input) {
    Tensor<S> out = input;
    relu_inplace(out.values.data(), out.values.size());
    return out;
}

// Gate grads by the post-activation values: act > 0 iff pre-activation > 0,
// and grads at exactly zero are dropped.
template <typename S>
void relu_backward_inplace(S* grad, const S* act, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i)
        if (!(act[i] > S(0))) grad[i] = S(0);
}

// Tensor form: pass grad where the forward input was > 0.
template <typename S>
Tensor<S> relu_backward(const Tensor<S>& grad, const Tensor<S>& input) {
    if (grad.channels != input.channels || grad.length != input.length)
        throw StructuralError("relu_backward: shape mismatch");
    Tensor<S> out = grad;
    relu_backward_inplace(out.values.data(), input.values.data(), out.values.size());
    return out;
}

// Mean over time, accumulated in double, ascending t.
template <typename S>
double gap_row(const S* row, int L) {
    double sum = 0.0;
    for (int t = 0; t < L; ++t) sum += static_cast<double>(row[t]);
    return sum / L;
}

// Mean over the single channel of a 1 x L tensor.
template <typename S>
S global_avg_pool(const Tensor<S>& input) {
    if (input.channels != 1)
        throw StructuralError("global_avg_pool: expected 1 channel, got " +
                              std::to_string(input.channels));
    return static_cast<S>(gap_row(input.row(0), input.length));
}

// d(mean)/dx spreads the upstream grad uniformly.
template <typename S>
Tensor<S> global_avg_pool_backward(S grad, int length) {
    Tensor<S> out(1, length);
    const S g = grad / static_cast<S>(length);
    for (auto& v : out.values) v = g;
    return out;
}

// Single-sample squared error and its gradient.
struct MseResult {
    double loss;
    double grad; // dL/dprediction
};

inline MseResult mse_loss(double prediction, double target) {
    const double d = prediction - target;
    return {d * d, 2.0 * d};
}

// Mean squared error over a batch of scalar predictions; optional gradient
// dL/dp_i = 2 (p_i - y_i) / n.
inline double mse_loss(const std::vector<double>& preds, const std::vector<double>& targets,
                       std::vector<double>* grad = nullptr) {
    if (preds.empty() || preds.size() != targets.size())
        throw UsageError("mse: prediction and target counts must match and be nonempty");
    const double n = static_cast<double>(preds.size());
    double sum = 0.0;
    if (grad) grad->resize(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = preds[i] - targets[i];
        sum += d * d;
        if (grad) (*grad)[i] = 2.0 * d / n;
    }
    return sum / n;
}

} // namespace pumpmon::nn
