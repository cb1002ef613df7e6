#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pumpmon/errors.hpp"
#include "pumpmon/nn/layers.hpp"
#include "pumpmon/prng.hpp"

namespace pumpmon::nn {

// Architecture of the anomaly scoring network:
//
//   input (3 channels raw, or 6 with the deviation channels)
//   -> conv(K) to `channels`, batchnorm, relu      x (depth - 1) blocks
//   -> conv(K) to 1 channel
//   -> global average pool -> scalar score
//
// Score < 0.5 reads as normal, otherwise abnormal. There is no output
// squashing; the head is linear.
struct ModelConfig {
    int depth = 4;
    int kernel = 11;
    int channels = 5;
    bool enhanced = false; // 6 input channels instead of 3
    int input_length = 800;

    int in_channels() const { return enhanced ? 6 : 3; }

    void validate() const {
        if (depth < 2) throw UsageError("model depth must be at least 2");
        if (kernel <= 0 || kernel % 2 == 0) throw UsageError("kernel size must be odd and positive");
        if (kernel > 31) throw UsageError("kernel size above 31 is not supported");
        if (channels < 1) throw UsageError("channel count must be at least 1");
        if (input_length < 1) throw UsageError("input length must be at least 1");
    }

    bool operator==(const ModelConfig&) const = default;
};

template <typename S>
struct Model {
    ModelConfig config;
    std::vector<ConvLayer<S>> convs;     // depth entries
    std::vector<BatchNormLayer<S>> bns;  // depth - 1 entries, after convs[0 .. depth-2]
    bool training = false;
};

template <typename S>
Model<S> make_model(const ModelConfig& config) {
    config.validate();
    Model<S> model;
    model.config = config;
    for (int i = 0; i < config.depth; ++i) {
        const int in_ch = i == 0 ? config.in_channels() : config.channels;
        const int out_ch = i == config.depth - 1 ? 1 : config.channels;
        model.convs.emplace_back(in_ch, out_ch, config.kernel);
        if (i < config.depth - 1) model.bns.emplace_back(out_ch);
    }
    return model;
}

// He-uniform conv weights: each layer's weights are drawn flat in
// [out][in][k] order from U(-b, b) with b = sqrt(6 / (in_ch * K)). Biases,
// batchnorm parameters and running stats keep their canonical init. One
// uniform01 draw per weight, layers in order: the stream position after
// init is part of the training determinism contract.
template <typename S>
void init_weights(Model<S>& model, Prng& rng) {
    for (auto& conv : model.convs) {
        const double bound = std::sqrt(6.0 / (static_cast<double>(conv.in_channels) * conv.kernel));
        for (auto& w : conv.weights) w = static_cast<S>(rng.uniform(-bound, bound));
    }
}

// Inference-mode forward to the scalar score. Rejects training-mode models
// and shape mismatches.
template <typename S>
S forward(const Model<S>& model, const Tensor<S>& input) {
    if (model.training)
        throw UsageError("forward: model is in training mode");
    if (input.channels != model.config.in_channels())
        throw StructuralError("forward: input has " + std::to_string(input.channels) +
                              " channels, model expects " +
                              std::to_string(model.config.in_channels()));
    if (input.length != model.config.input_length)
        throw StructuralError("forward: input length " + std::to_string(input.length) +
                              " does not match model input length " +
                              std::to_string(model.config.input_length));

    const int L = input.length;
    const int depth = model.config.depth;
    PadBatch<S> pad;
    std::vector<S> cur = input.values;
    std::vector<S> next;
    for (int i = 0; i < depth; ++i) {
        const auto& conv = model.convs[static_cast<std::size_t>(i)];
        pad.configure(1, conv.in_channels, L, conv.kernel);
        pad.fill(0, cur.data(), static_cast<std::size_t>(L));
        next.assign(static_cast<std::size_t>(conv.out_channels) * L, S(0));
        conv_fwd_rows<S, 32>(pad.row(0, 0), conv.in_channels, pad.padlen,
                             conv.weights.data(), conv.bias.data(),
                             conv.out_channels, conv.kernel, next.data(), L);
        if (i < depth - 1) {
            const auto& bn = model.bns[static_cast<std::size_t>(i)];
            batchnorm_infer_rows(next.data(), bn, L, next.data());
            relu_inplace(next.data(), next.size());
        }
        cur.swap(next);
    }
    return static_cast<S>(gap_row(cur.data(), L));
}

// score -> hard label. 0 = normal, 1 = abnormal.
inline int score_to_label(double score) { return score < 0.5 ? 0 : 1; }

// Total multiply-accumulates of one forward pass; convolutions only, which
// dominate everything else by orders of magnitude.
long long count_macs(const ModelConfig& config);

} // namespace pumpmon::nn
