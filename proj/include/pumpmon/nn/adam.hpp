#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pumpmon/errors.hpp"
#include "pumpmon/nn/model.hpp"

namespace pumpmon::nn {

struct TrainHyper {
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw UsageError("epochs must be at least 1");
        if (batch_size < 1) throw UsageError("batch size must be at least 1");
        if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw UsageError("adam betas must lie in [0, 1)");
        if (!(epsilon > 0.0)) throw UsageError("adam epsilon must be positive");
    }
};

// Flat views over every trainable tensor of a model, in the fixed update
// order: per layer ascending, conv weights, conv bias, then that block's
// batchnorm gamma and beta.
template <typename S>
struct ParamSet {
    std::vector<S*> data;
    std::vector<std::size_t> size;
    std::vector<std::string> name;

    void add(std::vector<S>& v, std::string n) {
        data.push_back(v.data());
        size.push_back(v.size());
        name.push_back(std::move(n));
    }
    std::size_t count() const { return data.size(); }
};

template <typename S>
ParamSet<S> collect_params(Model<S>& model) {
    ParamSet<S> ps;
    for (std::size_t i = 0; i < model.convs.size(); ++i) {
        const std::string tag = "conv" + std::to_string(i);
        ps.add(model.convs[i].weights, tag + ".weight");
        ps.add(model.convs[i].bias, tag + ".bias");
        if (i < model.bns.size()) {
            const std::string btag = "bn" + std::to_string(i);
            ps.add(model.bns[i].gamma, btag + ".gamma");
            ps.add(model.bns[i].beta, btag + ".beta");
        }
    }
    return ps;
}

// Gradient buffers matching a ParamSet, zeroed per batch.
template <typename S>
struct GradSet {
    std::vector<std::vector<S>> bufs;

    void init(const ParamSet<S>& ps) {
        bufs.resize(ps.count());
        for (std::size_t i = 0; i < ps.count(); ++i) bufs[i].assign(ps.size[i], S(0));
    }
    void zero() {
        for (auto& b : bufs) b.assign(b.size(), S(0));
    }
    S* operator[](std::size_t i) { return bufs[i].data(); }
};

template <typename S>
struct AdamState {
    long long t = 0; // completed steps
    std::vector<std::vector<S>> m, v;

    void init(const ParamSet<S>& ps) {
        t = 0;
        m.resize(ps.count());
        v.resize(ps.count());
        for (std::size_t i = 0; i < ps.count(); ++i) {
            m[i].assign(ps.size[i], S(0));
            v[i].assign(ps.size[i], S(0));
        }
    }
};

// One Adam update with bias correction. Gradients are checked for
// finiteness first; a bad tensor is reported by name.
template <typename S>
void adam_step(ParamSet<S>& params, GradSet<S>& grads, AdamState<S>& state,
               const TrainHyper& hyper) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    const S lr = static_cast<S>(hyper.learning_rate);
    const S b1 = static_cast<S>(hyper.beta1);
    const S b2 = static_cast<S>(hyper.beta2);
    const S eps = static_cast<S>(hyper.epsilon);
    const S ib1 = S(1) - b1;
    const S ib2 = S(1) - b2;
    const S ibc1 = static_cast<S>(1.0 / bc1);
    const S ibc2 = static_cast<S>(1.0 / bc2);

    for (std::size_t i = 0; i < params.count(); ++i) {
        S* g = grads[i];
        const std::size_t n = params.size[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(static_cast<double>(g[j])))
                throw NumericError("adam: non-finite gradient in " + params.name[i]);
        }
        S* p = params.data[i];
        S* m = state.m[i].data();
        S* v = state.v[i].data();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + ib1 * g[j];
            v[j] = b2 * v[j] + ib2 * g[j] * g[j];
            const S mhat = m[j] * ibc1;
            const S vhat = v[j] * ibc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

} // namespace pumpmon::nn
