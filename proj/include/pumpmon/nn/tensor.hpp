#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pumpmon/errors.hpp"

namespace pumpmon::nn {

// Channels-major 1-D signal: values[c * length + t]. Scalar type is a
// template parameter; production code runs float, gradient checks run
// double.
template <typename S>
struct Tensor {
    int channels = 0;
    int length = 0;
    std::vector<S> values;

    Tensor() = default;
    Tensor(int channels_, int length_)
        : channels(channels_), length(length_),
          values(static_cast<std::size_t>(channels_) * length_, S(0)) {
        if (channels_ <= 0 || length_ <= 0)
            throw UsageError("tensor dimensions must be positive");
    }

    S& at(int c, int t) { return values[static_cast<std::size_t>(c) * length + t]; }
    S at(int c, int t) const { return values[static_cast<std::size_t>(c) * length + t]; }

    S* row(int c) { return values.data() + static_cast<std::size_t>(c) * length; }
    const S* row(int c) const { return values.data() + static_cast<std::size_t>(c) * length; }
};

// A batch of equally shaped tensors, sample-major: values[(i*channels + c)*length + t].
template <typename S>
struct Batch {
    int n = 0;
    int channels = 0;
    int length = 0;
    std::vector<S> values;

    Batch() = default;
    Batch(int n_, int channels_, int length_)
        : n(n_), channels(channels_), length(length_),
          values(static_cast<std::size_t>(n_) * channels_ * length_, S(0)) {
        if (n_ <= 0 || channels_ <= 0 || length_ <= 0)
            throw UsageError("batch dimensions must be positive");
    }

    void resize(int n_, int channels_, int length_) {
        n = n_;
        channels = channels_;
        length = length_;
        values.assign(static_cast<std::size_t>(n_) * channels_ * length_, S(0));
    }

    S& at(int i, int c, int t) {
        return values[(static_cast<std::size_t>(i) * channels + c) * length + t];
    }
    S at(int i, int c, int t) const {
        return values[(static_cast<std::size_t>(i) * channels + c) * length + t];
    }

    S* row(int i, int c) {
        return values.data() + (static_cast<std::size_t>(i) * channels + c) * length;
    }
    const S* row(int i, int c) const {
        return values.data() + (static_cast<std::size_t>(i) * channels + c) * length;
    }

    std::size_t sample_stride() const {
        return static_cast<std::size_t>(channels) * length;
    }
};

} // namespace pumpmon::nn
