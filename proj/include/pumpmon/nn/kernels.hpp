#pragma once

// Hot conv1d kernels. Everything here is written so the compiler can
// vectorize without changing arithmetic: each output element is always the
// same fixed-order sum (bias, then channel-major, kernel-minor), and the
// grad-weights kernel keeps four explicit partial accumulators that are
// combined in one documented order. Results are therefore bit-identical
// run-to-run and independent of tile membership or the padded kernel width
// chosen at dispatch.
//
// Layout contracts:
//   weights  flat [out_ch][in_ch][kernel]
//   padded input rows: `padlen` scalars per channel, sample data occupies
//     [0, L + K - 1) with (K-1)/2 zeros on each side, and at least
//     kPadSlack extra zeros at the end so the grad-weights kernel can read
//     a full padded-K vector at every position.

#include <cstdint>
#include <cstring>
#include <vector>

#include "pumpmon/nn/tensor.hpp"

namespace pumpmon::nn {

inline constexpr int kPadSlack = 40;

// Zero-padded batch: one row of `padlen` scalars per (sample, channel).
template <typename S>
struct PadBatch {
    int n = 0;
    int channels = 0;
    int length = 0;
    int kernel = 0;
    int padlen = 0;
    std::vector<S> values;

    void configure(int n_, int channels_, int length_, int kernel_) {
        n = n_;
        channels = channels_;
        length = length_;
        kernel = kernel_;
        padlen = length_ + kernel_ - 1 + kPadSlack;
        values.assign(static_cast<std::size_t>(n_) * channels_ * padlen, S(0));
    }

    S* row(int i, int c) {
        return values.data() + (static_cast<std::size_t>(i) * channels + c) * padlen;
    }
    const S* row(int i, int c) const {
        return values.data() + (static_cast<std::size_t>(i) * channels + c) * padlen;
    }

    // Copy one sample's channels into the padded rows. Only the data region
    // is overwritten; the zero margins are invariant.
    void fill(int i, const S* sample, std::size_t channel_stride) {
        const int offset = (kernel - 1) / 2;
        for (int c = 0; c < channels; ++c) {
            std::memcpy(row(i, c) + offset, sample + c * channel_stride,
                        sizeof(S) * static_cast<std::size_t>(length));
        }
    }
};

// Forward convolution for one sample: out[o][t] = b[o] + sum_{c,k} w[o][c][k] *
// pad[c][t + k]. Register tile of TB outputs; the scalar tail uses the same
// per-element summation order. With Count=true every executed
// multiply-accumulate is tallied into *macs (block increments are exact:
// each inner iteration performs exactly one multiply).
template <typename S, int TB = 32, bool Count = false>
void conv_fwd_rows(const S* pad, int in_ch, int padlen,
                   const S* w, const S* b, int out_ch, int K,
                   S* out, int L, std::uint64_t* macs = nullptr) {
    for (int o = 0; o < out_ch; ++o) {
        const S bias = b[o];
        S* orow = out + static_cast<std::size_t>(o) * L;
        int t0 = 0;
        for (; t0 + TB <= L; t0 += TB) {
            S acc[TB];
            for (int j = 0; j < TB; ++j) acc[j] = bias;
            for (int c = 0; c < in_ch; ++c) {
                const S* prow = pad + static_cast<std::size_t>(c) * padlen + t0;
                const S* wrow = w + (static_cast<std::size_t>(o) * in_ch + c) * K;
                for (int k = 0; k < K; ++k) {
                    const S wv = wrow[k];
                    const S* in = prow + k;
#pragma omp simd
                    for (int j = 0; j < TB; ++j) acc[j] += wv * in[j];
                    if constexpr (Count) *macs += TB;
                }
            }
            for (int j = 0; j < TB; ++j) orow[t0 + j] = acc[j];
        }
        for (; t0 < L; ++t0) {
            S acc = bias;
            for (int c = 0; c < in_ch; ++c) {
                const S* prow = pad + static_cast<std::size_t>(c) * padlen + t0;
                const S* wrow = w + (static_cast<std::size_t>(o) * in_ch + c) * K;
                for (int k = 0; k < K; ++k) {
                    acc += wrow[k] * prow[k];
                    if constexpr (Count) ++*macs;
                }
            }
            orow[t0] = acc;
        }
    }
}

// Weight gradient for one sample, accumulated (+=) into gw[o][c][k] =
// sum_t go[o][t] * pad[c][t + k]. Four partial chains split t by residue
// mod 4 and are combined as (p0 + p1) + (p2 + p3); the tail (t not covered
// by the unrolled loop) lands in p0. KP >= K is only a padding width for
// vector-friendly fixed-trip inner loops; slots k >= K are never read back,
// so the result does not depend on KP.
template <typename S, int KP>
void conv_gw_rows(const S* pad, int in_ch, int padlen,
                  const S* go, int out_ch, int K, int L, S* gw) {
    for (int o = 0; o < out_ch; ++o) {
        const S* grow = go + static_cast<std::size_t>(o) * L;
        for (int c = 0; c < in_ch; ++c) {
            const S* prow = pad + static_cast<std::size_t>(c) * padlen;
            S p0[KP] = {}, p1[KP] = {}, p2[KP] = {}, p3[KP] = {};
            int t = 0;
            for (; t + 4 <= L; t += 4) {
                const S g0 = grow[t], g1 = grow[t + 1];
                const S g2 = grow[t + 2], g3 = grow[t + 3];
                const S* i0 = prow + t;
#pragma omp simd
                for (int k = 0; k < KP; ++k) {
                    p0[k] += g0 * i0[k];
                    p1[k] += g1 * i0[k + 1];
                    p2[k] += g2 * i0[k + 2];
                    p3[k] += g3 * i0[k + 3];
                }
            }
            for (; t < L; ++t) {
                const S g0 = grow[t];
                const S* i0 = prow + t;
                for (int k = 0; k < K; ++k) p0[k] += g0 * i0[k];
            }
            S* gwrow = gw + (static_cast<std::size_t>(o) * in_ch + c) * K;
            for (int k = 0; k < K; ++k)
                gwrow[k] += (p0[k] + p1[k]) + (p2[k] + p3[k]);
        }
    }
}

// picks the padded width; K <= 31 is enforced by ModelConfig validation
template <typename S>
void conv_gw_dispatch(const S* pad, int in_ch, int padlen,
                      const S* go, int out_ch, int K, int L, S* gw) {
    if (K <= 8)
        conv_gw_rows<S, 8>(pad, in_ch, padlen, go, out_ch, K, L, gw);
    else if (K <= 16)
        conv_gw_rows<S, 16>(pad, in_ch, padlen, go, out_ch, K, L, gw);
    else if (K <= 24)
        conv_gw_rows<S, 24>(pad, in_ch, padlen, go, out_ch, K, L, gw);
    else
        conv_gw_rows<S, 32>(pad, in_ch, padlen, go, out_ch, K, L, gw);
}

// gb[o] += sum_t go[o][t], ascending t
template <typename S>
void conv_gb_rows(const S* go, int out_ch, int L, S* gb) {
    for (int o = 0; o < out_ch; ++o) {
        const S* grow = go + static_cast<std::size_t>(o) * L;
        S acc = S(0);
        for (int t = 0; t < L; ++t) acc += grow[t];
        gb[o] += acc;
    }
}

} // namespace pumpmon::nn
