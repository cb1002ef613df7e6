#include "pumpmon/nn/model.hpp"

namespace pumpmon::nn {

long long count_macs(const ModelConfig& config) {
    config.validate();
    long long total = 0;
    for (int i = 0; i < config.depth; ++i) {
        const long long in_ch = i == 0 ? config.in_channels() : config.channels;
        const long long out_ch = i == config.depth - 1 ? 1 : config.channels;
        total += static_cast<long long>(config.input_length) * config.kernel * in_ch * out_ch;
    }
    return total;
}

} // namespace pumpmon::nn
