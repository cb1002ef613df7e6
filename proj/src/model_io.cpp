#include "pumpmon/nn/model_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pumpmon/errors.hpp"

namespace pumpmon::nn {

namespace {

constexpr const char* kFormatTag = "pumpmon-model-v1";

void append_float(std::string& out, float v) {
    if (!std::isfinite(v)) throw NumericError("model serialization: non-finite parameter value");
    char buf[48];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

void append_array(std::string& out, const std::vector<float>& values) {
    out.push_back('[');
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(',');
        append_float(out, values[i]);
    }
    out.push_back(']');
}

const nlohmann::json& field(const nlohmann::json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end())
        throw SchemaError(std::string("model file: missing field '") + key + "'");
    return *it;
}

std::vector<float> float_array(const nlohmann::json& arr, const char* what, std::size_t expect) {
    if (!arr.is_array() || arr.size() != expect)
        throw SchemaError(std::string("model file: '") + what + "' must be an array of " +
                          std::to_string(expect) + " numbers");
    std::vector<float> out(expect);
    for (std::size_t i = 0; i < expect; ++i) {
        if (!arr[i].is_number())
            throw SchemaError(std::string("model file: non-numeric value in '") + what + "'");
        out[i] = static_cast<float>(arr[i].get<double>());
    }
    return out;
}

} // namespace

std::string model_to_json(const Model<float>& model) {
    const ModelConfig& cfg = model.config;
    std::string out;
    out.reserve(1024 + 16 * (model.convs.size() * 64));
    out += "{\n  \"format\": \"";
    out += kFormatTag;
    out += "\",\n  \"config\": {\"depth\": " + std::to_string(cfg.depth) +
           ", \"kernel\": " + std::to_string(cfg.kernel) +
           ", \"channels\": " + std::to_string(cfg.channels) +
           ", \"enhanced\": " + (cfg.enhanced ? std::string("true") : std::string("false")) +
           ", \"input_length\": " + std::to_string(cfg.input_length) + "},\n  \"layers\": [\n";
    bool first = true;
    for (std::size_t i = 0; i < model.convs.size(); ++i) {
        const auto& conv = model.convs[i];
        if (!first) out += ",\n";
        first = false;
        out += "    {\"type\": \"conv\", \"in_channels\": " + std::to_string(conv.in_channels) +
               ", \"out_channels\": " + std::to_string(conv.out_channels) +
               ", \"kernel\": " + std::to_string(conv.kernel) + ", \"weights\": ";
        append_array(out, conv.weights);
        out += ", \"bias\": ";
        append_array(out, conv.bias);
        out += "}";
        if (i < model.bns.size()) {
            const auto& bn = model.bns[i];
            out += ",\n    {\"type\": \"batchnorm\", \"channels\": " + std::to_string(bn.channels) +
                   ", \"gamma\": ";
            append_array(out, bn.gamma);
            out += ", \"beta\": ";
            append_array(out, bn.beta);
            out += ", \"running_mean\": ";
            append_array(out, bn.running_mean);
            out += ", \"running_var\": ";
            append_array(out, bn.running_var);
            out += "}";
        }
    }
    out += "\n  ]\n}\n";
    return out;
}

Model<float> model_from_json(const std::string& text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    if (!root.is_object()) throw SchemaError("model file: top level must be an object");
    if (field(root, "format").get<std::string>() != kFormatTag)
        throw SchemaError("model file: unknown format tag");

    const auto& jcfg = field(root, "config");
    ModelConfig cfg;
    cfg.depth = field(jcfg, "depth").get<int>();
    cfg.kernel = field(jcfg, "kernel").get<int>();
    cfg.channels = field(jcfg, "channels").get<int>();
    cfg.enhanced = field(jcfg, "enhanced").get<bool>();
    cfg.input_length = field(jcfg, "input_length").get<int>();
    try {
        cfg.validate();
    } catch (const UsageError& e) {
        throw SchemaError(std::string("model file: invalid config: ") + e.what());
    }

    Model<float> model = make_model<float>(cfg);
    const auto& layers = field(root, "layers");
    const std::size_t expected = model.convs.size() + model.bns.size();
    if (!layers.is_array() || layers.size() != expected)
        throw SchemaError("model file: expected " + std::to_string(expected) + " layer entries");

    std::size_t li = 0;
    for (std::size_t i = 0; i < model.convs.size(); ++i) {
        auto& conv = model.convs[i];
        const auto& jc = layers[li++];
        if (field(jc, "type").get<std::string>() != "conv")
            throw SchemaError("model file: expected conv layer at position " + std::to_string(li));
        if (field(jc, "in_channels").get<int>() != conv.in_channels ||
            field(jc, "out_channels").get<int>() != conv.out_channels ||
            field(jc, "kernel").get<int>() != conv.kernel)
            throw SchemaError("model file: conv layer shape does not match config");
        conv.weights = float_array(field(jc, "weights"), "weights", conv.weights.size());
        conv.bias = float_array(field(jc, "bias"), "bias", conv.bias.size());
        if (i < model.bns.size()) {
            auto& bn = model.bns[i];
            const auto& jb = layers[li++];
            if (field(jb, "type").get<std::string>() != "batchnorm")
                throw SchemaError("model file: expected batchnorm layer at position " +
                                  std::to_string(li));
            if (field(jb, "channels").get<int>() != bn.channels)
                throw SchemaError("model file: batchnorm width does not match config");
            const auto width = static_cast<std::size_t>(bn.channels);
            bn.gamma = float_array(field(jb, "gamma"), "gamma", width);
            bn.beta = float_array(field(jb, "beta"), "beta", width);
            bn.running_mean = float_array(field(jb, "running_mean"), "running_mean", width);
            bn.running_var = float_array(field(jb, "running_var"), "running_var", width);
        }
    }
    return model;
}

void save_model(const Model<float>& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot open for writing: " + path);
    const std::string text = model_to_json(model);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw UsageError("write failed: " + path);
}

Model<float> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open model file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

} // namespace pumpmon::nn
