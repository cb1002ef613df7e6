#pragma once

// Model files are JSON with a fixed field order. All learned values are
// 32-bit floats serialized in shortest round-trip decimal form, so
// save -> load -> save is byte-identical.

#include <string>

#include "pumpmon/nn/model.hpp"

namespace pumpmon::nn {

std::string model_to_json(const Model<float>& model);
Model<float> model_from_json(const std::string& text);

void save_model(const Model<float>& model, const std::string& path);
Model<float> load_model(const std::string& path);

} // namespace pumpmon::nn
