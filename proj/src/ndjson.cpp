#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "pumpmon/data/dataset.hpp"

namespace pumpmon::data {

namespace {

void append_double(std::string& out, double v) {
    char buf[48];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

void append_axis(std::string& out, const char* name, const std::vector<double>& values) {
    out += ",\"";
    out += name;
    out += "\":[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(',');
        append_double(out, values[i]);
    }
    out.push_back(']');
}

std::vector<double> read_axis(const nlohmann::json& obj, const char* name,
                              const std::string& pump_id, long line) {
    const auto it = obj.find(name);
    if (it == obj.end())
        throw SchemaError("pump '" + pump_id + "': missing axis '" + name + "' (line " +
                          std::to_string(line) + ")");
    if (!it->is_array() || it->size() != static_cast<std::size_t>(kSampleLength))
        throw SchemaError("pump '" + pump_id + "': axis '" + name + "' must hold exactly " +
                          std::to_string(kSampleLength) + " numbers (line " +
                          std::to_string(line) + ")");
    std::vector<double> out(static_cast<std::size_t>(kSampleLength));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& v = (*it)[i];
        if (!v.is_number())
            throw SchemaError("pump '" + pump_id + "': non-numeric value in axis '" + name +
                              "' (line " + std::to_string(line) + ")");
        out[i] = v.get<double>();
        if (!std::isfinite(out[i]))
            throw SchemaError("pump '" + pump_id + "': non-finite value in axis '" + name +
                              "' (line " + std::to_string(line) + ")");
    }
    return out;
}

} // namespace

void save_dataset(const PumpDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot open for writing: " + path);
    std::string line;
    for (const auto& pump : ds.pumps) {
        for (const auto& s : pump.samples) {
            line.clear();
            line += "{\"pump_id\":\"";
            line += s.pump_id; // ids are generator/loader controlled, no escapes needed
            line += "\",\"label\":";
            line += std::to_string(s.label);
            append_axis(line, "x", s.x);
            append_axis(line, "y", s.y);
            append_axis(line, "z", s.z);
            line += "}\n";
            out.write(line.data(), static_cast<std::streamsize>(line.size()));
        }
    }
    if (!out) throw UsageError("write failed: " + path);
}

PumpDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open dataset file: " + path);
    PumpDataset ds;
    ds.provenance = path;
    std::string line;
    long line_no = 0;
    int last_pump = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            // parse_error for syntax, out_of_range for overflowing numbers
            throw ParseError(std::string("dataset: ") + e.what(), line_no);
        }
        if (!obj.is_object())
            throw ParseError("dataset: line is not a JSON object", line_no);

        const auto id_it = obj.find("pump_id");
        if (id_it == obj.end() || !id_it->is_string())
            throw SchemaError("dataset: missing or non-string pump_id (line " +
                              std::to_string(line_no) + ")");
        VibrationSample s;
        s.pump_id = id_it->get<std::string>();
        if (s.pump_id.empty())
            throw SchemaError("dataset: empty pump_id (line " + std::to_string(line_no) + ")");

        const auto label_it = obj.find("label");
        if (label_it == obj.end() || !label_it->is_number_integer())
            throw SchemaError("pump '" + s.pump_id + "': missing or non-integer label (line " +
                              std::to_string(line_no) + ")");
        s.label = label_it->get<int>();
        if (s.label != 0 && s.label != 1)
            throw SchemaError("pump '" + s.pump_id + "': label must be 0 or 1 (line " +
                              std::to_string(line_no) + ")");

        s.x = read_axis(obj, "x", s.pump_id, line_no);
        s.y = read_axis(obj, "y", s.pump_id, line_no);
        s.z = read_axis(obj, "z", s.pump_id, line_no);

        if (last_pump < 0 || ds.pumps[static_cast<std::size_t>(last_pump)].id != s.pump_id) {
            last_pump = ds.find_pump(s.pump_id);
            if (last_pump < 0) {
                ds.pumps.push_back({s.pump_id, {}});
                last_pump = static_cast<int>(ds.pumps.size()) - 1;
            }
        }
        ds.pumps[static_cast<std::size_t>(last_pump)].samples.push_back(std::move(s));
    }
    return ds;
}

} // namespace pumpmon::data
