#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "quantsp/common.hpp"
#include "quantsp/qnn/network.hpp"

namespace quantsp {

inline nlohmann::json network_to_json(const QuantileNetwork& net) {
    validate_network(net);
    nlohmann::json j;
    j["schema"] = 1;
    j["kind"] = to_string(net.kind);
    j["tau"] = net.tau;
    auto& layers = j["layers"] = nlohmann::json::array();
    for (const auto& l : net.layers)
        layers.push_back({{"n_in", l.n_in},
                          {"n_out", l.n_out},
                          {"weight", l.weight},
                          {"bias", l.bias}});
    auto& scales = j["input_scale"] = nlohmann::json::array();
    for (const auto& s : net.input_scale)
        scales.push_back({{"shift", s.shift}, {"scale", s.scale}});
    j["target_scale"] = {{"shift", net.target_scale.shift},
                         {"scale", net.target_scale.scale}};
    return j;
}

inline QuantileNetwork network_from_json(const nlohmann::json& j) {
    QuantileNetwork net;
    try {
        if (j.at("schema").get<int>() != 1) throw FormatError("unknown network schema");
        net.kind = net_kind_from_string(j.at("kind").get<std::string>());
        net.tau = j.at("tau").get<std::vector<double>>();
        for (const auto& l : j.at("layers")) {
            Layer layer;
            layer.n_in = l.at("n_in").get<int>();
            layer.n_out = l.at("n_out").get<int>();
            layer.weight = l.at("weight").get<std::vector<double>>();
            layer.bias = l.at("bias").get<std::vector<double>>();
            net.layers.push_back(std::move(layer));
        }
        for (const auto& s : j.at("input_scale"))
            net.input_scale.push_back(
                {s.at("shift").get<double>(), s.at("scale").get<double>()});
        net.target_scale = {j.at("target_scale").at("shift").get<double>(),
                            j.at("target_scale").at("scale").get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad network file: " + std::string(e.what()));
    }
    validate_network(net);
    return net;
}

inline void save_network(const QuantileNetwork& net, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << network_to_json(net).dump(2) << "\n";
    if (!f.flush()) throw IoError("short write to " + path.string());
}

inline QuantileNetwork load_network(const std::filesystem::path& path,
                                    std::optional<NetKind> expected = std::nullopt) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad network file " + path.string() + ": " + e.what());
    }
    QuantileNetwork net = network_from_json(j);
    if (expected && net.kind != *expected)
        throw KindMismatch("expected a " + std::string(to_string(*expected)) +
                           " network but " + path.string() + " holds a " +
                           to_string(net.kind));
    return net;
}

}  // namespace quantsp
