#pragma once

#include <fstream>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "quantsp/common.hpp"
#include "quantsp/problems/cflp.hpp"
#include "quantsp/problems/investment.hpp"

namespace quantsp {

inline nlohmann::json problem_to_json(const TwoStageProblem& p) { return p.instance; }

inline TwoStageProblem problem_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("problem"))
        throw FormatError("instance json must be an object with a 'problem' field");
    if (j.value("schema", 0) != 1)
        throw FormatError("unsupported instance schema");
    std::string kind = j["problem"].get<std::string>();
    if (kind == "investment") return make_investment();
    if (kind == "cflp") {
        auto inst = std::make_shared<CflpInstance>();
        try {
            inst->n = j.at("n").get<int>();
            inst->m = j.at("m").get<int>();
            inst->seed = j.at("seed").get<std::uint64_t>();
            inst->capacity = j.at("capacity").get<std::vector<double>>();
            inst->open_cost = j.at("open_cost").get<std::vector<double>>();
            inst->demand_mean = j.at("demand_mean").get<std::vector<double>>();
            inst->assign_cost = j.at("assign_cost").get<std::vector<std::vector<double>>>();
            inst->penalty = j.at("penalty").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("malformed cflp instance: ") + e.what());
        }
        if (static_cast<int>(inst->capacity.size()) != inst->n ||
            static_cast<int>(inst->demand_mean.size()) != inst->m ||
            static_cast<int>(inst->assign_cost.size()) != inst->n)
            throw FormatError("cflp instance arrays disagree with n and m");
        return make_cflp_from_instance(std::move(inst));
    }
    throw FormatError("unknown problem kind '" + kind + "'");
}

inline void save_instance(const TwoStageProblem& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << problem_to_json(p).dump(2) << "\n";
}

inline TwoStageProblem load_instance(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("instance file '" + path + "' is not valid json: " + e.what());
    }
    return problem_from_json(j);
}

inline nlohmann::json scenario_set_to_json(const ScenarioSet& set) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : set.scenarios) rows.push_back({{"xi", s.xi}, {"weight", s.weight}});
    return {{"schema", 1}, {"scenarios", std::move(rows)}};
}

// Weights must be positive; they are renormalized to sum to one on load so
// downstream evaluation can treat them as probabilities.
inline ScenarioSet scenario_set_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema", 0) != 1 || !j.contains("scenarios"))
        throw FormatError("scenario json must be an object with schema 1 and a 'scenarios' array");
    ScenarioSet set;
    double total = 0.0;
    try {
        for (const auto& row : j.at("scenarios")) {
            Scenario s;
            s.xi = row.at("xi").get<std::vector<double>>();
            s.weight = row.value("weight", 1.0);
            if (!std::isfinite(s.weight) || s.weight <= 0.0)
                throw FormatError("scenario weights must be finite and positive");
            for (double v : s.xi)
                if (!std::isfinite(v)) throw FormatError("scenario values must be finite");
            total += s.weight;
            set.scenarios.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed scenario set: ") + e.what());
    }
    if (set.scenarios.empty()) throw FormatError("scenario set is empty");
    for (auto& s : set.scenarios) s.weight /= total;
    return set;
}

inline void save_scenarios(const ScenarioSet& set, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << scenario_set_to_json(set).dump(2) << "\n";
}

inline ScenarioSet load_scenarios(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("scenario file '" + path + "' is not valid json: " + e.what());
    }
    return scenario_set_from_json(j);
}

// Named families for the command line: cflp-N-M (optionally cflp-N-M-sS for a
// different instance seed) and investment.
inline TwoStageProblem problem_from_name(const std::string& name) {
    if (name == "investment") return make_investment();
    if (name.rfind("cflp-", 0) == 0) {
        std::string rest = name.substr(5);
        auto dash = rest.find('-');
        if (dash != std::string::npos) {
            try {
                int n = std::stoi(rest.substr(0, dash));
                std::string tail = rest.substr(dash + 1);
                std::uint64_t seed = 1;
                auto sdash = tail.find("-s");
                if (sdash != std::string::npos) {
                    seed = std::stoull(tail.substr(sdash + 2));
                    tail = tail.substr(0, sdash);
                }
                int m = std::stoi(tail);
                return make_cflp(n, m, seed);
            } catch (const std::exception&) {
                throw Error("cannot parse cflp problem name '" + name + "'");
            }
        }
    }
    throw Error("unknown problem '" + name + "' (expected cflp-N-M or investment)");
}

}  // namespace quantsp
