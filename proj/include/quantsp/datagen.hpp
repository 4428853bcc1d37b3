#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "quantsp/common.hpp"
#include "quantsp/milp/solver.hpp"
#include "quantsp/parallel.hpp"
#include "quantsp/problems/problem.hpp"
#include "quantsp/rng.hpp"

namespace quantsp {

struct Sample {
    std::vector<double> x;
    double v = 0.0;

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    std::string problem_name;
    std::uint64_t generator_seed = 0;
    std::string created;                  // ISO-8601 UTC, informational only
    std::vector<FirstStageVar> features;  // first-stage box, reused for scaling
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    std::size_t n_first() const { return features.size(); }
};

namespace detail {

inline std::string format_vec(const std::vector<double>& v) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ")";
    return os.str();
}

inline std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace detail

// Row i's draws depend on (seed, i) only, never on worker identity: the
// first-stage point comes from stream 2i and the scenario from stream 2i+1,
// so any row can be regenerated independently.
inline std::vector<double> regenerate_x(const TwoStageProblem& p, std::uint64_t seed,
                                        std::uint64_t index) {
    return sample_feasible_first_stage(p, derive_seed(seed, 2 * index));
}

inline Scenario regenerate_scenario(const TwoStageProblem& p, std::uint64_t seed,
                                    std::uint64_t index) {
    return p.sampler(1, derive_seed(seed, 2 * index + 1)).scenarios.at(0);
}

inline Sample generate_one(const TwoStageProblem& p, std::uint64_t seed,
                           std::uint64_t index, const milp::SolveContext& ctx) {
    Sample s;
    s.x = regenerate_x(p, seed, index);
    Scenario sc = regenerate_scenario(p, seed, index);
    try {
        s.v = second_stage_value(p, s.x, sc, ctx);
    } catch (const Error& e) {
        throw SolverError("sample " + std::to_string(index) + " at x=" +
                          detail::format_vec(s.x) + ", xi=" + detail::format_vec(sc.xi) +
                          ": " + e.what());
    }
    if (!std::isfinite(s.v))
        throw SolverError("sample " + std::to_string(index) + " at x=" +
                          detail::format_vec(s.x) + ", xi=" + detail::format_vec(sc.xi) +
                          ": non-finite value");
    return s;
}

inline Dataset generate(const TwoStageProblem& p, int n_samples, std::uint64_t seed,
                        int workers, const milp::SolveContext& ctx) {
    if (n_samples < 1) throw Error("dataset needs at least one sample");
    Dataset ds;
    ds.problem_name = p.name;
    ds.generator_seed = seed;
    ds.created = detail::utc_now();
    ds.features = p.first_stage;
    ds.samples.resize(n_samples);
    parallel_for(std::size_t(n_samples), workers, [&](std::size_t i) {
        ds.samples[i] = generate_one(p, seed, i, ctx);
    });
    return ds;
}

// Re-solves every (1/fraction)-th row from regenerated draws and insists the
// stored value still matches.
inline void spot_check(const Dataset& ds, const TwoStageProblem& p,
                       const milp::SolveContext& ctx, double fraction = 0.01) {
    if (ds.samples.empty()) return;
    std::size_t checks = std::max<std::size_t>(1, std::size_t(ds.size() * fraction));
    std::size_t stride = std::max<std::size_t>(1, ds.size() / checks);
    for (std::size_t i = 0; i < ds.size(); i += stride) {
        auto x = regenerate_x(p, ds.generator_seed, i);
        if (x != ds.samples[i].x)
            throw FormatError("row " + std::to_string(i) +
                              ": stored x does not match its regenerated draw");
        double v = second_stage_value(p, x, regenerate_scenario(p, ds.generator_seed, i), ctx);
        if (!rel_eq(v, ds.samples[i].v, 1e-6))
            throw FormatError("row " + std::to_string(i) + ": stored value " +
                              std::to_string(ds.samples[i].v) + " but re-solve gives " +
                              std::to_string(v));
    }
}

namespace detail {

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".json");
    return p;
}

inline std::string full_precision(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// CSV with header x_0..x_{n-1},value plus a JSON sidecar (same stem) holding
// the problem name, the master seed, and the first-stage box.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& csv_path) {
    for (const auto& s : ds.samples)
        if (s.x.size() != ds.n_first())
            throw DimensionMismatch("dataset rows disagree on dimension");

    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    for (std::size_t j = 0; j < ds.n_first(); ++j) csv << "x_" << j << ",";
    csv << "value\n";
    for (const auto& s : ds.samples) {
        for (double xj : s.x) csv << detail::full_precision(xj) << ",";
        csv << detail::full_precision(s.v) << "\n";
    }
    if (!csv.flush()) throw IoError("short write to " + csv_path.string());

    nlohmann::json meta;
    meta["schema"] = 1;
    meta["problem"] = ds.problem_name;
    meta["seed"] = ds.generator_seed;
    meta["created"] = ds.created;
    meta["count"] = ds.size();
    auto& feats = meta["features"] = nlohmann::json::array();
    for (const auto& f : ds.features)
        feats.push_back({{"name", f.name},
                         {"kind", f.kind == milp::VarKind::Binary ? "binary" : "continuous"},
                         {"lower", f.lower},
                         {"upper", f.upper}});
    std::ofstream side(detail::sidecar_path(csv_path));
    if (!side) throw IoError("cannot write " + detail::sidecar_path(csv_path).string());
    side << meta.dump(2) << "\n";
    if (!side.flush()) throw IoError("short write to " + detail::sidecar_path(csv_path).string());
}

inline Dataset load_dataset(const std::filesystem::path& csv_path) {
    std::ifstream side(detail::sidecar_path(csv_path));
    if (!side)
        throw IoError("missing dataset sidecar " + detail::sidecar_path(csv_path).string());
    nlohmann::json meta;
    try {
        side >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad dataset sidecar: " + std::string(e.what()));
    }

    Dataset ds;
    try {
        if (meta.at("schema").get<int>() != 1) throw FormatError("unknown dataset schema");
        ds.problem_name = meta.at("problem").get<std::string>();
        ds.generator_seed = meta.at("seed").get<std::uint64_t>();
        ds.created = meta.value("created", "");
        for (const auto& f : meta.at("features")) {
            FirstStageVar v;
            v.name = f.at("name").get<std::string>();
            v.kind = f.at("kind").get<std::string>() == "binary" ? milp::VarKind::Binary
                                                                 : milp::VarKind::Continuous;
            v.lower = f.at("lower").get<double>();
            v.upper = f.at("upper").get<double>();
            ds.features.push_back(std::move(v));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad dataset sidecar: " + std::string(e.what()));
    }

    std::ifstream csv(csv_path);
    if (!csv) throw IoError("cannot read " + csv_path.string());
    std::string line;
    if (!std::getline(csv, line)) throw FormatError("row 0: missing header");
    {
        std::ostringstream expect;
        for (std::size_t j = 0; j < ds.n_first(); ++j) expect << "x_" << j << ",";
        expect << "value";
        if (line != expect.str())
            throw FormatError("row 0: header is '" + line + "', expected '" +
                              expect.str() + "'");
    }
    std::size_t row = 0;
    while (std::getline(csv, line)) {
        ++row;
        if (line.empty()) continue;
        Sample s;
        std::size_t pos = 0, field = 0;
        const std::size_t want = ds.n_first() + 1;
        while (field < want) {
            std::size_t comma = line.find(',', pos);
            std::string cell = line.substr(pos, comma == std::string::npos
                                                    ? std::string::npos
                                                    : comma - pos);
            double value;
            try {
                std::size_t used = 0;
                value = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw FormatError("row " + std::to_string(row) + ": bad number '" +
                                  cell + "'");
            }
            if (!std::isfinite(value))
                throw FormatError("row " + std::to_string(row) + ": non-finite value");
            if (field + 1 < want) s.x.push_back(value);
            else s.v = value;
            ++field;
            if (comma == std::string::npos) {
                pos = line.size();
                break;
            }
            pos = comma + 1;
        }
        if (field != want || pos != line.size())
            throw FormatError("row " + std::to_string(row) + ": expected " +
                              std::to_string(want) + " columns");
        ds.samples.push_back(std::move(s));
    }
    if (meta.contains("count") && meta["count"].get<std::size_t>() != ds.size())
        throw FormatError("sidecar count " + meta["count"].dump() + " but csv has " +
                          std::to_string(ds.size()) + " rows");
    return ds;
}

}  // namespace quantsp
