#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/milp/backend.hpp"
#include "quantsp/milp/model.hpp"
#include "quantsp/milp/simplex.hpp"

namespace quantsp::milp {

// Exhaustive reference backend: walks every assignment of the free binary
// variables (Gray-code order so successive LPs differ by one bound) and takes
// the best continuous completion. Intended as a ground-truth oracle for small
// models; refuses anything with more than 20 free binaries.
class EnumerateBackend : public SolverBackend {
  public:
    std::string name() const override { return "enum"; }

    SolveResult solve(const MipModel& model, const SolveLimits& limits) override {
        auto start = std::chrono::steady_clock::now();
        auto elapsed = [&] {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        };
        double sign = model.sense() == Sense::Minimize ? 1.0 : -1.0;

        std::vector<int> free_bin;
        for (int j = 0; j < static_cast<int>(model.num_vars()); ++j) {
            const auto& v = model.var(j);
            if (v.kind == VarKind::Binary && v.lower < v.upper) free_bin.push_back(j);
        }
        if (free_bin.size() > 20)
            throw BackendUnavailable(
                "enumeration backend supports at most 20 free binary variables, got " +
                std::to_string(free_bin.size()));

        LpSolver lp(model);
        SolveResult res;
        double best_obj = kInf;  // internal minimize sense
        std::vector<double> best_x;
        bool unbounded = false;
        std::uint64_t total = 1ULL << free_bin.size();

        std::uint64_t prev_gray = 0;
        for (int j : free_bin) lp.set_bounds(j, 0.0, 0.0);
        for (std::uint64_t i = 0; i < total; ++i) {
            std::uint64_t gray = i ^ (i >> 1);
            std::uint64_t changed = gray ^ prev_gray;
            for (std::size_t k = 0; k < free_bin.size(); ++k)
                if (changed & (1ULL << k)) {
                    double v = (gray >> k) & 1 ? 1.0 : 0.0;
                    lp.set_bounds(free_bin[k], v, v);
                }
            prev_gray = gray;

            LpResult r = lp.solve();
            res.simplex_iterations += r.iterations;
            ++res.nodes;
            if (r.status == LpStatus::IterLimit)
                throw SolverError("simplex iteration limit during enumeration");
            if (r.status == LpStatus::Unbounded) unbounded = true;
            if (r.status == LpStatus::Optimal && r.objective < best_obj) {
                best_obj = r.objective;
                best_x = r.x;
            }
            if (limits.time_limit_seconds > 0 && elapsed() > limits.time_limit_seconds) {
                res.wall_seconds = elapsed();
                if (!best_x.empty()) {
                    res.status = SolveStatus::FeasibleLimit;
                    res.values = best_x;
                    res.objective = sign * best_obj;
                    res.message = "time limit during enumeration";
                    finalize_solution(model, res);
                } else {
                    res.status = SolveStatus::Error;
                    res.message = "time limit before any feasible assignment";
                }
                return res;
            }
        }

        res.wall_seconds = elapsed();
        if (unbounded) {
            res.status = SolveStatus::Unbounded;
            res.message = "continuous completion unbounded";
        } else if (best_x.empty()) {
            res.status = SolveStatus::Infeasible;
        } else {
            res.status = SolveStatus::Optimal;
            res.values = best_x;
            res.objective = sign * best_obj;
            res.bound = res.objective;
            res.gap = 0.0;
            finalize_solution(model, res);
        }
        return res;
    }
};

}  // namespace quantsp::milp
