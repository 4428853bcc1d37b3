#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include "quantsp/common.hpp"
#include "quantsp/milp/backend.hpp"
#include "quantsp/milp/branch_and_bound.hpp"
#include "quantsp/milp/enumerator.hpp"

namespace quantsp::milp {

inline std::unique_ptr<SolverBackend> make_backend(const std::string& name) {
    if (name == "bb") return std::make_unique<BranchAndBoundBackend>();
    if (name == "enum") return std::make_unique<EnumerateBackend>();
    throw BackendUnavailable("unknown solver backend '" + name +
                             "' (available: bb, enum)");
}

// QUANTSP_SOLVER overrides whatever the configuration asked for.
inline std::string backend_name(const std::string& configured = "bb") {
    if (const char* env = std::getenv("QUANTSP_SOLVER"); env && *env) return env;
    return configured.empty() ? "bb" : configured;
}

// Per-worker solve handle: cheap to copy, safe to use from multiple threads
// as long as each thread works on its own models.
struct SolveContext {
    std::string backend = backend_name();
    SolveLimits limits;

    SolveResult solve(const MipModel& model) const {
        return make_backend(backend)->solve(model, limits);
    }

    // Solve and insist on a usable solution.
    SolveResult solve_checked(const MipModel& model, const std::string& what) const {
        SolveResult r = solve(model);
        if (!r.has_solution())
            throw SolverError(what + ": solver returned " +
                              std::string(to_string(r.status)) +
                              (r.message.empty() ? "" : " (" + r.message + ")"));
        return r;
    }
};

}  // namespace quantsp::milp
