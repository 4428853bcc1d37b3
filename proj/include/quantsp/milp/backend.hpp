#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/milp/model.hpp"

namespace quantsp::milp {

// Abstract solver adapter. Implementations must be cheap to construct so
// worker threads can hold one instance each; solve() is called on distinct
// models concurrently.
class SolverBackend {
  public:
    virtual ~SolverBackend() = default;
    virtual std::string name() const = 0;
    virtual SolveResult solve(const MipModel& model, const SolveLimits& limits) = 0;
};

// Shared acceptance check: a returned solution must satisfy bounds,
// integrality and constraints to 1e-6, and the reported objective is always
// recomputed from the model so backends cannot disagree about bookkeeping.
inline void finalize_solution(const MipModel& model, SolveResult& res) {
    if (!res.has_solution()) return;
    if (res.values.size() != model.num_vars())
        throw SolverError("backend returned a solution of the wrong dimension");
    for (std::size_t i = 0; i < res.values.size(); ++i)
        if (model.var(static_cast<std::int32_t>(i)).kind == VarKind::Binary)
            res.values[i] = std::round(res.values[i]);
    double viol = model.max_violation(res.values);
    if (viol > 1e-6)
        throw SolverError("backend returned an infeasible solution (violation " +
                          std::to_string(viol) + ")");
    res.objective = model.objective_value(res.values);
}

}  // namespace quantsp::milp
