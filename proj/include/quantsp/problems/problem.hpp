#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "quantsp/common.hpp"
#include "quantsp/milp/model.hpp"
#include "quantsp/milp/solver.hpp"
#include "quantsp/rng.hpp"

namespace quantsp {

struct Scenario {
    std::vector<double> xi;
    double weight = 1.0;
};

struct ScenarioSet {
    std::vector<Scenario> scenarios;
    std::size_t size() const { return scenarios.size(); }
    const Scenario& operator[](std::size_t i) const { return scenarios[i]; }
};

struct FirstStageVar {
    std::string name;
    milp::VarKind kind;
    double lower;
    double upper;
};

struct FirstStageConstraint {
    std::vector<std::pair<int, double>> terms;  // (first-stage index, coefficient)
    milp::Relation rel;
    double rhs;
};

// First-stage decisions enter second-stage rows either as model variables (in
// an extensive form) or as fixed numbers (single-scenario solves). The bridge
// hands the builder an expression either way.
class XAccess {
  public:
    explicit XAccess(const std::vector<milp::VarRef>& vars) : vars_(&vars) {}
    explicit XAccess(const std::vector<double>& values) : values_(&values) {}

    milp::LinExpr operator[](std::size_t j) const {
        if (vars_) return milp::LinExpr((*vars_)[j]);
        return milp::LinExpr((*values_)[j]);
    }
    bool fixed() const { return values_ != nullptr; }

  private:
    const std::vector<milp::VarRef>* vars_ = nullptr;
    const std::vector<double>* values_ = nullptr;
};

struct SecondStageBlock {
    std::vector<milp::VarRef> y_vars;
    milp::LinExpr cost;  // recourse objective in the problem's own sense
};

using SecondStageBuilder =
    std::function<SecondStageBlock(milp::MipModel&, const XAccess&, const Scenario&, const std::string& tag)>;
using ScenarioSampler = std::function<ScenarioSet(int count, std::uint64_t seed)>;
using CandidateHook = std::function<std::vector<std::vector<double>>(const ScenarioSet&)>;

struct TwoStageProblem {
    std::string name;
    Sense sense = Sense::Minimize;
    std::vector<FirstStageVar> first_stage;
    std::vector<double> first_stage_cost;
    std::vector<FirstStageConstraint> first_stage_constraints;
    int scenario_dim = 0;
    bool complete_recourse = false;
    SecondStageBuilder second_stage;
    ScenarioSampler sampler;
    // Optional: a finite set of first-stage decisions guaranteed to contain
    // an optimal solution of the scenario program for any risk weighting
    // (possible when the recourse value is piecewise constant in X). May
    // return an empty set when the scenarios would make it too large.
    CandidateHook finite_candidates;
    nlohmann::json instance;  // full coefficient data, round-trippable

    std::size_t n_first() const { return first_stage.size(); }
};

inline void add_first_stage_constraints(milp::MipModel& model,
                                        const TwoStageProblem& p,
                                        const std::vector<milp::VarRef>& x) {
    for (const auto& c : p.first_stage_constraints) {
        milp::LinExpr e;
        for (const auto& [j, coef] : c.terms) e.add(coef, x[j]);
        model.add_constraint(e, c.rel, c.rhs);
    }
}

inline std::vector<milp::VarRef> add_first_stage_vars(milp::MipModel& model,
                                                      const TwoStageProblem& p) {
    std::vector<milp::VarRef> x;
    x.reserve(p.n_first());
    for (const auto& v : p.first_stage) x.push_back(model.add_var(v.name, v.kind, v.lower, v.upper));
    return x;
}

// Nonemptiness check for the first-stage region, run once when a problem is
// constructed.
inline void validate_first_stage(const TwoStageProblem& p) {
    milp::MipModel m;
    auto x = add_first_stage_vars(m, p);
    add_first_stage_constraints(m, p, x);
    m.set_objective(milp::LinExpr(0.0), Sense::Minimize);
    auto res = milp::SolveContext{"bb"}.solve(m);
    if (res.status != milp::SolveStatus::Optimal)
        throw Error("problem '" + p.name + "': first-stage region is empty");
}

inline ScenarioSet sample_scenarios(const TwoStageProblem& p, int count,
                                    std::uint64_t seed) {
    if (count <= 0) throw Error("scenario count must be positive");
    ScenarioSet s = p.sampler(count, seed);
    double total = 0.0;
    for (const auto& sc : s.scenarios) {
        if (static_cast<int>(sc.xi.size()) != p.scenario_dim)
            throw DimensionMismatch("sampled scenario has wrong dimension");
        total += sc.weight;
    }
    if (!approx_eq(total, 1.0, 1e-9))
        throw Error("scenario weights must sum to one");
    return s;
}

// Rejection sampling over the first-stage box, filtered by the first-stage
// constraints. Binary coordinates are fair coin flips.
inline std::vector<double> sample_feasible_first_stage(const TwoStageProblem& p,
                                                       std::uint64_t seed) {
    Rng rng(seed);
    const int max_attempts = 10000;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<double> x(p.n_first());
        for (std::size_t j = 0; j < p.n_first(); ++j) {
            const auto& v = p.first_stage[j];
            x[j] = v.kind == milp::VarKind::Binary ? (rng.bernoulli(0.5) ? 1.0 : 0.0)
                                                   : rng.uniform(v.lower, v.upper);
        }
        bool ok = true;
        for (const auto& c : p.first_stage_constraints) {
            double lhs = 0.0;
            for (const auto& [j, coef] : c.terms) lhs += coef * x[j];
            if (c.rel == milp::Relation::LessEqual && lhs > c.rhs + 1e-9) ok = false;
            if (c.rel == milp::Relation::GreaterEqual && lhs < c.rhs - 1e-9) ok = false;
            if (c.rel == milp::Relation::Equal && std::abs(lhs - c.rhs) > 1e-9) ok = false;
            if (!ok) break;
        }
        if (ok) return x;
    }
    throw SamplingExhausted("no feasible first-stage point in " +
                            std::to_string(max_attempts) + " draws for '" + p.name + "'");
}

struct SecondStageModel {
    milp::MipModel model;
    SecondStageBlock block;
};

// Single-scenario second-stage program at a fixed first-stage decision.
inline SecondStageModel second_stage_model(const TwoStageProblem& p,
                                           const std::vector<double>& x,
                                           const Scenario& scenario) {
    if (x.size() != p.n_first())
        throw DimensionMismatch("first-stage vector has wrong dimension");
    if (static_cast<int>(scenario.xi.size()) != p.scenario_dim)
        throw DimensionMismatch("scenario has wrong dimension");
    SecondStageModel out;
    XAccess ax(x);
    out.block = p.second_stage(out.model, ax, scenario, "");
    out.model.set_objective(out.block.cost, p.sense);
    return out;
}

// Optimal recourse value V(x, xi).
inline double second_stage_value(const TwoStageProblem& p, const std::vector<double>& x,
                                 const Scenario& scenario, const milp::SolveContext& ctx) {
    SecondStageModel ss = second_stage_model(p, x, scenario);
    auto res = ctx.solve(ss.model);
    if (res.status != milp::SolveStatus::Optimal)
        throw SolverError("second-stage solve for '" + p.name + "' returned " +
                          std::string(milp::to_string(res.status)));
    return res.objective;
}

}  // namespace quantsp
