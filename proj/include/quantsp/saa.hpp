#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/milp/model.hpp"
#include "quantsp/milp/solver.hpp"
#include "quantsp/parallel.hpp"
#include "quantsp/problems/problem.hpp"

namespace quantsp {

struct RiskSpec {
    double lambda = 0.0;  // weight on the cvar term; 0 is risk neutral
    double alpha = 0.9;   // tail probability level

    bool averse() const { return lambda > 0.0; }
};

inline void validate_risk(const RiskSpec& r) {
    if (!(r.lambda >= 0.0)) throw Error("risk weight lambda must be nonnegative");
    if (!(r.alpha >= 0.0 && r.alpha < 1.0)) throw Error("tail level alpha must lie in [0, 1)");
}

// Expectation of the worst (1 - alpha) probability mass of an empirical
// distribution: the largest values when minimizing, the smallest when
// maximizing. alpha = 0 reduces to the plain mean. Weights need not be
// normalized; they are treated as relative masses.
inline double empirical_cvar(const std::vector<double>& values,
                             const std::vector<double>& weights, double alpha,
                             Sense sense) {
    if (values.empty()) throw Error("cvar of an empty sample");
    if (values.size() != weights.size())
        throw DimensionMismatch("cvar needs one weight per value");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw Error("tail level alpha must lie in [0, 1)");
    if (sense == Sense::Maximize) {
        std::vector<double> neg(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) neg[i] = -values[i];
        return -empirical_cvar(neg, weights, alpha, Sense::Minimize);
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw Error("scenario weights must be nonnegative");
        total += w;
    }
    if (total <= 0.0) throw Error("scenario weights must have positive mass");

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    // threshold: smallest value holding at least alpha of the mass below it
    double threshold = values[order.back()];
    double cum = 0.0;
    for (std::size_t i : order) {
        cum += weights[i];
        if (cum >= alpha * total - 1e-12 * total) {
            threshold = values[i];
            break;
        }
    }
    double excess = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        excess += weights[i] * std::max(0.0, values[i] - threshold);
    return threshold + excess / ((1.0 - alpha) * total);
}

struct TrueObjective {
    double total = 0.0;             // expectation_part + lambda * cvar_part
    double expectation_part = 0.0;  // first-stage cost plus expected recourse value
    double cvar_part = 0.0;         // first-stage cost plus recourse cvar
    std::vector<double> scenario_values;  // optimal recourse value per scenario
};

inline double first_stage_cost_value(const TwoStageProblem& p,
                                     const std::vector<double>& x) {
    if (x.size() != p.n_first())
        throw DimensionMismatch("first-stage vector has wrong dimension");
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += p.first_stage_cost[j] * x[j];
    return s;
}

// Exact risk-adjusted objective at a fixed first-stage decision. Scenario
// subproblems are independent once x is fixed, and every scenario value
// enters the objective with nonnegative weight, so solving them separately
// and applying the closed-form cvar reproduces the joint optimum.
inline TrueObjective evaluate_fixed_x(const TwoStageProblem& p,
                                      const std::vector<double>& x,
                                      const ScenarioSet& scenarios,
                                      const RiskSpec& risk,
                                      const milp::SolveContext& ctx,
                                      int workers = 1) {
    validate_risk(risk);
    if (scenarios.size() == 0) throw Error("evaluation needs at least one scenario");
    TrueObjective out;
    out.scenario_values.assign(scenarios.size(), 0.0);
    parallel_for(scenarios.size(), workers, [&](std::size_t i) {
        out.scenario_values[i] = second_stage_value(p, x, scenarios[i], ctx);
    });
    double fs = first_stage_cost_value(p, x);
    double mean = 0.0;
    std::vector<double> w(scenarios.size());
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        w[i] = scenarios[i].weight;
        mean += w[i] * out.scenario_values[i];
    }
    out.expectation_part = fs + mean;
    out.cvar_part = fs + empirical_cvar(out.scenario_values, w, risk.alpha, p.sense);
    out.total = out.expectation_part + risk.lambda * out.cvar_part;
    return out;
}

// Interval bound on a linear expression from the bounds of its variables.
inline std::pair<double, double> expr_interval(const milp::MipModel& m,
                                               const milp::LinExpr& e) {
    double lo = e.constant(), hi = e.constant();
    for (const auto& t : e.terms()) {
        const auto& v = m.var(t.var);
        double a = t.coef * v.lower, b = t.coef * v.upper;
        lo += std::min(a, b);
        hi += std::max(a, b);
    }
    return {lo, hi};
}

struct SaaModel {
    milp::MipModel model;
    std::vector<milp::VarRef> x;
    std::vector<std::vector<milp::VarRef>> y;  // per-scenario recourse variables
};

// Extensive form over the given scenarios: one copy of the recourse block per
// scenario, all sharing the first-stage variables. With lambda > 0 the cvar
// term is linearized with a threshold variable nu and per-scenario excess
// variables eta; nu gets interval-derived bounds so every column stays boxed.
inline SaaModel build_saa(const TwoStageProblem& p, const ScenarioSet& scenarios,
                          const RiskSpec& risk) {
    validate_risk(risk);
    if (scenarios.size() == 0) throw Error("extensive form needs at least one scenario");
    SaaModel out;
    auto& m = out.model;
    out.x = add_first_stage_vars(m, p);
    add_first_stage_constraints(m, p, out.x);

    milp::LinExpr obj;
    for (std::size_t j = 0; j < p.n_first(); ++j)
        obj.add((1.0 + risk.lambda) * p.first_stage_cost[j], out.x[j]);

    XAccess ax(out.x);
    std::vector<milp::LinExpr> cost(scenarios.size());
    out.y.reserve(scenarios.size());
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        auto block = p.second_stage(m, ax, scenarios[i], "s" + std::to_string(i));
        out.y.push_back(std::move(block.y_vars));
        cost[i] = std::move(block.cost);
        obj.add(cost[i], scenarios[i].weight);
    }

    if (risk.averse()) {
        double lo = kInf, hi = -kInf;
        for (const auto& c : cost) {
            auto [clo, chi] = expr_interval(m, c);
            lo = std::min(lo, clo);
            hi = std::max(hi, chi);
        }
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw Error("recourse cost must be bounded to linearize cvar");
        auto nu = m.add_continuous("nu", lo, hi);
        obj.add(risk.lambda, nu);
        double tail = risk.lambda / (1.0 - risk.alpha);
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            auto eta = m.add_continuous("eta_s" + std::to_string(i), 0.0, kInf);
            milp::LinExpr row = cost[i];
            row.add(-1.0, nu);
            if (p.sense == Sense::Minimize) {
                // eta >= cost - nu picks up the upper-tail excess
                row.add(-1.0, eta);
                m.add_constraint(std::move(row), milp::Relation::LessEqual, 0.0);
                obj.add(tail * scenarios[i].weight, eta);
            } else {
                // eta >= nu - cost picks up the lower-tail shortfall
                row.add(1.0, eta);
                m.add_constraint(std::move(row), milp::Relation::GreaterEqual, 0.0);
                obj.add(-tail * scenarios[i].weight, eta);
            }
        }
    }
    m.set_objective(std::move(obj), p.sense);
    return out;
}

// Extensive form with the first stage pinned to a given decision.
inline SaaModel build_saa_fixed(const TwoStageProblem& p, const std::vector<double>& x,
                                const ScenarioSet& scenarios, const RiskSpec& risk) {
    if (x.size() != p.n_first())
        throw DimensionMismatch("first-stage vector has wrong dimension");
    SaaModel saa = build_saa(p, scenarios, risk);
    for (std::size_t j = 0; j < p.n_first(); ++j) saa.model.fix(saa.x[j], x[j]);
    return saa;
}

struct SaaOptions {
    RiskSpec risk;
    int workers = 1;
    // The direct path evaluates a finite first-stage candidate set (problem
    // supplied, or all binary assignments) when the number of (candidate,
    // scenario) subproblems fits this budget.
    std::uint64_t enum_budget = 200000;
    bool force_extensive = false;
};

struct SaaSolution {
    std::vector<double> x;
    TrueObjective objective;  // recomputed by scenario-wise evaluation at x
    double model_objective = std::numeric_limits<double>::quiet_NaN();  // extensive path only
    std::string method;  // "enumeration" or "extensive"
    std::int64_t nodes = 0;
    double seconds = 0.0;
};

namespace detail {

inline bool first_stage_all_binary(const TwoStageProblem& p) {
    for (const auto& v : p.first_stage)
        if (v.kind != milp::VarKind::Binary) return false;
    return true;
}

inline bool satisfies_first_stage(const TwoStageProblem& p, const std::vector<double>& x) {
    for (const auto& c : p.first_stage_constraints) {
        double lhs = 0.0;
        for (const auto& [j, coef] : c.terms) lhs += coef * x[j];
        if (c.rel == milp::Relation::LessEqual && lhs > c.rhs + 1e-9) return false;
        if (c.rel == milp::Relation::GreaterEqual && lhs < c.rhs - 1e-9) return false;
        if (c.rel == milp::Relation::Equal && std::abs(lhs - c.rhs) > 1e-9) return false;
    }
    return true;
}

inline bool better(double a, double b, Sense sense) {
    return sense == Sense::Minimize ? a < b : a > b;
}

inline bool in_first_stage_box(const TwoStageProblem& p, const std::vector<double>& x) {
    if (x.size() != p.n_first()) return false;
    for (std::size_t j = 0; j < x.size(); ++j)
        if (x[j] < p.first_stage[j].lower || x[j] > p.first_stage[j].upper) return false;
    return true;
}

inline std::vector<std::vector<double>> binary_candidates(const TwoStageProblem& p) {
    const std::size_t n = p.n_first();
    std::vector<std::vector<double>> out;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        std::vector<double> x(n);
        for (std::size_t j = 0; j < n; ++j) x[j] = double((mask >> j) & 1u);
        out.push_back(std::move(x));
    }
    return out;
}

// Solves all (candidate, scenario) subproblems and keeps the best
// risk-adjusted total. Exact whenever the candidate set contains an optimum.
inline SaaSolution solve_saa_direct(const TwoStageProblem& p,
                                    const ScenarioSet& scenarios,
                                    const SaaOptions& opt,
                                    const milp::SolveContext& ctx,
                                    const std::vector<std::vector<double>>& candidates) {
    const std::size_t omega = scenarios.size();
    std::vector<double> values(candidates.size() * omega);
    parallel_for(values.size(), opt.workers, [&](std::size_t k) {
        values[k] = second_stage_value(p, candidates[k / omega], scenarios[k % omega], ctx);
    });

    std::vector<double> w(omega);
    for (std::size_t i = 0; i < omega; ++i) w[i] = scenarios[i].weight;

    SaaSolution best;
    bool have = false;
    for (std::size_t a = 0; a < candidates.size(); ++a) {
        TrueObjective obj;
        obj.scenario_values.assign(values.begin() + a * omega,
                                   values.begin() + (a + 1) * omega);
        double mean = 0.0;
        for (std::size_t i = 0; i < omega; ++i) mean += w[i] * obj.scenario_values[i];
        double fs = first_stage_cost_value(p, candidates[a]);
        obj.expectation_part = fs + mean;
        obj.cvar_part = fs + empirical_cvar(obj.scenario_values, w, opt.risk.alpha, p.sense);
        obj.total = obj.expectation_part + opt.risk.lambda * obj.cvar_part;
        if (!have || better(obj.total, best.objective.total, p.sense)) {
            best.x = candidates[a];
            best.objective = std::move(obj);
            have = true;
        }
    }
    best.model_objective = best.objective.total;
    return best;
}

}  // namespace detail

// Solves the scenario program exactly. When a finite first-stage candidate
// set is available (problem supplied, or all binary assignments) and fits the
// subproblem budget, candidates are evaluated directly; everything else goes
// through the extensive form. Either way the reported objective comes from
// re-evaluating the chosen x scenario by scenario.
inline SaaSolution solve_saa(const TwoStageProblem& p, const ScenarioSet& scenarios,
                             const SaaOptions& opt, const milp::SolveContext& ctx) {
    validate_risk(opt.risk);
    if (scenarios.size() == 0) throw Error("scenario program needs at least one scenario");
    auto start = std::chrono::steady_clock::now();
    SaaSolution sol;

    std::vector<std::vector<double>> cand;
    std::string method;
    if (!opt.force_extensive) {
        if (p.finite_candidates) {
            for (auto& x : p.finite_candidates(scenarios))
                if (detail::in_first_stage_box(p, x) && detail::satisfies_first_stage(p, x))
                    cand.push_back(std::move(x));
            method = "candidates";
        } else if (detail::first_stage_all_binary(p) && p.n_first() < 63 &&
                   (std::uint64_t{1} << p.n_first()) * scenarios.size() <= opt.enum_budget) {
            for (auto& x : detail::binary_candidates(p))
                if (detail::satisfies_first_stage(p, x)) cand.push_back(std::move(x));
            method = "enumeration";
        }
        if (cand.size() * scenarios.size() > opt.enum_budget) cand.clear();
    }

    if (!cand.empty()) {
        sol = detail::solve_saa_direct(p, scenarios, opt, ctx, cand);
        sol.method = method;
    } else {
        auto saa = build_saa(p, scenarios, opt.risk);
        auto res = ctx.solve_checked(saa.model, "extensive form for '" + p.name + "'");
        sol.x.resize(p.n_first());
        for (std::size_t j = 0; j < p.n_first(); ++j) {
            const auto& v = p.first_stage[j];
            sol.x[j] = std::clamp(res.values[saa.x[j].index], v.lower, v.upper);
        }
        sol.model_objective = res.objective;
        sol.nodes = res.nodes;
        sol.objective = evaluate_fixed_x(p, sol.x, scenarios, opt.risk, ctx, opt.workers);
        sol.method = "extensive";
    }
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
}

}  // namespace quantsp
