#pragma once

#include <memory>
#include <string>
#include <vector>

#include "quantsp/problems/problem.hpp"

namespace quantsp {

// Capacitated facility location with single-source binary assignment. First
// stage opens facilities; the second stage assigns each customer to exactly
// one open facility or to the per-customer shortfall slack, whose penalty
// dominates every assignment cost, so recourse is complete. Demands are
// scenario-scaled around their nominal values.
struct CflpInstance {
    int n = 0;  // facilities
    int m = 0;  // customers
    std::vector<double> capacity;                 // s_i
    std::vector<double> open_cost;                // f_i
    std::vector<double> demand_mean;              // dbar_j
    std::vector<std::vector<double>> assign_cost; // c_ij, cost of serving j from i
    double penalty = 0.0;                         // rho, per unit of unmet demand
    std::uint64_t seed = 0;

    double demand(int j, const Scenario& sc) const { return demand_mean[j] * sc.xi[j]; }
};

inline SecondStageBlock cflp_second_stage(const CflpInstance& inst, milp::MipModel& model,
                                          const XAccess& x, const Scenario& sc,
                                          const std::string& tag) {
    SecondStageBlock block;
    std::vector<std::vector<milp::VarRef>> assign(inst.n);
    std::vector<milp::VarRef> slack(inst.m);
    for (int i = 0; i < inst.n; ++i) {
        assign[i].reserve(inst.m);
        for (int j = 0; j < inst.m; ++j) {
            auto v = model.add_binary("a" + tag + "_" + std::to_string(i) + "_" + std::to_string(j));
            assign[i].push_back(v);
            block.y_vars.push_back(v);
        }
    }
    for (int j = 0; j < inst.m; ++j) {
        slack[j] = model.add_continuous("u" + tag + "_" + std::to_string(j), 0.0, 1.0);
        block.y_vars.push_back(slack[j]);
    }
    for (int i = 0; i < inst.n; ++i) {
        milp::LinExpr cap;
        for (int j = 0; j < inst.m; ++j) cap.add(inst.demand(j, sc), assign[i][j]);
        cap.add(x[i], -inst.capacity[i]);
        model.add_constraint(cap, milp::Relation::LessEqual, 0.0);
    }
    for (int j = 0; j < inst.m; ++j) {
        milp::LinExpr row;
        for (int i = 0; i < inst.n; ++i) row.add(1.0, assign[i][j]);
        row.add(1.0, slack[j]);
        model.add_constraint(row, milp::Relation::Equal, 1.0);
    }
    for (int i = 0; i < inst.n; ++i)
        for (int j = 0; j < inst.m; ++j)
            block.cost.add(inst.assign_cost[i][j], assign[i][j]);
    for (int j = 0; j < inst.m; ++j)
        block.cost.add(inst.penalty * inst.demand(j, sc), slack[j]);
    return block;
}

inline TwoStageProblem make_cflp_from_instance(std::shared_ptr<const CflpInstance> inst);

// Random instance in the classic style: capacities uniform with an m/n scale
// factor, opening costs rising with capacity, assignment costs from uniform
// unit rates applied to nominal demand, and the shortfall penalty at five
// times the largest unit rate.
inline TwoStageProblem make_cflp(int n_facilities, int m_customers, std::uint64_t seed) {
    if (n_facilities <= 0 || m_customers <= 0)
        throw Error("cflp sizes must be positive");
    auto inst = std::make_shared<CflpInstance>();
    inst->n = n_facilities;
    inst->m = m_customers;
    inst->seed = seed;
    Rng rng(derive_seed(seed, 0xCF1F));
    double scale = static_cast<double>(m_customers) / n_facilities;
    double max_rate = 0.0;
    for (int i = 0; i < inst->n; ++i)
        inst->capacity.push_back(rng.uniform(50.0, 100.0) * scale);
    for (int i = 0; i < inst->n; ++i)
        inst->open_cost.push_back(rng.uniform(20.0, 40.0) + inst->capacity[i]);
    for (int j = 0; j < inst->m; ++j)
        inst->demand_mean.push_back(rng.uniform(5.0, 15.0));
    inst->assign_cost.assign(inst->n, std::vector<double>(inst->m));
    for (int i = 0; i < inst->n; ++i)
        for (int j = 0; j < inst->m; ++j) {
            double rate = rng.uniform(1.0, 3.0);
            max_rate = std::max(max_rate, rate);
            inst->assign_cost[i][j] = rate * inst->demand_mean[j];
        }
    inst->penalty = 5.0 * max_rate;
    return make_cflp_from_instance(std::move(inst));
}

inline TwoStageProblem make_cflp_from_instance(std::shared_ptr<const CflpInstance> inst) {
    TwoStageProblem p;
    p.name = "cflp-" + std::to_string(inst->n) + "-" + std::to_string(inst->m);
    p.sense = Sense::Minimize;
    p.scenario_dim = inst->m;
    p.complete_recourse = true;
    for (int i = 0; i < inst->n; ++i)
        p.first_stage.push_back({"open_" + std::to_string(i), milp::VarKind::Binary, 0.0, 1.0});
    p.first_stage_cost = inst->open_cost;

    p.instance["schema"] = 1;
    p.instance["problem"] = "cflp";
    p.instance["n"] = inst->n;
    p.instance["m"] = inst->m;
    p.instance["seed"] = inst->seed;
    p.instance["capacity"] = inst->capacity;
    p.instance["open_cost"] = inst->open_cost;
    p.instance["demand_mean"] = inst->demand_mean;
    p.instance["assign_cost"] = inst->assign_cost;
    p.instance["penalty"] = inst->penalty;

    int m = inst->m;
    p.second_stage = [inst](milp::MipModel& model, const XAccess& x, const Scenario& sc,
                            const std::string& tag) {
        return cflp_second_stage(*inst, model, x, sc, tag);
    };
    p.sampler = [m](int count, std::uint64_t seed) {
        ScenarioSet set;
        set.scenarios.resize(count);
        for (int w = 0; w < count; ++w) {
            Rng rng(derive_seed(seed, w));
            auto& sc = set.scenarios[w];
            sc.weight = 1.0 / count;
            sc.xi.resize(m);
            for (int j = 0; j < m; ++j) sc.xi[j] = rng.uniform(0.8, 1.2);
        }
        return set;
    };
    validate_first_stage(p);
    return p;
}

}  // namespace quantsp
