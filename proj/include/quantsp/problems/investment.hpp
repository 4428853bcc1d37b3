#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "quantsp/problems/problem.hpp"

namespace quantsp {

// Two-resource investment planning: continuous first-stage purchases reduce
// the budgets of a binary knapsack whose right-hand sides are the random
// budgets. Maximization; building nothing is always feasible because the
// scenario support keeps both budgets at or above the purchase box.
inline TwoStageProblem make_investment() {
    TwoStageProblem p;
    p.name = "investment";
    p.sense = Sense::Maximize;
    p.scenario_dim = 2;
    p.complete_recourse = true;
    p.first_stage = {{"x_0", milp::VarKind::Continuous, 0.0, 5.0},
                     {"x_1", milp::VarKind::Continuous, 0.0, 5.0}};
    p.first_stage_cost = {1.5, 4.0};
    p.instance["schema"] = 1;
    p.instance["problem"] = "investment";

    const std::vector<double> reward = {16.0, 19.0, 23.0, 28.0};
    const std::vector<double> row1 = {2.0, 3.0, 4.0, 5.0};
    const std::vector<double> row2 = {6.0, 1.0, 3.0, 2.0};

    p.second_stage = [reward, row1, row2](milp::MipModel& model, const XAccess& x,
                                          const Scenario& sc, const std::string& tag) {
        SecondStageBlock block;
        for (int k = 0; k < 4; ++k)
            block.y_vars.push_back(model.add_binary("y" + tag + "_" + std::to_string(k)));
        milp::LinExpr c1, c2;
        for (int k = 0; k < 4; ++k) {
            c1.add(row1[k], block.y_vars[k]);
            c2.add(row2[k], block.y_vars[k]);
        }
        c1.add(x[0], 1.0);
        c2.add(x[1], 1.0);
        model.add_constraint(c1, milp::Relation::LessEqual, sc.xi[0]);
        model.add_constraint(c2, milp::Relation::LessEqual, sc.xi[1]);
        for (int k = 0; k < 4; ++k) block.cost.add(reward[k], block.y_vars[k]);
        return block;
    };

    // The recourse value only changes when a budget crosses a subset sum of
    // its constraint row, so some optimum puts each coordinate at such a
    // threshold or at the box edge. That keeps exact solves on a finite grid.
    p.finite_candidates = [row1, row2](const ScenarioSet& set) {
        auto subset_sums = [](const std::vector<double>& w) {
            std::vector<double> sums = {0.0};
            for (double wi : w) {
                std::size_t n = sums.size();
                for (std::size_t i = 0; i < n; ++i) sums.push_back(sums[i] + wi);
            }
            std::sort(sums.begin(), sums.end());
            sums.erase(std::unique(sums.begin(), sums.end()), sums.end());
            return sums;
        };
        auto s1 = subset_sums(row1), s2 = subset_sums(row2);
        std::set<double> c1 = {0.0, 5.0}, c2 = {0.0, 5.0};
        for (const auto& sc : set.scenarios) {
            for (double s : s1)
                if (double t = sc.xi[0] - s; t > 0.0 && t < 5.0) c1.insert(t);
            for (double s : s2)
                if (double t = sc.xi[1] - s; t > 0.0 && t < 5.0) c2.insert(t);
        }
        std::vector<std::vector<double>> out;
        if (c1.size() * c2.size() > 100000) return out;
        out.reserve(c1.size() * c2.size());
        for (double a : c1)
            for (double b : c2) out.push_back({a, b});
        return out;
    };

    // Perfect-square counts (k >= 2) become a k-by-k lattice spanning the
    // support; anything else is an independent uniform sample.
    p.sampler = [](int count, std::uint64_t seed) {
        ScenarioSet set;
        set.scenarios.resize(count);
        int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
        if (k >= 2 && k * k == count) {
            double step = 10.0 / (k - 1);
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) {
                    auto& sc = set.scenarios[a * k + b];
                    sc.weight = 1.0 / count;
                    sc.xi = {5.0 + step * a, 5.0 + step * b};
                }
        } else {
            for (int w = 0; w < count; ++w) {
                Rng rng(derive_seed(seed, w));
                auto& sc = set.scenarios[w];
                sc.weight = 1.0 / count;
                sc.xi = {rng.uniform(5.0, 15.0), rng.uniform(5.0, 15.0)};
            }
        }
        return set;
    };
    validate_first_stage(p);
    return p;
}

}  // namespace quantsp
