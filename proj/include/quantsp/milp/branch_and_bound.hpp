#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/milp/backend.hpp"
#include "quantsp/milp/model.hpp"
#include "quantsp/milp/simplex.hpp"

namespace quantsp::milp {

// Depth-first branch and bound on the binary variables. Works internally in
// minimize sense; maximization is negated on the way in and restored in the
// result. Node LPs warm start from the parent basis. When a relaxation comes
// out integral, the binaries are fixed at their rounded values and the
// continuous part is re-optimized, so incumbents are exactly feasible rather
// than snapped.
class BranchAndBoundBackend : public SolverBackend {
    static constexpr double kIntTol = 1e-6;

    struct Frame {
        int var;             // structural column being branched on
        double saved_lo, saved_up;
        double node_obj;     // LP bound of the branching node (internal sense)
        double frac;         // fractional part at branching time
        int next_child = 0;  // 0: first child pending, 1: second, 2: done
        int first_dir;       // 1 = fix to 1 first, 0 = fix to 0 first
    };

    struct Pseudocost {
        double up_sum = 0.0, down_sum = 0.0;
        int up_cnt = 0, down_cnt = 0;
    };

  public:
    std::string name() const override { return "bb"; }

    SolveResult solve(const MipModel& model, const SolveLimits& limits) override {
        auto start = std::chrono::steady_clock::now();
        auto elapsed = [&] {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        };
        double sign = model.sense() == Sense::Minimize ? 1.0 : -1.0;

        LpSolver lp(model);
        std::vector<int> binaries;
        for (int j = 0; j < static_cast<int>(model.num_vars()); ++j)
            if (model.var(j).kind == VarKind::Binary) binaries.push_back(j);

        std::vector<double> best_x;
        double best_obj = kInf;  // internal sense
        bool have_incumbent = false;
        std::int64_t nodes = 0, lp_iters = 0;
        std::vector<Frame> stack;
        std::vector<Pseudocost> pc(model.num_vars());

        auto cutoff = [&] {
            if (!have_incumbent) return kInf;
            return best_obj - 1e-9 * std::max(1.0, std::abs(best_obj));
        };

        auto try_incumbent = [&](const LpResult& node) {
            // fix the remaining binaries at their rounded LP values and
            // re-optimize the continuous part exactly
            std::vector<std::pair<int, std::pair<double, double>>> saved;
            for (int j : binaries) {
                double lo = lp.col_lower(j), up = lp.col_upper(j);
                if (lo == up) continue;
                double v = std::round(node.x[j]);
                saved.push_back({j, {lo, up}});
                lp.set_bounds(j, v, v);
            }
            LpResult fixed = lp.solve();
            lp_iters += fixed.iterations;
            if (fixed.status == LpStatus::Optimal && fixed.objective < best_obj) {
                best_obj = fixed.objective;
                best_x = fixed.x;
                have_incumbent = true;
            }
            for (const auto& [j, b] : saved) lp.set_bounds(j, b.first, b.second);
        };

        auto select_branch = [&](const LpResult& node) {
            // pseudocost product score with most-fractional fallback through
            // the running averages
            double up_avg = 1.0, down_avg = 1.0;
            int up_n = 0, down_n = 0;
            for (int j : binaries) {
                if (pc[j].up_cnt) { up_avg += pc[j].up_sum / pc[j].up_cnt; ++up_n; }
                if (pc[j].down_cnt) { down_avg += pc[j].down_sum / pc[j].down_cnt; ++down_n; }
            }
            up_avg /= (1 + up_n);
            down_avg /= (1 + down_n);
            int best_var = -1;
            double best_score = -1.0;
            for (int j : binaries) {
                if (lp.col_lower(j) == lp.col_upper(j)) continue;
                double f = node.x[j] - std::floor(node.x[j]);
                double pup = pc[j].up_cnt ? pc[j].up_sum / pc[j].up_cnt : up_avg;
                double pdown = pc[j].down_cnt ? pc[j].down_sum / pc[j].down_cnt : down_avg;
                double score =
                    std::max(pup * (1.0 - f), 1e-8) * std::max(pdown * f, 1e-8);
                if (score > best_score * (1 + 1e-12) + 1e-300) {
                    best_score = score;
                    best_var = j;
                }
            }
            return best_var;
        };

        SolveResult res;
        LpResult node = lp.solve();
        lp_iters += node.iterations;
        ++nodes;
        if (node.status != LpStatus::Optimal) {
            res.status = node.status == LpStatus::Infeasible ? SolveStatus::Infeasible
                         : node.status == LpStatus::Unbounded ? SolveStatus::Unbounded
                                                              : SolveStatus::Error;
            res.message = node.status == LpStatus::IterLimit
                              ? "simplex iteration limit at root"
                              : "root relaxation";
            res.nodes = nodes;
            res.simplex_iterations = lp_iters;
            res.wall_seconds = elapsed();
            return res;
        }

        bool node_live = true;
        std::string limit_hit;
        while (true) {
            if (limits.time_limit_seconds > 0 && elapsed() > limits.time_limit_seconds) {
                limit_hit = "time limit";
                break;
            }
            if (limits.node_limit >= 0 && nodes > limits.node_limit) {
                limit_hit = "node limit";
                break;
            }
            if (node_live) {
                node_live = false;
                if (node.objective < cutoff()) {
                    bool fractional = false;
                    for (int j : binaries)
                        if (std::abs(node.x[j] - std::round(node.x[j])) > kIntTol) {
                            fractional = true;
                            break;
                        }
                    bool all_fixed = true;
                    for (int j : binaries)
                        if (lp.col_lower(j) < lp.col_upper(j)) {
                            all_fixed = false;
                            break;
                        }
                    if (all_fixed) {
                        // bounds pin every binary: the LP point is exact
                        if (node.objective < best_obj) {
                            best_obj = node.objective;
                            best_x = node.x;
                            have_incumbent = true;
                        }
                    } else {
                        if (!fractional) try_incumbent(node);
                        if (node.objective < cutoff()) {
                            Frame f;
                            f.var = select_branch(node);
                            f.saved_lo = lp.col_lower(f.var);
                            f.saved_up = lp.col_upper(f.var);
                            f.node_obj = node.objective;
                            f.frac = node.x[f.var] - std::floor(node.x[f.var]);
                            f.first_dir = node.x[f.var] >= 0.5 ? 1 : 0;
                            stack.push_back(f);
                            node_live = true;  // branch from this node next
                        }
                    }
                }
            }
            if (!node_live) {
                while (!stack.empty() && stack.back().next_child >= 2) {
                    lp.set_bounds(stack.back().var, stack.back().saved_lo,
                                  stack.back().saved_up);
                    stack.pop_back();
                }
                if (stack.empty()) break;
            }
            if (have_incumbent) {
                double lb = kInf;
                for (const auto& fr : stack)
                    if (fr.next_child < 2) lb = std::min(lb, fr.node_obj);
                if ((best_obj - lb) / std::max(1e-10, std::abs(best_obj)) <= limits.gap_tol)
                    break;
            }
            Frame& f = stack.back();
            double fix = f.next_child == 0 ? f.first_dir : 1 - f.first_dir;
            ++f.next_child;
            if (f.node_obj >= cutoff()) {
                node_live = false;  // both children dominated; skip the solve
                continue;
            }
            lp.set_bounds(f.var, fix, fix);
            node = lp.solve();
            lp_iters += node.iterations;
            ++nodes;
            if (node.status == LpStatus::IterLimit) {
                limit_hit = "simplex iteration limit";
                break;
            }
            if (node.status == LpStatus::Optimal) {
                double gain = std::max(0.0, node.objective - f.node_obj);
                if (fix == 1.0) {
                    pc[f.var].up_sum += gain / std::max(1e-6, 1.0 - f.frac);
                    ++pc[f.var].up_cnt;
                } else {
                    pc[f.var].down_sum += gain / std::max(1e-6, f.frac);
                    ++pc[f.var].down_cnt;
                }
                node_live = true;
            } else {
                node_live = false;  // infeasible child; unbounded cannot appear below root
            }
        }

        double lb = kInf;
        for (const auto& fr : stack)
            if (fr.next_child < 2) lb = std::min(lb, fr.node_obj);
        if (node_live && node.status == LpStatus::Optimal)
            lb = std::min(lb, node.objective);
        if (limit_hit.empty()) {
            if (!have_incumbent) {
                res.status = SolveStatus::Infeasible;
                res.message = "no integer feasible point";
            } else {
                if (lb == kInf) lb = best_obj;  // tree exhausted
                res.status = SolveStatus::Optimal;
                res.values = best_x;
                res.objective = sign * best_obj;
            }
        } else if (have_incumbent) {
            res.status = SolveStatus::FeasibleLimit;
            res.values = best_x;
            res.objective = sign * best_obj;
            res.message = limit_hit;
        } else {
            res.status = SolveStatus::Error;
            res.message = limit_hit + " before any feasible point was found";
        }
        if (have_incumbent) {
            res.gap = std::isfinite(lb)
                          ? std::max(0.0, (best_obj - lb) /
                                              std::max(1e-10, std::abs(best_obj)))
                          : kInf;
            res.bound = sign * (std::isfinite(lb) ? lb : -kInf);
        }
        res.nodes = nodes;
        res.simplex_iterations = lp_iters;
        res.wall_seconds = elapsed();
        finalize_solution(model, res);
        return res;
    }
};

}  // namespace quantsp::milp
