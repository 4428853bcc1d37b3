#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "quantsp/common.hpp"
#include "quantsp/milp/model.hpp"

namespace quantsp::milp {

// Bounded-variable primal simplex over the computational form
//     min c'x   s.t.  A x + s = b,  l <= (x, s) <= u
// with one slack per row (ranged by the row relation). The basis inverse is
// kept dense and refactorized periodically. Phase 1 minimizes the sum of
// bound violations with a piecewise-linear ratio test, so the solver can warm
// start from any basis; that is what makes node solves in branch and bound
// cheap after a single bound change.

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

struct LpBasis {
    std::vector<std::int32_t> basic;  // column index per row
    std::vector<std::uint8_t> status; // per column, see ColStatus
    bool empty() const { return basic.empty(); }
};

struct LpResult {
    LpStatus status = LpStatus::IterLimit;
    double objective = 0.0;
    std::vector<double> x;        // structural columns only
    std::vector<double> y;        // row duals
    std::vector<double> redcost;  // all columns (structural then slack)
    std::int64_t iterations = 0;
};

class LpSolver {
    enum ColStatus : std::uint8_t { Basic = 0, AtLower = 1, AtUpper = 2, NbFree = 3 };
    enum class Phase1Outcome { Feasible, Infeasible, Breakdown };

    static constexpr double kFeasTol = 1e-9;
    static constexpr double kDualTol = 1e-9;
    static constexpr double kZeroTol = 1e-11;
    static constexpr double kPivotTol = 1e-8;
    static constexpr int kRefactorInterval = 100;
    static constexpr int kStallLimit = 400;

  public:
    // Integrality is ignored here; binary variables come in as their current
    // [lower, upper] box.
    explicit LpSolver(const MipModel& model) {
        m_ = static_cast<int>(model.num_constraints());
        nstruct_ = static_cast<int>(model.num_vars());
        ncols_ = nstruct_ + m_;
        cols_.resize(nstruct_);
        lower_.resize(ncols_);
        upper_.resize(ncols_);
        cost_.assign(ncols_, 0.0);
        b_.resize(m_);

        for (int j = 0; j < nstruct_; ++j) {
            lower_[j] = model.var(j).lower;
            upper_[j] = model.var(j).upper;
        }
        double obj_sign = model.sense() == Sense::Minimize ? 1.0 : -1.0;
        for (const auto& t : model.objective().terms())
            cost_[t.var.index] += obj_sign * t.coef;
        objective_offset_ = obj_sign * model.objective().constant();

        const auto& cons = model.constraints();
        for (int r = 0; r < m_; ++r) {
            for (const auto& t : cons[r].expr.terms())
                cols_[t.var.index].push_back({r, t.coef});
            b_[r] = cons[r].rhs;
            int s = nstruct_ + r;
            switch (cons[r].rel) {
                case Relation::LessEqual: lower_[s] = 0.0; upper_[s] = kInf; break;
                case Relation::GreaterEqual: lower_[s] = -kInf; upper_[s] = 0.0; break;
                case Relation::Equal: lower_[s] = 0.0; upper_[s] = 0.0; break;
            }
        }
    }

    int num_rows() const { return m_; }
    int num_structural() const { return nstruct_; }

    // Bound changes leave the factorization valid; only the basis values need
    // recomputation, which solve() always does.
    void set_bounds(int col, double lo, double up) {
        lower_[col] = lo;
        upper_[col] = up;
    }
    double col_lower(int col) const { return lower_[col]; }
    double col_upper(int col) const { return upper_[col]; }

    LpResult solve(std::int64_t max_iters = -1) {
        if (basis_.basic.empty()) {
            cold_basis();
            binv_valid_ = false;
        }
        if (max_iters < 0) max_iters = 200LL * (m_ + ncols_) + 20000;
        if (!binv_valid_) factorize();
        compute_nonbasic_values();
        compute_basic_values();

        LpResult res;
        std::int64_t iters = 0;
        repair_count_ = 0;
        Phase1Outcome p1 = phase1(iters, max_iters);
        if (p1 != Phase1Outcome::Feasible) {
            res.status = p1 == Phase1Outcome::Infeasible && iters < max_iters
                             ? LpStatus::Infeasible
                             : LpStatus::IterLimit;
            res.iterations = iters;
            return res;
        }
        res.status = phase2(iters, max_iters);
        res.iterations = iters;
        if (res.status == LpStatus::Optimal) {
            res.x.assign(x_.begin(), x_.begin() + nstruct_);
            res.objective = objective_offset_;
            for (int j = 0; j < nstruct_; ++j)
                if (cost_[j] != 0.0) res.objective += cost_[j] * x_[j];
            compute_duals(cost_, res.y);
            res.redcost.resize(ncols_);
            for (int j = 0; j < ncols_; ++j)
                res.redcost[j] = status(j) == Basic ? 0.0 : cost_[j] - col_dot(j, res.y);
        }
        return res;
    }

    void reset_basis() {
        basis_.basic.clear();
        binv_valid_ = false;
    }
    const LpBasis& basis() const { return basis_; }
    void set_basis(LpBasis b) {
        basis_ = std::move(b);
        binv_valid_ = false;
    }

  private:
    ColStatus status(int j) const { return static_cast<ColStatus>(basis_.status[j]); }
    void set_status(int j, ColStatus s) { basis_.status[j] = s; }

    void cold_basis() {
        basis_.basic.resize(m_);
        basis_.status.assign(ncols_, AtLower);
        for (int j = 0; j < nstruct_; ++j) {
            if (std::isfinite(lower_[j])) set_status(j, AtLower);
            else if (std::isfinite(upper_[j])) set_status(j, AtUpper);
            else set_status(j, NbFree);
        }
        for (int r = 0; r < m_; ++r) {
            basis_.basic[r] = nstruct_ + r;
            set_status(nstruct_ + r, Basic);
        }
    }

    void ftran(int j, std::vector<double>& w) const {
        w.assign(m_, 0.0);
        if (j >= nstruct_) {
            int r = j - nstruct_;
            for (int i = 0; i < m_; ++i) w[i] = binv_[static_cast<std::size_t>(i) * m_ + r];
            return;
        }
        for (const auto& [r, v] : cols_[j])
            for (int i = 0; i < m_; ++i) w[i] += v * binv_[static_cast<std::size_t>(i) * m_ + r];
    }

    double col_dot(int j, const std::vector<double>& y) const {
        if (j >= nstruct_) return y[j - nstruct_];
        double s = 0.0;
        for (const auto& [r, v] : cols_[j]) s += v * y[r];
        return s;
    }

    void compute_duals(const std::vector<double>& costvec, std::vector<double>& y) const {
        y.assign(m_, 0.0);
        for (int k = 0; k < m_; ++k) {
            double cb = costvec[basis_.basic[k]];
            if (cb == 0.0) continue;
            const double* row = &binv_[static_cast<std::size_t>(k) * m_];
            for (int i = 0; i < m_; ++i) y[i] += cb * row[i];
        }
    }

    void compute_nonbasic_values() {
        x_.assign(ncols_, 0.0);
        for (int j = 0; j < ncols_; ++j) {
            switch (status(j)) {
                case AtLower: x_[j] = std::isfinite(lower_[j]) ? lower_[j] : 0.0; break;
                case AtUpper: x_[j] = std::isfinite(upper_[j]) ? upper_[j] : 0.0; break;
                default: break;
            }
        }
    }

    void compute_basic_values() {
        std::vector<double> r = b_;
        for (int j = 0; j < ncols_; ++j) {
            if (status(j) == Basic || x_[j] == 0.0) continue;
            if (j >= nstruct_) r[j - nstruct_] -= x_[j];
            else
                for (const auto& [row, v] : cols_[j]) r[row] -= v * x_[j];
        }
        for (int i = 0; i < m_; ++i) {
            double s = 0.0;
            const double* brow = &binv_[static_cast<std::size_t>(i) * m_];
            for (int k = 0; k < m_; ++k) s += brow[k] * r[k];
            x_[basis_.basic[i]] = s;
        }
    }

    // Dense Gauss-Jordan inverse of the basis matrix. A numerically singular
    // basis falls back to the all-slack basis, which always factorizes.
    void factorize() {
        binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
        pivots_since_factor_ = 0;
        binv_valid_ = true;
        if (m_ == 0) return;
        std::vector<double> B(static_cast<std::size_t>(m_) * m_, 0.0);
        for (int k = 0; k < m_; ++k) {
            int j = basis_.basic[k];
            if (j >= nstruct_) B[static_cast<std::size_t>(j - nstruct_) * m_ + k] = 1.0;
            else
                for (const auto& [r, v] : cols_[j]) B[static_cast<std::size_t>(r) * m_ + k] = v;
        }
        for (int i = 0; i < m_; ++i) binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0;
        for (int col = 0; col < m_; ++col) {
            int piv = -1;
            double best = kPivotTol;
            for (int r = col; r < m_; ++r) {
                double a = std::abs(B[static_cast<std::size_t>(r) * m_ + col]);
                if (a > best) { best = a; piv = r; }
            }
            if (piv < 0) {
                cold_basis();
                factorize();
                compute_nonbasic_values();
                return;
            }
            if (piv != col) {
                double* bp = &B[static_cast<std::size_t>(piv) * m_];
                double* bc = &B[static_cast<std::size_t>(col) * m_];
                double* ip = &binv_[static_cast<std::size_t>(piv) * m_];
                double* ic = &binv_[static_cast<std::size_t>(col) * m_];
                for (int k = 0; k < m_; ++k) {
                    std::swap(bp[k], bc[k]);
                    std::swap(ip[k], ic[k]);
                }
            }
            double d = 1.0 / B[static_cast<std::size_t>(col) * m_ + col];
            double* bc = &B[static_cast<std::size_t>(col) * m_];
            double* ic = &binv_[static_cast<std::size_t>(col) * m_];
            for (int k = 0; k < m_; ++k) {
                bc[k] *= d;
                ic[k] *= d;
            }
            for (int r = 0; r < m_; ++r) {
                if (r == col) continue;
                double f = B[static_cast<std::size_t>(r) * m_ + col];
                if (f == 0.0) continue;
                double* br = &B[static_cast<std::size_t>(r) * m_];
                double* ir = &binv_[static_cast<std::size_t>(r) * m_];
                for (int k = 0; k < m_; ++k) {
                    br[k] -= f * bc[k];
                    ir[k] -= f * ic[k];
                }
            }
        }
    }

    // Rank-one basis inverse update after the entering column's ftran result w
    // pivots at row r.
    void update_binv(int r, const std::vector<double>& w) {
        double* prow = &binv_[static_cast<std::size_t>(r) * m_];
        double inv = 1.0 / w[r];
        for (int k = 0; k < m_; ++k) prow[k] *= inv;
        for (int i = 0; i < m_; ++i) {
            if (i == r) continue;
            double f = w[i];
            if (f == 0.0) continue;
            double* irow = &binv_[static_cast<std::size_t>(i) * m_];
            for (int k = 0; k < m_; ++k) irow[k] -= f * prow[k];
        }
        if (++pivots_since_factor_ >= kRefactorInterval) {
            factorize();
            compute_basic_values();
        }
    }

    double infeasibility(int j) const {
        double v = x_[j];
        if (v < lower_[j] - kFeasTol) return lower_[j] - v;
        if (v > upper_[j] + kFeasTol) return v - upper_[j];
        return 0.0;
    }

    double total_infeasibility() const {
        double s = 0.0;
        for (int k = 0; k < m_; ++k) s += infeasibility(basis_.basic[k]);
        return s;
    }

    bool eligible(int j, double rc, int& dir) const {
        if (lower_[j] == upper_[j]) return false;
        switch (status(j)) {
            case AtLower: if (rc < -kDualTol) { dir = 1; return true; } return false;
            case AtUpper: if (rc > kDualTol) { dir = -1; return true; } return false;
            case NbFree:
                if (rc < -kDualTol) { dir = 1; return true; }
                if (rc > kDualTol) { dir = -1; return true; }
                return false;
            default: return false;
        }
    }

    // Entering column by most negative direction-adjusted reduced cost;
    // Bland's rule (lowest eligible index) once anti-cycling kicks in.
    int select_entering(const std::vector<double>& costvec, const std::vector<double>& y,
                        bool bland, int& dir_out, double& rc_out) const {
        int best = -1, best_dir = 0;
        double best_score = kDualTol;
        for (int j = 0; j < ncols_; ++j) {
            if (status(j) == Basic) continue;
            double rc = costvec[j] - col_dot(j, y);
            int dir;
            if (!eligible(j, rc, dir)) continue;
            if (bland) { dir_out = dir; rc_out = rc; return j; }
            double score = std::abs(rc);
            if (score > best_score + 1e-15) {
                best_score = score;
                best = j;
                best_dir = dir;
                rc_out = rc;
            }
        }
        dir_out = best_dir;
        return best;
    }

    struct RatioHit {
        double t = kInf;
        int row = -1;          // leaving basic position; -1 means bound flip
        ColStatus to = AtLower;
    };

    // Two-pass ratio test for a feasible basis: pass one finds the tightest
    // step with bounds relaxed by the feasibility tolerance, pass two picks
    // the largest pivot among candidates within that step.
    RatioHit ratio_test(int enter, int dir, const std::vector<double>& w) const {
        RatioHit hit;
        double own = upper_[enter] - lower_[enter];
        double relaxed = std::isfinite(own) ? own : kInf;
        for (int i = 0; i < m_; ++i) {
            double delta = -dir * w[i];
            if (std::abs(delta) <= kZeroTol) continue;
            int bj = basis_.basic[i];
            double t;
            if (delta > 0) {
                if (!std::isfinite(upper_[bj])) continue;
                t = (upper_[bj] - x_[bj] + kFeasTol) / delta;
            } else {
                if (!std::isfinite(lower_[bj])) continue;
                t = (x_[bj] - lower_[bj] + kFeasTol) / (-delta);
            }
            relaxed = std::min(relaxed, std::max(t, 0.0));
        }
        if (!std::isfinite(relaxed)) return hit;  // unbounded direction

        double best_piv = 0.0;
        for (int i = 0; i < m_; ++i) {
            double delta = -dir * w[i];
            if (std::abs(delta) <= kZeroTol) continue;
            int bj = basis_.basic[i];
            double t;
            ColStatus to;
            if (delta > 0) {
                if (!std::isfinite(upper_[bj])) continue;
                t = (upper_[bj] - x_[bj]) / delta;
                to = AtUpper;
            } else {
                if (!std::isfinite(lower_[bj])) continue;
                t = (x_[bj] - lower_[bj]) / (-delta);
                to = AtLower;
            }
            t = std::max(t, 0.0);
            if (t <= relaxed + kZeroTol && std::abs(w[i]) > best_piv) {
                best_piv = std::abs(w[i]);
                hit.t = t;
                hit.row = i;
                hit.to = to;
            }
        }
        if (std::isfinite(own) && (hit.row < 0 || own < hit.t)) {
            hit.t = own;
            hit.row = -1;
        }
        return hit;
    }

    void apply_step(int enter, int dir, double t, const std::vector<double>& w) {
        if (t != 0.0)
            for (int i = 0; i < m_; ++i) x_[basis_.basic[i]] -= t * dir * w[i];
        x_[enter] += dir * t;
    }

    void flip_entering(int enter) {
        set_status(enter, status(enter) == AtLower ? AtUpper : AtLower);
        x_[enter] = status(enter) == AtUpper ? upper_[enter] : lower_[enter];
    }

    void pivot(int enter, int row, ColStatus leave_to, const std::vector<double>& w) {
        int leave = basis_.basic[row];
        set_status(leave, leave_to);
        x_[leave] = leave_to == AtUpper ? upper_[leave] : lower_[leave];
        basis_.basic[row] = enter;
        set_status(enter, Basic);
        update_binv(row, w);
    }

    // Phase 1 drives the sum of basic bound violations to zero.
    Phase1Outcome phase1(std::int64_t& iters, std::int64_t max_iters) {
        std::vector<double> y, w, p1cost;
        int stall = 0;
        double last_inf = kInf;
        while (true) {
            double inf = total_infeasibility();
            if (inf == 0.0) return Phase1Outcome::Feasible;
            if (iters >= max_iters) return Phase1Outcome::Breakdown;
            if (inf < last_inf - 1e-12) { stall = 0; last_inf = inf; }
            else if (++stall > 50 * (m_ + ncols_) + 5000) return Phase1Outcome::Breakdown;

            p1cost.assign(ncols_, 0.0);
            for (int k = 0; k < m_; ++k) {
                int bj = basis_.basic[k];
                if (x_[bj] < lower_[bj] - kFeasTol) p1cost[bj] = -1.0;
                else if (x_[bj] > upper_[bj] + kFeasTol) p1cost[bj] = 1.0;
            }
            compute_duals(p1cost, y);
            int dir = 0;
            double rc = 0.0;
            int enter = select_entering(p1cost, y, stall > kStallLimit, dir, rc);
            if (enter < 0) return Phase1Outcome::Infeasible;
            ++iters;
            ftran(enter, w);
            if (!phase1_step(enter, dir, std::abs(rc), w)) {
                factorize();
                compute_basic_values();
                if (++repair_count_ > 50) return Phase1Outcome::Breakdown;
            }
        }
    }

    // Piecewise-linear ratio test: basics may sit outside their bounds, and
    // the step length is chosen where the infeasibility slope turns
    // nonnegative. Returns false on numerical breakdown.
    bool phase1_step(int enter, int dir, double slope0, const std::vector<double>& w) {
        struct Event { double t; double add; int row; ColStatus to; };
        std::vector<Event> events;
        events.reserve(2 * static_cast<std::size_t>(m_) + 1);
        for (int i = 0; i < m_; ++i) {
            double delta = -dir * w[i];
            if (std::abs(delta) <= kZeroTol) continue;
            int bj = basis_.basic[i];
            double v = x_[bj], l = lower_[bj], u = upper_[bj];
            double ad = std::abs(delta);
            if (v < l - kFeasTol) {
                if (delta > 0) {
                    events.push_back({(l - v) / delta, ad, i, AtLower});
                    if (std::isfinite(u)) events.push_back({(u - v) / delta, ad, i, AtUpper});
                }
            } else if (v > u + kFeasTol) {
                if (delta < 0) {
                    events.push_back({(v - u) / ad, ad, i, AtUpper});
                    if (std::isfinite(l)) events.push_back({(v - l) / ad, ad, i, AtLower});
                }
            } else {
                if (delta > 0 && std::isfinite(u))
                    events.push_back({std::max(0.0, (u - v) / delta), ad, i, AtUpper});
                else if (delta < 0 && std::isfinite(l))
                    events.push_back({std::max(0.0, (v - l) / ad), ad, i, AtLower});
            }
        }
        std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
            if (a.t != b.t) return a.t < b.t;
            if (a.add != b.add) return a.add > b.add;
            return a.row < b.row;
        });

        double own = upper_[enter] - lower_[enter];
        double slope = -slope0;
        const Event* chosen = nullptr;
        for (const auto& e : events) {
            if (std::isfinite(own) && own < e.t) break;
            slope += e.add;
            chosen = &e;
            if (slope >= -1e-12) break;
        }
        if (chosen && slope >= -1e-12) {
            if (std::abs(w[chosen->row]) < kPivotTol) return false;
            apply_step(enter, dir, std::max(0.0, chosen->t), w);
            pivot(enter, chosen->row, chosen->to, w);
            return true;
        }
        if (std::isfinite(own)) {
            // slope still negative at the entering variable's far bound: flip
            apply_step(enter, dir, own, w);
            flip_entering(enter);
            return true;
        }
        return false;
    }

    LpStatus phase2(std::int64_t& iters, std::int64_t max_iters) {
        std::vector<double> y, w;
        int stall = 0;
        double last_obj = kInf;
        while (true) {
            if (iters >= max_iters) return LpStatus::IterLimit;
            compute_duals(cost_, y);
            int dir = 0;
            double rc = 0.0;
            int enter = select_entering(cost_, y, stall > kStallLimit, dir, rc);
            if (enter < 0) return LpStatus::Optimal;
            ++iters;
            ftran(enter, w);
            RatioHit hit = ratio_test(enter, dir, w);
            if (!std::isfinite(hit.t)) return LpStatus::Unbounded;
            if (hit.row >= 0 && std::abs(w[hit.row]) < kPivotTol) {
                factorize();
                compute_basic_values();
                if (++repair_count_ > 50) return LpStatus::IterLimit;
                continue;
            }
            apply_step(enter, dir, hit.t, w);
            if (hit.row < 0) flip_entering(enter);
            else pivot(enter, hit.row, hit.to, w);

            // periodic refactorization may expose drift; repair via phase 1
            if (pivots_since_factor_ == 0) {
                double inf = total_infeasibility();
                if (inf > 0.0 && phase1(iters, max_iters) != Phase1Outcome::Feasible)
                    return LpStatus::IterLimit;
            }
            double obj = 0.0;
            for (int j = 0; j < nstruct_; ++j)
                if (cost_[j] != 0.0) obj += cost_[j] * x_[j];
            if (obj < last_obj - 1e-12) { stall = 0; last_obj = obj; }
            else if (++stall > 50 * (m_ + ncols_) + 5000) return LpStatus::IterLimit;
        }
    }

    int m_ = 0, nstruct_ = 0, ncols_ = 0;
    std::vector<std::vector<std::pair<int, double>>> cols_;
    std::vector<double> lower_, upper_, cost_, b_;
    double objective_offset_ = 0.0;

    LpBasis basis_;
    std::vector<double> binv_;
    std::vector<double> x_;
    bool binv_valid_ = false;
    int pivots_since_factor_ = 0;
    int repair_count_ = 0;
};

}  // namespace quantsp::milp
