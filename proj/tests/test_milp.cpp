#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "quantsp/milp/lp_format.hpp"
#include "quantsp/milp/simplex.hpp"
#include "quantsp/milp/solver.hpp"
#include "quantsp/rng.hpp"

using namespace quantsp;
using namespace quantsp::milp;

namespace {

// Random bounded model: feasibility is guaranteed by anchoring every rhs at a
// point drawn from the variable boxes.
MipModel random_model(Rng& rng, int max_bin, int max_cont, bool want_binaries) {
    MipModel m;
    int nb = want_binaries ? 1 + static_cast<int>(rng.below(max_bin)) : 0;
    int nc = static_cast<int>(rng.below(max_cont + 1));
    if (nb + nc == 0) nc = 1;
    std::vector<VarRef> vars;
    std::vector<double> x0;
    for (int i = 0; i < nb; ++i) {
        vars.push_back(m.add_binary("b" + std::to_string(i)));
        x0.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
    }
    for (int i = 0; i < nc; ++i) {
        double lo = rng.uniform(-3.0, 0.0);
        double hi = lo + rng.uniform(0.5, 6.0);
        vars.push_back(m.add_continuous("c" + std::to_string(i), lo, hi));
        x0.push_back(rng.uniform(lo, hi));
    }
    int rows = static_cast<int>(rng.below(6));
    for (int r = 0; r < rows; ++r) {
        LinExpr e;
        double lhs0 = 0.0;
        bool used = false;
        for (std::size_t j = 0; j < vars.size(); ++j) {
            if (!rng.bernoulli(0.6)) continue;
            double c = static_cast<double>(static_cast<int>(rng.below(9)) - 4);
            if (c == 0.0) c = 1.0;
            e.add(c, vars[j]);
            lhs0 += c * x0[j];
            used = true;
        }
        if (!used) continue;
        int rel = static_cast<int>(rng.below(3));
        if (rel == 0) m.add_constraint(e, Relation::LessEqual, lhs0 + rng.uniform(0.0, 4.0));
        else if (rel == 1) m.add_constraint(e, Relation::GreaterEqual, lhs0 - rng.uniform(0.0, 4.0));
        else m.add_constraint(e, Relation::Equal, lhs0);
    }
    LinExpr obj(rng.uniform(-2.0, 2.0));
    for (auto v : vars) obj.add(rng.uniform(-5.0, 5.0), v);
    m.set_objective(obj, rng.bernoulli(0.5) ? Sense::Minimize : Sense::Maximize);
    return m;
}

// Independent LP optimality certificate: primal feasibility plus the
// reduced-cost sign conditions recomputed from raw model data and the duals.
void check_lp_certificate(const MipModel& m, const LpResult& r, double tol = 1e-6) {
    REQUIRE(r.status == LpStatus::Optimal);
    REQUIRE(m.sense() == Sense::Minimize);
    REQUIRE(m.max_violation(r.x) <= tol);

    std::size_t n = m.num_vars();
    const auto& cons = m.constraints();
    std::vector<double> cost(n, 0.0);
    for (const auto& t : m.objective().terms()) cost[t.var.index] += t.coef;

    auto check_col = [&](double x, double lo, double hi, double rc) {
        if (x > lo + 1e-7) REQUIRE(rc <= tol);
        if (x < hi - 1e-7) REQUIRE(rc >= -tol);
    };
    for (std::size_t j = 0; j < n; ++j) {
        double rc = cost[j];
        for (std::size_t row = 0; row < cons.size(); ++row)
            for (const auto& t : cons[row].expr.terms())
                if (static_cast<std::size_t>(t.var.index) == j) rc -= t.coef * r.y[row];
        check_col(r.x[j], m.var(static_cast<std::int32_t>(j)).lower,
                  m.var(static_cast<std::int32_t>(j)).upper, rc);
    }
    for (std::size_t row = 0; row < cons.size(); ++row) {
        double s = cons[row].rhs - m.eval(cons[row].expr, r.x);
        double lo = 0.0, hi = 0.0;
        if (cons[row].rel == Relation::LessEqual) hi = kInf;
        if (cons[row].rel == Relation::GreaterEqual) lo = -kInf;
        check_col(s, lo, hi, -r.y[row]);
    }
}

}  // namespace

TEST_CASE("variable and expression bookkeeping", "[milp]") {
    MipModel m;
    auto x = m.add_continuous("x", 0.0, 10.0);
    auto y = m.add_binary("y");
    REQUIRE(x.index != y.index);
    REQUIRE(m.num_vars() == 2);
    REQUIRE_THROWS_AS(m.add_continuous("bad", 2.0, 1.0), InvalidBounds);

    LinExpr e;
    e.add(2.0, x).add(3.0, x).add(1.0, y);
    e.canonicalize();
    REQUIRE(e.terms().size() == 2);
    REQUIRE(e.terms()[0].coef == Catch::Approx(5.0));

    MipModel other;
    auto z = other.add_continuous("z", 0.0, 1.0);
    REQUIRE_THROWS_AS(m.add_constraint(LinExpr(z), Relation::LessEqual, 1.0),
                      UnknownVariable);
    REQUIRE_THROWS_AS(m.set_bounds(z, 0.0, 1.0), UnknownVariable);
}

TEST_CASE("minimize a single bounded variable", "[milp]") {
    for (const char* backend : {"bb", "enum"}) {
        MipModel m;
        auto x = m.add_continuous("x", 0.0, 10.0);
        m.add_constraint(LinExpr(x), Relation::GreaterEqual, 3.0);
        m.set_objective(LinExpr(x), Sense::Minimize);
        auto res = make_backend(backend)->solve(m, {});
        REQUIRE(res.status == SolveStatus::Optimal);
        REQUIRE(res.objective == Catch::Approx(3.0).margin(1e-9));
        REQUIRE(res.values[x.index] == Catch::Approx(3.0).margin(1e-9));
    }
}

TEST_CASE("binary knapsack against hand enumeration", "[milp]") {
    const double reward[4] = {16, 19, 23, 28};
    const double row1[4] = {2, 3, 4, 5};
    const double row2[4] = {6, 1, 3, 2};
    double best = -1.0;
    int best_mask = -1;
    for (int mask = 0; mask < 16; ++mask) {
        double v = 0, a = 0, b = 0;
        for (int k = 0; k < 4; ++k)
            if (mask & (1 << k)) { v += reward[k]; a += row1[k]; b += row2[k]; }
        if (a <= 5.0 && b <= 5.0 && v > best) { best = v; best_mask = mask; }
    }
    REQUIRE(best == 28.0);
    REQUIRE(best_mask == 8);

    for (const char* backend : {"bb", "enum"}) {
        MipModel m;
        std::vector<VarRef> y;
        LinExpr obj, c1, c2;
        for (int k = 0; k < 4; ++k) {
            y.push_back(m.add_binary("y" + std::to_string(k)));
            obj.add(reward[k], y[k]);
            c1.add(row1[k], y[k]);
            c2.add(row2[k], y[k]);
        }
        m.add_constraint(c1, Relation::LessEqual, 5.0);
        m.add_constraint(c2, Relation::LessEqual, 5.0);
        m.set_objective(obj, Sense::Maximize);
        auto res = make_backend(backend)->solve(m, {});
        REQUIRE(res.status == SolveStatus::Optimal);
        REQUIRE(res.objective == Catch::Approx(28.0).margin(1e-9));
        REQUIRE(res.values[y[3].index] == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(res.values[y[0].index] + res.values[y[1].index] +
                    res.values[y[2].index] ==
                Catch::Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("infeasible and unbounded statuses", "[milp]") {
    for (const char* backend : {"bb", "enum"}) {
        MipModel m;
        auto x = m.add_continuous("x", 0.0, 1.0);
        m.add_constraint(LinExpr(x), Relation::GreaterEqual, 2.0);
        m.set_objective(LinExpr(x), Sense::Minimize);
        auto res = make_backend(backend)->solve(m, {});
        REQUIRE(res.status == SolveStatus::Infeasible);
        REQUIRE(res.values.empty());
    }
    for (const char* backend : {"bb", "enum"}) {
        MipModel m;
        auto x = m.add_continuous("x", 0.0, kInf);
        auto y = m.add_binary("y");
        m.add_constraint(LinExpr(x).add(-1.0, y), Relation::GreaterEqual, 0.0);
        m.set_objective(LinExpr(x), Sense::Maximize);
        auto res = make_backend(backend)->solve(m, {});
        REQUIRE(res.status == SolveStatus::Unbounded);
    }
}

TEST_CASE("enumeration refuses too many binaries", "[milp]") {
    MipModel m;
    LinExpr obj;
    for (int i = 0; i < 21; ++i) obj.add(1.0, m.add_binary("y" + std::to_string(i)));
    m.set_objective(obj, Sense::Minimize);
    REQUIRE_THROWS_AS(EnumerateBackend().solve(m, {}), BackendUnavailable);
}

TEST_CASE("simplex optimality certificates on random LPs", "[milp]") {
    Rng rng(20260817);
    int optimal_seen = 0;
    for (int trial = 0; trial < 150; ++trial) {
        MipModel m = random_model(rng, 1, 4, false);
        m.set_objective(m.objective(), Sense::Minimize);
        LpSolver lp(m);
        LpResult r = lp.solve();
        REQUIRE(r.status != LpStatus::IterLimit);
        if (r.status == LpStatus::Optimal) {
            ++optimal_seen;
            check_lp_certificate(m, r);
        }
    }
    REQUIRE(optimal_seen > 100);
}

TEST_CASE("branch and bound agrees with exhaustive enumeration", "[milp]") {
    Rng rng(7);
    BranchAndBoundBackend bb;
    EnumerateBackend oracle;
    int optimal_seen = 0;
    for (int trial = 0; trial < 200; ++trial) {
        MipModel m = random_model(rng, 7, 3, true);
        SolveLimits limits;
        limits.gap_tol = 1e-9;
        auto ref = oracle.solve(m, limits);
        auto got = bb.solve(m, limits);
        REQUIRE(got.status == ref.status);
        if (ref.status == SolveStatus::Optimal) {
            ++optimal_seen;
            REQUIRE(got.objective ==
                    Catch::Approx(ref.objective).margin(1e-7 * (1 + std::abs(ref.objective))));
            REQUIRE(m.max_violation(got.values) <= 1e-6);
            REQUIRE(got.objective == Catch::Approx(m.objective_value(got.values)).margin(1e-9));
        }
    }
    REQUIRE(optimal_seen > 150);
}

TEST_CASE("solves are deterministic", "[milp]") {
    Rng rng(99);
    MipModel m = random_model(rng, 6, 3, true);
    BranchAndBoundBackend bb;
    auto a = bb.solve(m, {});
    auto b = bb.solve(m, {});
    REQUIRE(a.status == b.status);
    if (a.has_solution()) {
        REQUIRE(a.objective == b.objective);
        REQUIRE(a.values == b.values);
    }
}

TEST_CASE("fixing variables through bounds", "[milp]") {
    MipModel m;
    auto y = m.add_binary("y");
    auto x = m.add_continuous("x", 0.0, 5.0);
    m.add_constraint(LinExpr(x).add(-3.0, y), Relation::LessEqual, 0.0);
    LinExpr obj;
    obj.add(-1.0, x).add(1.0, y);
    m.set_objective(obj, Sense::Minimize);
    m.fix(y, 0.0);
    auto res = BranchAndBoundBackend().solve(m, {});
    REQUIRE(res.status == SolveStatus::Optimal);
    REQUIRE(res.values[y.index] == 0.0);
    REQUIRE(res.values[x.index] == Catch::Approx(0.0).margin(1e-9));
    m.fix(y, 1.0);
    res = BranchAndBoundBackend().solve(m, {});
    REQUIRE(res.status == SolveStatus::Optimal);
    REQUIRE(res.values[x.index] == Catch::Approx(3.0).margin(1e-9));
}

TEST_CASE("backend factory and environment override", "[milp]") {
    REQUIRE(make_backend("bb")->name() == "bb");
    REQUIRE(make_backend("enum")->name() == "enum");
    REQUIRE_THROWS_AS(make_backend("nope"), BackendUnavailable);
    REQUIRE(backend_name("enum") == "enum");
    REQUIRE(backend_name("") == "bb");
}

TEST_CASE("lp text export", "[milp]") {
    MipModel m;
    auto x = m.add_continuous("x", 0.0, 2.5);
    auto y = m.add_binary("y");
    m.add_constraint(LinExpr(x).add(2.0, y), Relation::LessEqual, 3.0, "cap");
    LinExpr obj;
    obj.add(1.0, x).add(-4.0, y);
    m.set_objective(obj, Sense::Maximize);
    std::ostringstream os;
    write_lp(m, os);
    std::string text = os.str();
    REQUIRE(text.find("Maximize") != std::string::npos);
    REQUIRE(text.find("cap:") != std::string::npos);
    REQUIRE(text.find("Binary") != std::string::npos);
    REQUIRE(text.find("End") != std::string::npos);
}
