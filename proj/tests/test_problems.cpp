#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "quantsp/problems/cflp.hpp"
#include "quantsp/problems/instance_io.hpp"
#include "quantsp/problems/investment.hpp"

using namespace quantsp;
using Catch::Approx;

namespace {
milp::SolveContext oracle_ctx() {
    milp::SolveContext ctx;
    ctx.backend = "enum";
    return ctx;
}
}  // namespace

TEST_CASE("cflp shapes and flags", "[problems]") {
    auto p = make_cflp(10, 10, 3);
    REQUIRE(p.n_first() == 10);
    REQUIRE(p.scenario_dim == 10);
    REQUIRE(p.sense == Sense::Minimize);
    REQUIRE(p.complete_recourse);
    REQUIRE(p.first_stage_cost.size() == 10);
    for (const auto& v : p.first_stage) REQUIRE(v.kind == milp::VarKind::Binary);

    auto sc = sample_scenarios(p, 3, 11);
    auto ss = second_stage_model(p, std::vector<double>(10, 1.0), sc[0]);
    REQUIRE(ss.model.num_vars() == 110);        // 100 assignments + 10 slacks
    REQUIRE(ss.model.num_constraints() == 20);  // 10 capacity + 10 assignment rows
}

TEST_CASE("cflp with everything closed pays the full penalty", "[problems]") {
    auto p = make_cflp(2, 2, 7);
    const auto& inst = p.instance;
    double rho = inst["penalty"].get<double>();
    auto dbar = inst["demand_mean"].get<std::vector<double>>();
    auto ctx = oracle_ctx();
    auto set = sample_scenarios(p, 5, 99);
    for (const auto& sc : set.scenarios) {
        double expect = rho * (dbar[0] * sc.xi[0] + dbar[1] * sc.xi[1]);
        double v = second_stage_value(p, {0.0, 0.0}, sc, ctx);
        REQUIRE(v == Approx(expect).margin(1e-8));
    }
}

TEST_CASE("cflp recourse improves when more facilities open", "[problems]") {
    auto p = make_cflp(3, 3, 21);
    auto ctx = oracle_ctx();
    auto set = sample_scenarios(p, 4, 5);
    for (const auto& sc : set.scenarios) {
        for (int mask = 0; mask < 8; ++mask) {
            std::vector<double> x = {double(mask & 1), double((mask >> 1) & 1),
                                     double((mask >> 2) & 1)};
            double base = second_stage_value(p, x, sc, ctx);
            for (int add = 0; add < 3; ++add) {
                if (x[add] == 1.0) continue;
                auto x2 = x;
                x2[add] = 1.0;
                REQUIRE(second_stage_value(p, x2, sc, ctx) <= base + 1e-8);
            }
        }
    }
}

TEST_CASE("cflp recourse is feasible for every first stage", "[problems]") {
    auto p = make_cflp(3, 4, 2);
    auto ctx = oracle_ctx();
    auto set = sample_scenarios(p, 3, 77);
    for (std::uint64_t s = 0; s < 6; ++s) {
        auto x = sample_feasible_first_stage(p, s);
        for (const auto& sc : set.scenarios)
            REQUIRE(std::isfinite(second_stage_value(p, x, sc, ctx)));
    }
}

TEST_CASE("investment recourse values at the support corners", "[problems]") {
    auto p = make_investment();
    REQUIRE(p.sense == Sense::Maximize);
    REQUIRE(p.n_first() == 2);
    REQUIRE(p.first_stage_cost == std::vector<double>{1.5, 4.0});
    auto ctx = oracle_ctx();
    Scenario low{{5.0, 5.0}, 1.0};
    Scenario high{{15.0, 15.0}, 1.0};
    REQUIRE(second_stage_value(p, {0.0, 0.0}, low, ctx) == Approx(28.0));
    REQUIRE(second_stage_value(p, {5.0, 5.0}, low, ctx) == Approx(0.0).margin(1e-12));
    REQUIRE(second_stage_value(p, {0.0, 0.0}, high, ctx) == Approx(86.0));
}

TEST_CASE("investment recourse shrinks as purchases grow", "[problems]") {
    auto p = make_investment();
    auto ctx = oracle_ctx();
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        Scenario sc{{rng.uniform(5.0, 15.0), rng.uniform(5.0, 15.0)}, 1.0};
        std::vector<double> a = {rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)};
        std::vector<double> b = {std::min(5.0, a[0] + rng.uniform(0.0, 2.0)),
                                 std::min(5.0, a[1] + rng.uniform(0.0, 2.0))};
        REQUIRE(second_stage_value(p, b, sc, ctx) <=
                second_stage_value(p, a, sc, ctx) + 1e-9);
    }
}

TEST_CASE("samplers are seeded and weighted", "[problems]") {
    auto cflp = make_cflp(4, 6, 1);
    auto a = sample_scenarios(cflp, 40, 123);
    auto b = sample_scenarios(cflp, 40, 123);
    auto c = sample_scenarios(cflp, 40, 124);
    REQUIRE(a.size() == 40);
    bool all_same = true, any_diff_seed = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].xi != b[i].xi) all_same = false;
        if (a[i].xi != c[i].xi) any_diff_seed = true;
        REQUIRE(a[i].weight == Approx(1.0 / 40));
        for (double v : a[i].xi) {
            REQUIRE(v >= 0.8);
            REQUIRE(v <= 1.2);
        }
    }
    REQUIRE(all_same);
    REQUIRE(any_diff_seed);

    // a prefix of a larger sample with the same seed reproduces the smaller one
    auto big = sample_scenarios(cflp, 80, 123);
    REQUIRE(big[7].xi == a[7].xi);
}

TEST_CASE("investment scenario grids for square counts", "[problems]") {
    auto p = make_investment();
    auto g121 = sample_scenarios(p, 121, 5);
    std::set<std::pair<double, double>> pts;
    for (const auto& sc : g121.scenarios) {
        pts.insert({sc.xi[0], sc.xi[1]});
        REQUIRE(sc.xi[0] >= 5.0);
        REQUIRE(sc.xi[0] <= 15.0);
        REQUIRE(std::abs(sc.xi[0] - std::round(sc.xi[0])) < 1e-12);  // integer lattice
    }
    REQUIRE(pts.size() == 121);

    auto g441 = sample_scenarios(p, 441, 5);
    REQUIRE(g441.size() == 441);
    std::set<std::pair<double, double>> pts441;
    for (const auto& sc : g441.scenarios) pts441.insert({sc.xi[0], sc.xi[1]});
    REQUIRE(pts441.size() == 441);
    REQUIRE(pts441.count({5.0, 5.0}) == 1);
    REQUIRE(pts441.count({15.0, 15.0}) == 1);
    REQUIRE(pts441.count({7.5, 10.5}) == 1);

    auto cont = sample_scenarios(p, 200, 5);
    int off_lattice = 0;
    for (const auto& sc : cont.scenarios)
        if (std::abs(sc.xi[0] * 2.0 - std::round(sc.xi[0] * 2.0)) > 1e-9) ++off_lattice;
    REQUIRE(off_lattice > 150);
}

TEST_CASE("feasible first-stage samples cover the box", "[problems]") {
    auto cflp = make_cflp(5, 5, 1);
    int opens = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        auto x = sample_feasible_first_stage(cflp, s);
        for (double v : x) {
            REQUIRE((v == 0.0 || v == 1.0));
            opens += v == 1.0;
        }
    }
    double rate = opens / 5000.0;
    REQUIRE(rate > 0.45);
    REQUIRE(rate < 0.55);

    auto inv = make_investment();
    for (std::uint64_t s = 0; s < 100; ++s) {
        auto x = sample_feasible_first_stage(inv, s);
        REQUIRE(x[0] >= 0.0);
        REQUIRE(x[0] <= 5.0);
        REQUIRE(x[1] >= 0.0);
        REQUIRE(x[1] <= 5.0);
    }
}

TEST_CASE("instances round-trip through json", "[problems]") {
    auto p = make_cflp(3, 5, 42);
    auto j = problem_to_json(p);
    auto q = problem_from_json(j);
    REQUIRE(q.name == p.name);
    REQUIRE(problem_to_json(q) == j);

    auto ctx = oracle_ctx();
    auto set = sample_scenarios(p, 3, 9);
    for (std::uint64_t s = 0; s < 3; ++s) {
        auto x = sample_feasible_first_stage(p, s);
        for (const auto& sc : set.scenarios)
            REQUIRE(second_stage_value(p, x, sc, ctx) ==
                    Approx(second_stage_value(q, x, sc, ctx)).margin(1e-12));
    }

    REQUIRE_THROWS_AS(problem_from_json(nlohmann::json{{"problem", "mystery"}, {"schema", 1}}),
                      FormatError);
    REQUIRE_THROWS_AS(problem_from_json(nlohmann::json::array()), FormatError);
}

TEST_CASE("problems resolve from names", "[problems]") {
    auto p = problem_from_name("cflp-5-5");
    REQUIRE(p.n_first() == 5);
    auto q = problem_from_name("investment");
    REQUIRE(q.name == "investment");
    REQUIRE_THROWS_AS(problem_from_name("warehouse"), Error);
    auto r = problem_from_name("cflp-3-4-s9");
    REQUIRE(r.instance["seed"].get<std::uint64_t>() == 9);
    REQUIRE(r.instance["m"].get<int>() == 4);
}
