#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "quantsp/pipeline.hpp"
#include "quantsp/problems/cflp.hpp"
#include "quantsp/problems/investment.hpp"

using namespace quantsp;
using Catch::Approx;

namespace {

milp::SolveContext tight_ctx() {
    milp::SolveContext ctx;
    ctx.backend = "bb";
    ctx.limits.gap_tol = 1e-9;
    return ctx;
}

// dead hidden neuron: the head biases are the quantiles at every input
QuantileNetwork pinned_qnn(std::vector<double> biases) {
    QuantileNetwork net;
    net.kind = NetKind::Qnn;
    net.tau = default_tau_grid(int(biases.size()));
    net.input_scale = {{0.0, 5.0}, {0.0, 5.0}};
    net.layers = {Layer{2, 1, {0.0, 0.0}, {0.0}},
                  Layer{1, int(biases.size()), std::vector<double>(biases.size(), 0.0),
                        std::move(biases)}};
    validate_network(net);
    return net;
}

QuantileNetwork trained_qnn(const TwoStageProblem& p, const milp::SolveContext& ctx,
                            std::uint64_t seed) {
    auto ds = generate(p, 150, seed, 2, ctx);
    TrainConfig cfg;
    cfg.batch_size = 64;
    cfg.hidden_width = 8;
    cfg.epochs = 40;
    cfg.tau = default_tau_grid(5);
    cfg.seed = seed + 1;
    return train(ds, NetKind::Qnn, cfg).first;
}

std::string strip_timing(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        int commas = 0;
        std::size_t cut = line.size();
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == ',' && ++commas == 11) {
                cut = i;
                break;
            }
        }
        out << line.substr(0, cut) << '\n';
    }
    return out.str();
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("a single tolerance candidate is chosen unconditionally", "[pipeline]") {
    auto p = make_investment();
    auto ctx = tight_ctx();
    auto net = pinned_qnn({1.0, 0.5});  // crossing 0.5, fine under delta 500
    auto eval = p.sampler(4, 9);

    auto sel = select_delta(p, net, SurrogateSpec{}, {{500.0}}, eval, ctx);
    REQUIRE(sel.chosen == 0);
    REQUIRE(sel.chosen_delta.has_value());
    REQUIRE(*sel.chosen_delta == 500.0);
    REQUIRE(sel.candidates[0].ok);
    REQUIRE(std::isfinite(sel.candidates[0].evaluation));
}

TEST_CASE("infeasible tolerance candidates are excluded", "[pipeline]") {
    auto p = make_investment();
    auto ctx = tight_ctx();
    auto net = pinned_qnn({1.0, 0.5});
    auto eval = p.sampler(4, 9);

    std::vector<std::optional<double>> deltas = {0.4, std::nullopt};
    auto sel = select_delta(p, net, SurrogateSpec{}, deltas, eval, ctx, 2);
    REQUIRE_FALSE(sel.candidates[0].ok);
    REQUIRE(sel.candidates[1].ok);
    REQUIRE(sel.chosen == 1);
    REQUIRE_FALSE(sel.chosen_delta.has_value());

    REQUIRE_THROWS_AS(
        select_delta(p, net, SurrogateSpec{}, {{0.0}, {0.2}}, eval, ctx),
        AllCandidatesFailed);

    auto iqnn = pinned_qnn({1.0, 2.0});
    iqnn.kind = NetKind::Iqnn;
    REQUIRE_THROWS_AS(select_delta(p, iqnn, SurrogateSpec{}, deltas, eval, ctx),
                      KindMismatch);
    REQUIRE_THROWS_AS(select_delta(p, net, SurrogateSpec{}, {}, eval, ctx), Error);
}

TEST_CASE("tolerance choice ignores candidate order and picks the best score", "[pipeline]") {
    auto p = make_investment();
    auto ctx = tight_ctx();
    auto net = trained_qnn(p, ctx, 21);
    auto eval = p.sampler(9, 5);

    std::vector<std::vector<std::optional<double>>> orders = {
        {0.0, 10.0, 50.0, 100.0, 500.0, std::nullopt},
        {std::nullopt, 500.0, 100.0, 50.0, 10.0, 0.0},
        {50.0, std::nullopt, 0.0, 500.0, 10.0, 100.0},
    };
    std::optional<double> first_choice;
    for (std::size_t o = 0; o < orders.size(); ++o) {
        auto sel = select_delta(p, net, SurrogateSpec{}, orders[o], eval, ctx, 3);
        const auto& best = sel.candidates[sel.chosen];
        for (const auto& c : sel.candidates) {
            if (!c.ok) continue;
            // maximization: the chosen candidate scores at least as well
            REQUIRE(best.evaluation >= c.evaluation - 1e-9);
        }
        if (o == 0)
            first_choice = sel.chosen_delta;
        else if (first_choice.has_value() != sel.chosen_delta.has_value() ||
                 (first_choice && *first_choice != *sel.chosen_delta))
            FAIL("chosen tolerance changed with candidate order");
    }
}

TEST_CASE("sensitivity table normalizes to the best candidate", "[pipeline]") {
    auto p = make_investment();
    auto ctx = tight_ctx();
    auto net = trained_qnn(p, ctx, 33);
    auto eval = p.sampler(9, 5);

    std::vector<std::optional<double>> deltas = {0.0, 10.0, 500.0, std::nullopt};
    auto rows = delta_sensitivity(p, net, SurrogateSpec{}, deltas, eval, ctx, 2);
    REQUIRE(rows.size() == 4);
    int exact_ones = 0;
    for (const auto& r : rows) {
        if (!r.ok) continue;
        REQUIRE(r.scaled_objective >= 1.0 - 1e-12);
        if (r.scaled_objective == 1.0) ++exact_ones;
    }
    REQUIRE(exact_ones >= 1);
    REQUIRE_FALSE(rows[3].delta.has_value());

    auto md = delta_markdown(rows);
    REQUIRE(md.find("unconstrained") != std::string::npos);

    auto path = std::filesystem::temp_directory_path() / "quantsp_delta.csv";
    write_delta_csv(rows, path);
    auto text = slurp(path);
    REQUIRE(text.rfind("delta,status,true_objective", 0) == 0);
    REQUIRE(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("benchmark produces one row per method and lambda", "[pipeline]") {
    auto p = make_investment();
    auto ctx = tight_ctx();

    BenchmarkConfig cfg;
    cfg.methods = {"qnn", "iqnn", "saa"};
    cfg.lambdas = {0.0, 0.5};
    cfg.alpha = 0.9;
    cfg.train_samples = 150;
    cfg.saa_scenarios = 9;
    cfg.eval_set_size = 15;
    cfg.eval_set_count = 3;
    cfg.delta_candidates = {0.0, std::nullopt};
    cfg.delta_eval_size = 9;
    cfg.train.batch_size = 64;
    cfg.train.hidden_width = 8;
    cfg.train.epochs = 40;
    cfg.train.tau = default_tau_grid(5);
    cfg.seed = 7;
    cfg.workers = 3;

    auto rows = run_benchmark(p, cfg, ctx);
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) {
        REQUIRE(r.problem == p.name);
        REQUIRE(r.eval_set_size == 15);
        REQUIRE(r.eval_set_count == 3);
        REQUIRE(r.x.size() == 2);
        REQUIRE(std::isfinite(r.mean_true_objective));
        REQUIRE(r.std_true_objective >= 0.0);
        REQUIRE(std::isfinite(r.relative_gap_vs_saa));
        if (r.method == "saa") REQUIRE(r.relative_gap_vs_saa == 0.0);
    }
    REQUIRE(rows[0].lambda == 0.0);
    REQUIRE(rows[3].lambda == 0.5);

    // the same seeds give the same decisions; only wall times may move
    auto again = run_benchmark(p, cfg, ctx);
    auto p1 = std::filesystem::temp_directory_path() / "quantsp_bench1.csv";
    auto p2 = std::filesystem::temp_directory_path() / "quantsp_bench2.csv";
    write_benchmark_csv(rows, p1);
    write_benchmark_csv(again, p2);
    REQUIRE(strip_timing(slurp(p1)) == strip_timing(slurp(p2)));

    auto md = benchmark_markdown(rows);
    REQUIRE(md.find("| saa |") != std::string::npos);
    REQUIRE(md.find("0.00%") != std::string::npos);

    BenchmarkConfig bad = cfg;
    bad.methods = {"qnn", "mystery"};
    REQUIRE_THROWS_AS(run_benchmark(p, bad, ctx), Error);
    bad = cfg;
    bad.eval_set_count = 0;
    REQUIRE_THROWS_AS(run_benchmark(p, bad, ctx), Error);
}

TEST_CASE("benchmark gaps are signed so positive means worse", "[pipeline]") {
    // two-method run on a minimization problem: the saa reference is optimal
    // for its scenario set, so a deliberately bad surrogate must gap positive
    auto p = make_cflp(2, 2, 3);
    auto ctx = tight_ctx();

    BenchmarkConfig cfg;
    cfg.methods = {"iqnn", "saa"};
    cfg.lambdas = {0.0};
    cfg.train_samples = 100;
    cfg.saa_scenarios = 20;
    cfg.eval_set_size = 20;
    cfg.eval_set_count = 2;
    cfg.train.batch_size = 32;
    cfg.train.hidden_width = 4;
    cfg.train.epochs = 2;  // barely trained on purpose
    cfg.train.tau = default_tau_grid(3);
    cfg.seed = 11;
    cfg.workers = 2;

    auto rows = run_benchmark(p, cfg, ctx);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].method == "iqnn");
    REQUIRE(rows[1].method == "saa");
    REQUIRE(rows[1].relative_gap_vs_saa == 0.0);
    REQUIRE(std::isfinite(rows[0].relative_gap_vs_saa));

    // an identical x in both rows would make the gap exactly zero; otherwise
    // the saa row evaluates its own scenario set optimum, typically better
    if (rows[0].x != rows[1].x) REQUIRE(rows[0].relative_gap_vs_saa != 0.0);
}
