#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "quantsp/cli.hpp"

using namespace quantsp;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out, err;
};

CliResult run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"quantsp"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli::run(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Fresh directory under the system temp root, removed on scope exit.
struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("quantsp_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const char* name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

// Pulls the number out of a printed "label = value" line.
double printed_value(const std::string& out, const std::string& label) {
    auto pos = out.find(label);
    REQUIRE(pos != std::string::npos);
    pos = out.find('=', pos);
    REQUIRE(pos != std::string::npos);
    return std::stod(out.substr(pos + 1));
}

// Two-input network with dead hidden units, so the head biases are the
// quantile outputs no matter what x is.
QuantileNetwork pinned_net(NetKind kind, const std::vector<double>& head_bias) {
    QuantileNetwork net;
    net.kind = kind;
    int k = int(head_bias.size());
    net.tau = default_tau_grid(k);
    net.input_scale = {{0.0, 1.0}, {0.0, 1.0}};
    net.target_scale = {0.0, 1.0};
    Layer hidden;
    hidden.n_in = 2;
    hidden.n_out = 2;
    hidden.weight.assign(4, 0.0);
    hidden.bias.assign(2, 0.0);
    Layer head;
    head.n_in = 2;
    head.n_out = k;
    head.weight.assign(std::size_t(2) * k, 0.0);
    head.bias = head_bias;
    net.layers = {hidden, head};
    validate_network(net);
    return net;
}

}  // namespace

TEST_CASE("gen-data writes the dataset and reports rows", "[cli]") {
    TempDir dir;
    auto out_csv = dir.file("d.csv");
    auto r = run_cli({"gen-data", "--problem", "cflp-2-2", "--samples", "50", "--seed", "1",
                      "--out", out_csv});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("generated 50 rows") != std::string::npos);
    REQUIRE(fs::exists(out_csv));
    CHECK(count_lines(slurp(out_csv)) == 51);  // header + one line per sample

    SECTION("identical flags reproduce the csv byte for byte") {
        auto again = dir.file("d2.csv");
        auto r2 = run_cli({"gen-data", "--problem", "cflp-2-2", "--samples", "50", "--seed",
                           "1", "--out", again});
        REQUIRE(r2.code == 0);
        CHECK(slurp(out_csv) == slurp(again));
    }
    SECTION("a different seed changes the rows") {
        auto other = dir.file("d3.csv");
        auto r2 = run_cli({"gen-data", "--problem", "cflp-2-2", "--samples", "50", "--seed",
                           "2", "--out", other});
        REQUIRE(r2.code == 0);
        CHECK(slurp(out_csv) != slurp(other));
    }
}

TEST_CASE("usage errors exit 2, io errors exit 1", "[cli]") {
    auto missing = run_cli({"gen-data", "--samples", "10"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("--problem") != std::string::npos);

    auto unwritable = run_cli({"gen-data", "--problem", "investment", "--samples", "5",
                               "--out", "/nonexistent_dir/d.csv"});
    CHECK(unwritable.code == 1);
    CHECK(unwritable.err.find("cannot write") != std::string::npos);

    auto badflag = run_cli({"gen-data", "--problem", "investment", "--bogus"});
    CHECK(badflag.code == 2);

    auto nocmd = run_cli({"--seed", "3"});
    CHECK(nocmd.code == 2);

    auto badkind = run_cli({"train", "--data", "x.csv", "--kind", "mlp"});
    CHECK(badkind.code == 2);
}

TEST_CASE("help prints subcommands and flag defaults", "[cli]") {
    auto top = run_cli({"--help"});
    CHECK(top.code == 0);
    CHECK(top.out.find("gen-data") != std::string::npos);
    CHECK(top.out.find("delta-sensitivity") != std::string::npos);

    auto train_help = run_cli({"train", "--help"});
    CHECK(train_help.code == 0);
    CHECK(train_help.out.find("--trials") != std::string::npos);
    CHECK(train_help.out.find("[128]") != std::string::npos);  // batch default shown
}

TEST_CASE("gen-data, train, solve, evaluate chain end to end", "[cli]") {
    TempDir dir;
    auto data = dir.file("d.csv");
    REQUIRE(run_cli({"gen-data", "--problem", "investment", "--samples", "120", "--seed", "5",
                     "--out", data})
                .code == 0);

    auto model = dir.file("m.json");
    auto tr = run_cli({"train", "--data", data, "--kind", "iqnn", "--epochs", "25", "--width",
                       "8", "--tau-count", "9", "--seed", "5", "--out", model});
    INFO(tr.err);
    REQUIRE(tr.code == 0);
    CHECK(tr.out.find("wrote model to") != std::string::npos);
    REQUIRE(fs::exists(model));

    SECTION("training is reproducible") {
        auto model2 = dir.file("m2.json");
        REQUIRE(run_cli({"train", "--data", data, "--kind", "iqnn", "--epochs", "25",
                         "--width", "8", "--tau-count", "9", "--seed", "5", "--out", model2})
                    .code == 0);
        CHECK(slurp(model) == slurp(model2));
    }

    SECTION("solve prints the solution and writes it as json") {
        auto sol = dir.file("sol.json");
        auto sv = run_cli({"solve", "--model", model, "--problem", "investment", "--lambda",
                           "0.5", "--alpha", "0.9", "--out", sol});
        INFO(sv.err);
        REQUIRE(sv.code == 0);
        CHECK(sv.out.find("x = [") != std::string::npos);
        CHECK(sv.out.find("surrogate objective = ") != std::string::npos);
        CHECK(sv.out.find(" s\n") != std::string::npos);

        auto ev = run_cli({"evaluate", "--problem", "investment", "--solution", sol,
                           "--scenarios", "60", "--eval-seed", "11", "--lambda", "0.5"});
        INFO(ev.err);
        REQUIRE(ev.code == 0);
        CHECK(ev.out.find("total") != std::string::npos);

        auto ev2 = run_cli({"evaluate", "--problem", "investment", "--solution", sol,
                            "--scenarios", "60", "--eval-seed", "11", "--lambda", "0.5"});
        CHECK(ev.out == ev2.out);  // fully seeded, no timing in the output
    }

    SECTION("a model sized for another problem is a dimension error") {
        auto sv = run_cli({"solve", "--model", model, "--problem", "cflp-3-3"});
        CHECK(sv.code == 1);
        CHECK(sv.err.find("first-stage variables") != std::string::npos);
    }
}

TEST_CASE("evaluate matches the sorted-tail cvar on hand-built scenarios", "[cli]") {
    TempDir dir;
    auto scen = dir.file("scen.json");
    {
        std::ofstream f(scen);
        f << R"({"schema":1,"scenarios":[
            {"xi":[6,6],"weight":1},{"xi":[8,10],"weight":1},
            {"xi":[12,9],"weight":1},{"xi":[14,14],"weight":1}]})";
    }
    std::vector<double> x{2.0, 3.0};
    auto r = run_cli({"evaluate", "--problem", "investment", "--x", "2,3", "--scenario-file",
                      scen, "--lambda", "1", "--alpha", "0.75"});
    INFO(r.err);
    REQUIRE(r.code == 0);

    // independent arithmetic: four equally weighted scenarios, alpha 0.75 on a
    // maximization leaves exactly the single worst value in the tail
    auto p = problem_from_name("investment");
    milp::SolveContext ctx;
    std::vector<double> v;
    for (auto xi : {std::vector<double>{6, 6}, {8, 10}, {12, 9}, {14, 14}})
        v.push_back(second_stage_value(p, x, Scenario{xi, 0.25}, ctx));
    double fs = first_stage_cost_value(p, x);
    double mean = (v[0] + v[1] + v[2] + v[3]) / 4.0;
    double worst = std::min(std::min(v[0], v[1]), std::min(v[2], v[3]));

    CHECK(printed_value(r.out, "expectation part") == Catch::Approx(fs + mean).margin(1e-9));
    CHECK(printed_value(r.out, "cvar part") == Catch::Approx(fs + worst).margin(1e-9));
    CHECK(printed_value(r.out, "total") ==
          Catch::Approx((fs + mean) + 1.0 * (fs + worst)).margin(1e-9));
}

TEST_CASE("evaluate rejects conflicting or missing solution sources", "[cli]") {
    TempDir dir;
    auto both = run_cli({"evaluate", "--problem", "investment", "--x", "1,1", "--solution",
                         dir.file("none.json"), "--scenarios", "5"});
    CHECK(both.code == 2);
    auto neither = run_cli({"evaluate", "--problem", "investment", "--scenarios", "5"});
    CHECK(neither.code == 2);
    auto wrong_dim = run_cli({"evaluate", "--problem", "investment", "--x", "1,2,3",
                              "--scenarios", "5"});
    CHECK(wrong_dim.code == 1);
    CHECK(wrong_dim.err.find("first-stage variables") != std::string::npos);

    auto bad_scen = dir.file("bad.json");
    {
        std::ofstream f(bad_scen);
        f << R"({"schema":1,"scenarios":[{"xi":[1,2],"weight":-1}]})";
    }
    auto negw = run_cli({"evaluate", "--problem", "investment", "--x", "1,1",
                         "--scenario-file", bad_scen});
    CHECK(negw.code == 1);
    CHECK(negw.err.find("weight") != std::string::npos);
}

TEST_CASE("config file fills flags the command line left out", "[cli]") {
    TempDir dir;
    auto cfg = dir.file("run.json");
    auto out_csv = dir.file("c.csv");
    {
        std::ofstream f(cfg);
        f << R"({"problem":"investment","samples":7,"out":")" << out_csv << R"("})";
    }
    auto r = run_cli({"gen-data", "--config", cfg});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("generated 7 rows") != std::string::npos);

    SECTION("explicit flags beat the file") {
        auto r2 = run_cli({"gen-data", "--config", cfg, "--samples", "4"});
        REQUIRE(r2.code == 0);
        CHECK(r2.out.find("generated 4 rows") != std::string::npos);
    }
    SECTION("unknown keys are rejected") {
        auto bad = dir.file("bad.json");
        {
            std::ofstream f(bad);
            f << R"({"problem":"investment","epohcs":3})";
        }
        auto r2 = run_cli({"gen-data", "--config", bad});
        CHECK(r2.code == 2);
        CHECK(r2.err.find("epohcs") != std::string::npos);
    }
    SECTION("keys of another subcommand are rejected with its name") {
        auto bad = dir.file("other.json");
        {
            std::ofstream f(bad);
            f << R"({"problem":"investment","epochs":3})";
        }
        auto r2 = run_cli({"gen-data", "--config", bad});
        CHECK(r2.code == 2);
        CHECK(r2.err.find("does not apply") != std::string::npos);
    }
    SECTION("a missing config file is a usage error") {
        auto r2 = run_cli({"gen-data", "--config", dir.file("absent.json")});
        CHECK(r2.code == 2);
    }
}

TEST_CASE("select-delta picks the feasible tolerance on a crossing head", "[cli]") {
    TempDir dir;
    auto model = dir.file("crossing.json");
    save_network(pinned_net(NetKind::Qnn, {1.0, 0.5}), model);

    auto r = run_cli({"select-delta", "--model", model, "--problem", "investment", "--deltas",
                      "0,none", "--eval-scenarios", "10", "--eval-seed", "3"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("infeasible") != std::string::npos);
    CHECK(r.out.find("chosen delta = unconstrained") != std::string::npos);

    SECTION("an iqnn model is rejected") {
        auto iq = dir.file("iq.json");
        save_network(pinned_net(NetKind::Iqnn, {1.0, 0.5}), iq);
        auto r2 = run_cli({"select-delta", "--model", iq, "--problem", "investment",
                           "--deltas", "0,none"});
        CHECK(r2.code == 1);
    }
    SECTION("the candidate table lands in --out") {
        auto csv = dir.file("cands.csv");
        auto r2 = run_cli({"select-delta", "--model", model, "--problem", "investment",
                           "--deltas", "0,none", "--eval-scenarios", "10", "--eval-seed", "3",
                           "--out", csv});
        REQUIRE(r2.code == 0);
        auto text = slurp(csv);
        CHECK(text.find("delta,ok,status") != std::string::npos);
        CHECK(count_lines(text) == 3);
    }
}

TEST_CASE("delta-sensitivity writes the scaled table", "[cli]") {
    TempDir dir;
    auto model = dir.file("mono.json");
    save_network(pinned_net(NetKind::Qnn, {0.5, 1.0}), model);

    auto r = run_cli({"delta-sensitivity", "--model", model, "--problem", "investment",
                      "--deltas", "0,none", "--eval-scenarios", "10", "--eval-seed", "3",
                      "--out-dir", dir.file("arts")});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("| delta |") != std::string::npos);
    CHECK(r.out.find("1.00") != std::string::npos);
    auto text = slurp(dir.file("arts") + "/delta_sensitivity.csv");
    CHECK(text.find("delta,status") != std::string::npos);
    CHECK(count_lines(text) == 3);
}

TEST_CASE("benchmark writes csv and markdown with a row per method", "[cli]") {
    TempDir dir;
    auto r = run_cli({"benchmark", "--problem", "investment", "--methods", "iqnn,saa",
                      "--lambdas", "0", "--train-samples", "100", "--saa-scenarios", "9",
                      "--eval-size", "7", "--eval-count", "2", "--epochs", "10", "--width",
                      "4", "--tau-count", "7", "--seed", "2", "--workers", "2", "--out-dir",
                      dir.file("bench")});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("| iqnn |") != std::string::npos);
    CHECK(r.out.find("| saa |") != std::string::npos);
    CHECK(r.out.find("0.00%") != std::string::npos);

    auto csv = slurp(dir.file("bench") + "/benchmark.csv");
    CHECK(count_lines(csv) == 3);  // header + iqnn + saa
    CHECK(slurp(dir.file("bench") + "/benchmark.md") == r.out.substr(0, r.out.find("wrote")));
}
