#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "quantsp/datagen.hpp"
#include "quantsp/problems/cflp.hpp"
#include "quantsp/problems/investment.hpp"

using namespace quantsp;
using Catch::Approx;

namespace {

milp::SolveContext ctx_bb() { return milp::SolveContext{"bb", {}}; }

std::filesystem::path temp_csv(const std::string& stem) {
    return std::filesystem::temp_directory_path() / (stem + ".csv");
}

}  // namespace

TEST_CASE("datasets are worker-count invariant", "[datagen]") {
    auto p = make_cflp(2, 2, 5);
    auto serial = generate(p, 10, 3, 1, ctx_bb());
    auto fanned = generate(p, 10, 3, 4, ctx_bb());
    REQUIRE(serial.samples == fanned.samples);
    REQUIRE(serial.size() == 10);
    REQUIRE(serial.problem_name == "cflp-2-2");
    REQUIRE(serial.generator_seed == 3);
    REQUIRE(serial.features.size() == 2);
}

TEST_CASE("forced draws reproduce a known recourse value", "[datagen]") {
    auto p = make_investment();
    for (auto& f : p.first_stage) f.upper = 0.0;  // pins x at the origin
    p.sampler = [](int count, std::uint64_t) {
        ScenarioSet s;
        s.scenarios.assign(count, Scenario{{5.0, 5.0}, 1.0 / count});
        return s;
    };
    auto ds = generate(p, 1, 42, 1, ctx_bb());
    REQUIRE(ds.samples[0].x == std::vector<double>{0.0, 0.0});
    REQUIRE(ds.samples[0].v == Approx(28.0));
}

TEST_CASE("generated values respect problem-level bounds", "[datagen]") {
    auto inv = generate(make_investment(), 40, 9, 4, ctx_bb());
    for (const auto& s : inv.samples) {
        REQUIRE(s.v >= 0.0);
        REQUIRE(s.v <= 86.0);
    }
    auto cflp = generate(make_cflp(3, 3, 2), 40, 9, 4, ctx_bb());
    for (const auto& s : cflp.samples) REQUIRE(s.v >= 0.0);
}

TEST_CASE("spot checks accept good rows and reject tampering", "[datagen]") {
    auto p = make_cflp(2, 3, 8);
    auto ds = generate(p, 30, 11, 4, ctx_bb());
    REQUIRE_NOTHROW(spot_check(ds, p, ctx_bb(), 0.2));
    auto bad = ds;
    bad.samples[0].v += 1.0;
    REQUIRE_THROWS_AS(spot_check(bad, p, ctx_bb(), 1.0), FormatError);
}

TEST_CASE("datasets round-trip through csv", "[datagen]") {
    auto p = make_investment();
    auto ds = generate(p, 25, 7, 2, ctx_bb());
    auto path = temp_csv("quantsp_roundtrip");
    save_dataset(ds, path);
    auto back = load_dataset(path);
    REQUIRE(back.samples == ds.samples);
    REQUIRE(back.problem_name == ds.problem_name);
    REQUIRE(back.generator_seed == ds.generator_seed);
    REQUIRE(back.features.size() == ds.features.size());
    for (std::size_t j = 0; j < ds.features.size(); ++j) {
        REQUIRE(back.features[j].kind == ds.features[j].kind);
        REQUIRE(back.features[j].lower == ds.features[j].lower);
        REQUIRE(back.features[j].upper == ds.features[j].upper);
    }

    std::ifstream csv(path);
    std::string header;
    std::getline(csv, header);
    REQUIRE(header == "x_0,x_1,value");
}

TEST_CASE("malformed files fail with the offending row", "[datagen]") {
    auto path = temp_csv("quantsp_badrows");
    auto write = [&](const std::string& body) {
        std::ofstream f(path);
        f << body;
        std::ofstream side(path.parent_path() / (path.stem().string() + ".json"));
        side << R"({"schema":1,"problem":"toy","seed":1,"features":[)"
             << R"({"name":"x_0","kind":"continuous","lower":0,"upper":1},)"
             << R"({"name":"x_1","kind":"continuous","lower":0,"upper":1}]})";
    };

    write("x_0,x_1,value\n0.5,0.5,3\n0.5,7\n");
    try {
        load_dataset(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        REQUIRE(std::string(e.what()).find("row 2") != std::string::npos);
    }

    write("x_0,x_1,value\n0.5,abc,3\n");
    REQUIRE_THROWS_AS(load_dataset(path), FormatError);

    write("x_0,x_1,value\n0.5,0.5,nan\n");
    REQUIRE_THROWS_AS(load_dataset(path), FormatError);

    write("x_0,value\n0.5,3\n");  // header disagrees with sidecar
    REQUIRE_THROWS_AS(load_dataset(path), FormatError);

    write("x_0,x_1,value\n0.5,0.5,3,9\n");
    REQUIRE_THROWS_AS(load_dataset(path), FormatError);

    REQUIRE_THROWS_AS(load_dataset(temp_csv("quantsp_no_such_file")), IoError);
}

TEST_CASE("values serialize at full precision", "[datagen]") {
    Dataset ds;
    ds.problem_name = "toy";
    ds.generator_seed = 1;
    ds.features = {{"x_0", milp::VarKind::Continuous, 0.0, 1.0}};
    ds.samples = {{{0.1234567890123456789}, 1.0 / 3.0},
                  {{1e-17}, 12345678.901234567}};
    auto path = temp_csv("quantsp_precision");
    save_dataset(ds, path);
    auto back = load_dataset(path);
    REQUIRE(back.samples == ds.samples);
}
